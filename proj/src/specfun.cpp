#include "hb/specfun.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace hb::specfun {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = std::numbers::egamma;

std::string unsupported_message(double nu) {
  std::ostringstream os;
  os << "unsupported Bessel order " << nu << " (supported: 0, 1/2, 1, 3/2)";
  return os.str();
}

void require_nonnegative(double t) {
  if (!(t >= 0.0)) throw DomainError("Bessel argument must be nonnegative");
}

void require_positive(double t) {
  if (!(t > 0.0)) throw DomainError("Bessel function of the second kind needs t > 0");
}

// sin t / t - cos t without cancellation near 0.
double sinc_minus_cos(double t) {
  if (std::abs(t) < 0.5) {
    double t2 = t * t;
    double term = t2 / 3.0;  // m = 1
    double sum = term;
    for (int m = 2; m < 12; ++m) {
      // ratio of consecutive terms of (-1)^{m+1} 2m t^{2m} / (2m+1)!
      term *= -t2 * double(m) / double(m - 1) / double((2 * m) * (2 * m + 1));
      sum += term;
    }
    return sum;
  }
  return std::sin(t) / t - std::cos(t);
}

double half_prefactor(double t) { return std::sqrt(2.0 / (kPi * t)); }

double j_half(double t) { return t == 0.0 ? 0.0 : half_prefactor(t) * std::sin(t); }
double j_minus_half(double t) { return half_prefactor(t) * std::cos(t); }
double j_three_halves(double t) { return t == 0.0 ? 0.0 : half_prefactor(t) * sinc_minus_cos(t); }
double y_half(double t) { return -half_prefactor(t) * std::cos(t); }
double y_minus_half(double t) { return half_prefactor(t) * std::sin(t); }
double y_three_halves(double t) { return -half_prefactor(t) * (std::cos(t) / t + std::sin(t)); }

// Hankel expansion: P and Q series truncated at the smallest term.
void hankel_pq(int n, double t, double& p, double& q) {
  const double mu = 4.0 * n * n;
  p = 1.0;
  q = 0.0;
  double a = 1.0;  // a_m / t^m with sign bookkeeping left to the caller
  double last = 1e300;
  for (int m = 1; m < 60; ++m) {
    double odd = 2.0 * m - 1.0;
    a *= (mu - odd * odd) / (double(m) * 8.0 * t);
    double mag = std::abs(a);
    if (mag > last) break;
    last = mag;
    // m odd feeds Q with sign (-1)^{(m-1)/2}; m even feeds P with (-1)^{m/2}
    if (m % 2 == 1) {
      q += ((m / 2) % 2 == 0 ? a : -a);
    } else {
      p += ((m / 2) % 2 == 0 ? a : -a);
    }
    if (mag < 1e-17) break;
  }
}

double harmonic(int m) {
  double h = 0.0;
  for (int i = 1; i <= m; ++i) h += 1.0 / i;
  return h;
}

}  // namespace

UnsupportedOrder::UnsupportedOrder(double nu) : std::invalid_argument(unsupported_message(nu)) {}

Order order_from_value(double nu) {
  if (nu == 0.0) return Order::Zero;
  if (nu == 0.5) return Order::Half;
  if (nu == 1.0) return Order::One;
  if (nu == 1.5) return Order::ThreeHalves;
  throw UnsupportedOrder(nu);
}

double order_value(Order nu) {
  switch (nu) {
    case Order::Zero: return 0.0;
    case Order::Half: return 0.5;
    case Order::One: return 1.0;
    case Order::ThreeHalves: return 1.5;
  }
  return 0.0;
}

double j_integer_series(int n, double t) {
  const double x = 0.5 * t;
  const double x2 = x * x;
  double term = std::pow(x, n) / std::tgamma(n + 1.0);
  double sum = term;
  for (int m = 1; m < 200; ++m) {
    term *= -x2 / (double(m) * double(m + n));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && m > 2) break;
  }
  return sum;
}

double y_integer_series(int n, double t) {
  const double x = 0.5 * t;
  const double x2 = x * x;
  if (n == 0) {
    // Y0 = (2/pi)(ln(t/2)+gamma) J0 + (2/pi) sum_{m>=1} (-1)^{m+1} H_m x^{2m}/(m!)^2
    double term = 1.0;
    double sum = 0.0;
    double hm = 0.0;
    for (int m = 1; m < 200; ++m) {
      term *= -x2 / (double(m) * double(m));
      hm += 1.0 / m;
      double add = -term * hm;
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum) && m > 2) break;
    }
    return (2.0 / kPi) * ((std::log(x) + kEulerGamma) * j_integer_series(0, t) + sum);
  }
  if (n == 1) {
    // Y1 = (2/pi) ln(t/2) J1 - 2/(pi t)
    //      - (1/pi) sum_{m>=0} (-1)^m (psi(m+1)+psi(m+2)) x^{2m+1}/(m!(m+1)!)
    double term = x;  // x^{2m+1}/(m!(m+1)!) with alternating sign
    double sum = 0.0;
    for (int m = 0; m < 200; ++m) {
      if (m > 0) term *= -x2 / (double(m) * double(m + 1));
      double psi_sum = (harmonic(m) - kEulerGamma) + (harmonic(m + 1) - kEulerGamma);
      double add = term * psi_sum;
      sum += add;
      if (m > 2 && std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return (2.0 / kPi) * std::log(x) * j_integer_series(1, t) - 2.0 / (kPi * t) - sum / kPi;
  }
  throw UnsupportedOrder(double(n));
}

double j_integer_asymptotic(int n, double t) {
  double p, q;
  hankel_pq(n, t, p, q);
  const double chi = t - (0.5 * n + 0.25) * kPi;
  return std::sqrt(2.0 / (kPi * t)) * (p * std::cos(chi) - q * std::sin(chi));
}

double y_integer_asymptotic(int n, double t) {
  double p, q;
  hankel_pq(n, t, p, q);
  const double chi = t - (0.5 * n + 0.25) * kPi;
  return std::sqrt(2.0 / (kPi * t)) * (p * std::sin(chi) + q * std::cos(chi));
}

double bessel_j(Order nu, double t) {
  require_nonnegative(t);
  switch (nu) {
    case Order::Zero:
      return t <= kSeriesCutoff ? j_integer_series(0, t) : j_integer_asymptotic(0, t);
    case Order::One:
      return t <= kSeriesCutoff ? j_integer_series(1, t) : j_integer_asymptotic(1, t);
    case Order::Half: return j_half(t);
    case Order::ThreeHalves: return j_three_halves(t);
  }
  return 0.0;
}

double bessel_y(Order nu, double t) {
  require_positive(t);
  switch (nu) {
    case Order::Zero:
      return t <= kSeriesCutoff ? y_integer_series(0, t) : y_integer_asymptotic(0, t);
    case Order::One:
      return t <= kSeriesCutoff ? y_integer_series(1, t) : y_integer_asymptotic(1, t);
    case Order::Half: return y_half(t);
    case Order::ThreeHalves: return y_three_halves(t);
  }
  return 0.0;
}

Derivatives bessel_derivatives(Order nu, double t) {
  require_positive(t);
  // C_v' = C_{v-1} - (v/t) C_v
  switch (nu) {
    case Order::Zero:
      return {-bessel_j(Order::One, t), -bessel_y(Order::One, t)};
    case Order::One:
      return {bessel_j(Order::Zero, t) - bessel_j(Order::One, t) / t,
              bessel_y(Order::Zero, t) - bessel_y(Order::One, t) / t};
    case Order::Half:
      return {j_minus_half(t) - 0.5 * j_half(t) / t, y_minus_half(t) - 0.5 * y_half(t) / t};
    case Order::ThreeHalves:
      return {j_half(t) - 1.5 * j_three_halves(t) / t, y_half(t) - 1.5 * y_three_halves(t) / t};
  }
  return {0.0, 0.0};
}

double positive_zero(Order nu, int n) {
  if (n < 1) throw std::invalid_argument("zero index must be >= 1");
  auto f = [nu](double t) { return bessel_j(nu, t); };
  RootIterator it(f, 0.05, 1e6, 0.05);
  double root = 0.0;
  for (int i = 0; i < n; ++i) {
    auto r = it.next();
    if (!r) throw std::runtime_error("Bessel zero not found");
    root = *r;
  }
  // Newton polish; J' = -J_{v+1} + (v/t) J_v is available through the recurrences.
  for (int i = 0; i < 3; ++i) {
    double d = bessel_derivatives(nu, root).dj;
    double step = bessel_j(nu, root) / d;
    if (!std::isfinite(step) || std::abs(step) > 1e-6) break;
    root -= step;
  }
  return root;
}

double first_positive_zero(Order nu) { return positive_zero(nu, 1); }

double scaled_j(Order nu, double k, double r) {
  const double a = order_value(nu);
  const double kr = k * r;
  if (kr < 1e-4) {
    // (k/2)^a / Gamma(a+1) * (1 - (kr/2)^2/(a+1) + ...)
    const double x2 = 0.25 * kr * kr;
    return std::pow(0.5 * k, a) / std::tgamma(a + 1.0) *
           (1.0 - x2 / (a + 1.0) + x2 * x2 / (2.0 * (a + 1.0) * (a + 2.0)));
  }
  return std::pow(r, -a) * bessel_j(nu, kr);
}

double bisect(const std::function<double(double)>& f, double a, double b, double tol) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw std::invalid_argument("bisect: no sign change on bracket");
  for (int i = 0; i < 400 && std::abs(b - a) > tol; ++i) {
    double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

RootIterator::RootIterator(std::function<double(double)> f, double a, double b, double step)
    : f_(std::move(f)), pos_(a), end_(b), step_(step), fpos_(f_(a)) {}

std::optional<double> RootIterator::next() {
  while (pos_ < end_) {
    double q = std::min(pos_ + step_, end_);
    double fq = f_(q);
    double p = pos_;
    double fp = fpos_;
    pos_ = q;
    fpos_ = fq;
    if (fp == 0.0) continue;  // reported on the previous step
    if (fq == 0.0) return q;
    if ((fp < 0.0) != (fq < 0.0)) return bisect(f_, p, q);
  }
  return std::nullopt;
}

std::vector<double> roots_in(const std::function<double(double)>& f, double a, double b,
                             double step, std::size_t max_count) {
  std::vector<double> out;
  RootIterator it(f, a, b, step);
  while (out.size() < max_count) {
    auto r = it.next();
    if (!r) break;
    out.push_back(*r);
  }
  return out;
}

}  // namespace hb::specfun
