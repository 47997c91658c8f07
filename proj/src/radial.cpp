#include "hb/radial.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace hb {

Medium::Medium(int dim, double k) : dim_(dim), k_(k) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
  if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("wavenumber must be >= 0");
}

specfun::Order Medium::alpha_order() const {
  return dim_ == 2 ? specfun::Order::Zero : specfun::Order::Half;
}

specfun::Order Medium::half_dim_order() const {
  return dim_ == 2 ? specfun::Order::One : specfun::Order::ThreeHalves;
}

std::string Medium::describe() const {
  std::ostringstream os;
  os << "N=" << dim_ << ";k=" << k_;
  return os.str();
}

}  // namespace hb

namespace hb::radial {

namespace {

constexpr double kPi = std::numbers::pi;
using specfun::bessel_j;
using specfun::bessel_y;

double first_zero_cached(specfun::Order o) {
  static const double z0 = specfun::first_positive_zero(specfun::Order::Zero);
  static const double zh = specfun::first_positive_zero(specfun::Order::Half);
  return o == specfun::Order::Zero ? z0 : zh;
}

void require_positive_radius(double r, const char* what) {
  if (!(r > 0.0)) throw std::domain_error(std::string(what) + ": radius must be positive");
}

}  // namespace

double ball_volume(int dim, double r) {
  return dim == 2 ? kPi * r * r : 4.0 / 3.0 * kPi * r * r * r;
}

double sphere_area(int dim, double r) { return dim == 2 ? 2.0 * kPi * r : 4.0 * kPi * r * r; }

double psi(const Medium& m, double r) {
  require_positive_radius(r, "psi");
  if (m.classical()) {
    return m.dim() == 2 ? -std::log(r) / (2.0 * kPi) : 1.0 / (4.0 * kPi * r);
  }
  const double a = m.alpha();
  const double k = m.k();
  const double b = -std::pow(k, a) / (std::pow(2.0, a + 2.0) * std::pow(kPi, a));
  return b * std::pow(r, -a) * bessel_y(m.alpha_order(), k * r);
}

double c_k(const Medium& m, double r) {
  if (r < 0.0) throw std::domain_error("c_k: negative radius");
  if (r == 0.0) return 0.0;
  if (m.classical()) return ball_volume(m.dim(), r);
  const double k = m.k();
  return std::pow(2.0 * kPi * r / k, 0.5 * m.dim()) * bessel_j(m.half_dim_order(), k * r);
}

double d_k(const Medium& m, double r) {
  if (r < 0.0) throw std::domain_error("d_k: negative radius");
  if (m.classical()) return sphere_area(m.dim(), r);
  const double k = m.k();
  return std::pow(2.0 * kPi * r, 0.5 * m.dim()) * bessel_j(m.alpha_order(), k * r) /
         std::pow(k, m.alpha());
}

double r_k(const Medium& m) {
  if (m.classical()) return kUnbounded;
  return first_zero_cached(m.alpha_order()) / m.k();
}

double potential_sphere(const Medium& m, double t, double r) {
  require_positive_radius(t, "potential_sphere");
  if (r < 0.0) throw std::domain_error("potential_sphere: negative evaluation radius");
  if (m.classical()) {
    if (m.dim() == 3) return r <= t ? t : t * t / r;
    return r <= t ? -t * std::log(t) : -t * std::log(r);
  }
  const double k = m.k();
  const double a = m.alpha();
  const double tn = std::pow(t, 0.5 * m.dim());
  if (r <= t) {
    const double b = -kPi * tn * bessel_y(m.alpha_order(), k * t) / 2.0;
    return b * specfun::scaled_j(m.alpha_order(), k, r);
  }
  return -(kPi * tn * bessel_j(m.alpha_order(), k * t) / 2.0) * std::pow(r, -a) *
         bessel_y(m.alpha_order(), k * r);
}

double potential_ball(const Medium& m, double t, double r) {
  require_positive_radius(t, "potential_ball");
  if (r < 0.0) throw std::domain_error("potential_ball: negative evaluation radius");
  if (m.classical()) {
    if (m.dim() == 3) return r <= t ? (3.0 * t * t - r * r) / 6.0 : t * t * t / (3.0 * r);
    return r <= t ? -0.5 * t * t * std::log(t) + 0.25 * (t * t - r * r)
                  : -0.5 * t * t * std::log(r);
  }
  const double k = m.k();
  const double a = m.alpha();
  const double tn = std::pow(t, 0.5 * m.dim());
  if (r <= t) {
    const double ak = -kPi * tn * bessel_y(m.half_dim_order(), k * t) / (2.0 * k);
    return ak * specfun::scaled_j(m.alpha_order(), k, r) - 1.0 / (k * k);
  }
  return -(kPi * tn * bessel_j(m.half_dim_order(), k * t) / (2.0 * k)) * std::pow(r, -a) *
         bessel_y(m.alpha_order(), k * r);
}

double smeared_psi(const Medium& m, double a, double d) {
  return potential_ball(m, a, d) / ball_volume(m.dim(), a);
}

std::optional<double> point_mass_radius(const Medium& m, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("point mass must be positive");
  if (m.classical()) {
    return std::pow(c / ball_volume(m.dim(), 1.0), 1.0 / m.dim());
  }
  const double rk = r_k(m);
  const double cmax = c_k(m, rk);
  if (c > cmax * (1.0 + 1e-14)) return std::nullopt;
  if (c >= cmax) return rk;
  return specfun::bisect([&](double r) { return c_k(m, r) - c; }, 0.0, rk, 1e-14);
}

std::optional<double> ball_sweep_radius(const Medium& m, double c, double R) {
  if (!(c > 1.0)) throw std::invalid_argument("ball sweep needs density c > 1");
  require_positive_radius(R, "ball_sweep_radius");
  const double target_rhs = c * c_k(m, R);
  if (m.classical()) return std::pow(c, 1.0 / m.dim()) * R;
  const double rk = r_k(m);
  if (R >= rk) return std::nullopt;
  const double cmax = c_k(m, rk);
  if (target_rhs > cmax * (1.0 + 1e-14)) return std::nullopt;
  if (target_rhs >= cmax) return rk;
  return specfun::bisect([&](double r) { return c_k(m, r) - target_rhs; }, R, rk, 1e-14);
}

double f_T(const Medium& m, double T, double xi) {
  if (m.classical()) throw std::invalid_argument("f_T needs k > 0");
  require_positive_radius(T, "f_T");
  if (xi < 0.0) throw std::domain_error("f_T: negative argument");
  const double k = m.k();
  const double nu = 0.5 * m.dim();
  const double ja = bessel_j(m.alpha_order(), k * T);
  if (xi == 0.0) {
    // xi^nu J_nu(k xi) -> 0 and xi^nu Y_nu(k xi) -> -Gamma(nu) 2^nu / (pi k^nu)
    return std::tgamma(nu) * std::pow(2.0, nu) / (kPi * std::pow(k, nu)) * ja;
  }
  const double ya = bessel_y(m.alpha_order(), k * T);
  return std::pow(xi, nu) *
         (bessel_j(m.half_dim_order(), k * xi) * ya - bessel_y(m.half_dim_order(), k * xi) * ja);
}

double f_T_derivative(const Medium& m, double T, double xi) {
  if (m.classical()) throw std::invalid_argument("f_T needs k > 0");
  require_positive_radius(xi, "f_T_derivative");
  const double k = m.k();
  const auto o = m.alpha_order();
  return k * std::pow(xi, 0.5 * m.dim()) *
         (bessel_j(o, k * xi) * bessel_y(o, k * T) - bessel_y(o, k * xi) * bessel_j(o, k * T));
}

double w_xi(const Medium& m, double xi, double r) {
  require_positive_radius(r, "w_xi");
  const double k = m.k();
  return (1.0 - 0.5 * kPi * k * std::pow(r, -m.alpha()) * f_T(m, r, xi)) / (k * k);
}

double w_xi_derivative(const Medium& m, double xi, double r) {
  require_positive_radius(r, "w_xi_derivative");
  const double k = m.k();
  const auto o = m.half_dim_order();
  return 0.5 * kPi * std::pow(xi, 0.5 * m.dim()) * std::pow(r, -m.alpha()) *
         (bessel_j(o, k * xi) * bessel_y(o, k * r) - bessel_y(o, k * xi) * bessel_j(o, k * r));
}

ShellBracket shell_bracket(const Medium& m, double T) {
  if (m.classical()) throw std::invalid_argument("shell_bracket needs k > 0");
  const double k = m.k();
  const auto o = m.alpha_order();
  const double jt = bessel_j(o, k * T);
  const double yt = bessel_y(o, k * T);
  // sign of f_T' is the sign of this cross product
  auto g = [&](double r) { return bessel_j(o, k * r) * yt - bessel_y(o, k * r) * jt; };
  const double step = std::min(T, kPi / k) / 400.0;
  const double limit = T + 4.0 * kPi / k;
  ShellBracket br{0.0, kUnbounded};
  for (double z : specfun::roots_in(g, 1e-3 * step, limit, step)) {
    if (std::abs(z - T) < 1e-8 * std::max(1.0, T)) continue;
    if (z < T) br.lower = z;
    if (z > T) {
      br.upper = z;
      break;
    }
  }
  return br;
}

RadialSweep sphere_sweep(const Medium& m, double T, double t) {
  if (m.classical()) throw SweepError("sphere sweep needs k > 0");
  require_positive_radius(T, "sphere_sweep");
  const double k = m.k();
  if (std::abs(bessel_j(m.alpha_order(), k * T)) < 1e-12) {
    throw SweepError("J_alpha(kT) = 0: sphere radius excluded");
  }
  const double fmax = 2.0 * std::pow(T, m.alpha()) / (kPi * k);
  if (!(t < fmax)) throw SweepError("level t must lie below f_T(T)");

  auto f = [&](double xi) { return f_T(m, T, xi); };
  const double rk = r_k(m);
  RadialSweep out;

  if (T < rk) {
    const double f0 = f(0.0);
    const double fr = f(rk);
    if (f0 >= t && t >= fr) {
      out.kind = SweepKind::Ball;
      out.applied_case = 'd';
      out.outer = t == fr ? rk : specfun::bisect([&](double x) { return f(x) - t; }, T, rk, 1e-14);
      out.inner = 0.0;
      out.mass_coefficient = c_k(m, out.outer) / d_k(m, T);
      return out;
    }
    if (f0 < fr) {
      out.applied_case = 'b';
    } else if (t > f0) {
      out.applied_case = 'c';
    } else {
      return out;  // below f_T(R_k) with f_T(0) >= f_T(R_k): not covered
    }
  } else {
    out.applied_case = 'a';
  }

  const ShellBracket br = shell_bracket(m, T);
  double upper = br.upper;
  if (!std::isfinite(upper)) upper = T + 4.0 * kPi / k;
  if (!(f(br.lower) < t) || !(f(upper) < t)) return out;
  out.inner = specfun::bisect([&](double x) { return f(x) - t; }, br.lower, T, 1e-14);
  out.outer = specfun::bisect([&](double x) { return f(x) - t; }, T, upper, 1e-14);
  out.kind = SweepKind::Annulus;
  out.mass_coefficient = (c_k(m, out.outer) - c_k(m, out.inner)) / d_k(m, T);
  return out;
}

}  // namespace hb::radial
