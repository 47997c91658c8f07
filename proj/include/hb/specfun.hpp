#pragma once

// Bessel functions of the first and second kind for the orders needed by the
// radial formulas in two and three dimensions: 0, 1/2, 1 and 3/2.

#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hb::specfun {

class UnsupportedOrder : public std::invalid_argument {
 public:
  explicit UnsupportedOrder(double nu);
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Order { Zero, Half, One, ThreeHalves };

/// Maps a real order onto the supported set; throws UnsupportedOrder otherwise.
Order order_from_value(double nu);
double order_value(Order nu);

double bessel_j(Order nu, double t);
double bessel_y(Order nu, double t);

inline double bessel_j(double nu, double t) { return bessel_j(order_from_value(nu), t); }
inline double bessel_y(double nu, double t) { return bessel_y(order_from_value(nu), t); }

struct Derivatives {
  double dj;
  double dy;
};

/// J' and Y' from the recurrences d/dt(t^v C_v) = t^v C_{v-1}, never by
/// differencing.
Derivatives bessel_derivatives(Order nu, double t);

/// First positive zero j_{nu,1}, to 1e-12 absolute.
double first_positive_zero(Order nu);

/// The n-th positive zero (n >= 1).
double positive_zero(Order nu, int n);

// Branch-level entry points for integer orders. The public bessel_j/bessel_y
// switch from series to asymptotic at kSeriesCutoff; both branches are
// exposed so the seam can be checked.
inline constexpr double kSeriesCutoff = 12.0;
double j_integer_series(int n, double t);
double y_integer_series(int n, double t);
double j_integer_asymptotic(int n, double t);
double y_integer_asymptotic(int n, double t);

/// r^{-a} J_a(k r) with its finite limit at r = 0.
double scaled_j(Order nu, double k, double r);

// ---------------------------------------------------------------------------
// Scalar root finding shared by the radial layer.

/// Bisection on a bracket with f(a) f(b) <= 0, to absolute tolerance tol.
double bisect(const std::function<double(double)>& f, double a, double b, double tol = 1e-13);

/// Successive sign changes of f on (a, b], found by stepping with `step`.
/// Each bracket is refined by bisection; the iterator yields roots in order.
class RootIterator {
 public:
  RootIterator(std::function<double(double)> f, double a, double b, double step);
  std::optional<double> next();

 private:
  std::function<double(double)> f_;
  double pos_;
  double end_;
  double step_;
  double fpos_;
};

std::vector<double> roots_in(const std::function<double(double)>& f, double a, double b,
                             double step, std::size_t max_count = 64);

}  // namespace hb::specfun
