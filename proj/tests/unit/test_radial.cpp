#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hb/grid.hpp"
#include "hb/radial.hpp"

using namespace hb;
using namespace hb::radial;
using std::numbers::pi;

namespace {

const Medium m3(3, 1.0);
const Medium m2(2, 1.0);

// independent root finder for the test oracles
template <class F>
double oracle_bisect(F f, double a, double b) {
  double fa = f(a);
  for (int i = 0; i < 200; ++i) {
    const double c = 0.5 * (a + b);
    const double fc = f(c);
    if ((fc < 0) == (fa < 0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("fundamental solution") {
  CHECK(psi(m3, 1.0) == doctest::Approx(std::cos(1.0) / (4 * pi)).epsilon(1e-14));
  CHECK(psi(m3, 1.0) == doctest::Approx(0.04299594).epsilon(1e-6));
  // -Y0(1)/4 with Y0 from the standard library
  CHECK(psi(m2, 1.0) == doctest::Approx(-std::cyl_neumann(0.0, 1.0) / 4).epsilon(1e-13));
  CHECK(psi(m2, 1.0) == doctest::Approx(-0.02206424).epsilon(1e-6));
  CHECK(std::abs(psi(Medium(3, 1e-4), 1.0) - psi(Medium(3, 0.0), 1.0)) < 1e-8);
  CHECK(psi(Medium(3, 0.0), 2.0) == doctest::Approx(1.0 / (8 * pi)));
  CHECK(psi(Medium(2, 0.0), 2.0) == doctest::Approx(-std::log(2.0) / (2 * pi)));
  CHECK_THROWS(psi(m3, 0.0));
}

TEST_CASE("mean-value kernels") {
  CHECK(c_k(m3, pi) == doctest::Approx(4 * pi * pi).epsilon(1e-14));
  CHECK(c_k(m3, 2.0) == doctest::Approx(4 * pi * (std::sin(2.0) - 2 * std::cos(2.0))).epsilon(1e-14));
  CHECK(d_k(m3, pi / 2) == doctest::Approx(2 * pi * pi).epsilon(1e-14));
  for (const Medium& m : {m2, m3, Medium(2, 0.0), Medium(3, 0.0), Medium(2, 3.0)}) CHECK(c_k(m, 0.0) == 0.0);
  CHECK(c_k(Medium(3, 0.0), 1.0) == doctest::Approx(4 * pi / 3));
  CHECK(d_k(Medium(2, 0.0), 1.0) == doctest::Approx(2 * pi));
}

TEST_CASE("c_k' = d_k on (0, R_k)") {
  for (const Medium& m : {m2, m3, Medium(3, 2.5)}) {
    const double rk = r_k(m);
    for (int i = 1; i < 40; ++i) {
      const double r = rk * i / 40.0;
      const double e = 1e-3 * r;
      // five-point stencil
      const double dc = (-c_k(m, r + 2 * e) + 8 * c_k(m, r + e) - 8 * c_k(m, r - e) + c_k(m, r - 2 * e)) / (12 * e);
      CHECK(dc == doctest::Approx(d_k(m, r)).epsilon(1e-8));
    }
  }
}

TEST_CASE("small k reduces to volume and area") {
  for (int dim : {2, 3}) {
    const Medium m(dim, 1e-4);
    for (int i = 0; i <= 19; ++i) {
      const double r = 0.1 + 0.1 * i;
      CHECK(std::abs(c_k(m, r) / ball_volume(dim, r) - 1.0) < 1e-6);
      CHECK(std::abs(d_k(m, r) / sphere_area(dim, r) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("critical radius") {
  CHECK(r_k(m3) == doctest::Approx(pi).epsilon(1e-14));
  CHECK(std::abs(r_k(m2) - 2.4048256) < 1e-7);
  CHECK(std::abs(r_k(Medium(2, 2.0)) - 1.2024128) < 1e-7);
  CHECK(std::isinf(r_k(Medium(3, 0.0))));
}

TEST_CASE("sphere potential") {
  CHECK(potential_sphere(m3, 1.0, 2.0) == doctest::Approx(std::sin(1.0) * std::cos(2.0) / 2).epsilon(1e-13));
  CHECK(potential_sphere(m3, 1.0, 2.0) == doctest::Approx(-0.175087).epsilon(1e-5));
  for (const Medium& m : {m2, m3, Medium(2, 0.0), Medium(3, 0.0), Medium(3, 1.7)}) {
    for (double t : {0.3, 1.0, 2.2}) {
      const double a = potential_sphere(m, t, t * (1 - 1e-15));
      const double b = potential_sphere(m, t, t * (1 + 1e-15));
      CHECK(std::abs(a - b) < 1e-12);
    }
  }
}

TEST_CASE("sphere potential against surface quadrature") {
  for (const Medium& m : {m2, m3}) {
    const int count = m.dim() == 2 ? 4096 : 200000;
    const auto nodes = sphere_nodes(m.dim(), Point{0, 0, 0}, 1.0, count);
    for (double r : {1.5, 2.0, 3.0}) {
      double acc = 0.0;
      const Point x{r, 0.0, 0.0};
      for (const auto& n : nodes) acc += n.weight * psi(m, distance(n.point, x, m.dim()));
      CHECK(std::abs(acc - potential_sphere(m, 1.0, r)) < 1e-4);
    }
  }
}

TEST_CASE("ball potential") {
  const double ext = (std::sin(1.0) - std::cos(1.0)) * std::cos(2.0) / 2;
  CHECK(potential_ball(m3, 1.0, 2.0) == doctest::Approx(ext).epsilon(1e-13));
  CHECK(potential_ball(m3, 1.0, 2.0) == doctest::Approx(-0.0626646).epsilon(1e-5));
  for (const Medium& m : {m2, m3, Medium(2, 0.0), Medium(3, 0.0)}) {
    for (double t : {0.5, 1.0, 2.0}) {
      CHECK(std::abs(potential_ball(m, t, t * (1 - 1e-15)) - potential_ball(m, t, t * (1 + 1e-15))) < 1e-12);
    }
  }
  // classical Newtonian ball
  const Medium c3(3, 0.0);
  CHECK(potential_ball(c3, 1.0, 0.5) == doctest::Approx((3.0 - 0.25) / 6.0));
  CHECK(potential_ball(c3, 1.0, 2.0) == doctest::Approx(1.0 / 6.0));
  // the ball of radius R_k has zero exterior potential
  CHECK(std::abs(potential_ball(Medium(3, 1.0), 4.493409457909064, 6.0)) < 1e-12);
}

TEST_CASE("point-mass sweep radius") {
  CHECK(*point_mass_radius(m3, 4 * pi * pi) == doctest::Approx(pi).epsilon(1e-10));
  CHECK(*point_mass_radius(m3, 4 * pi * (std::sin(2.0) - 2 * std::cos(2.0))) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(!point_mass_radius(m3, 40.0));
  CHECK(*point_mass_radius(Medium(3, 0.0), 4 * pi / 3 * 8) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ball sweep radius") {
  const double target = 2 * (std::sin(1.0) - std::cos(1.0));
  const double oracle = oracle_bisect([&](double r) { return std::sin(r) - r * std::cos(r) - target; }, 1.0, pi);
  CHECK(*ball_sweep_radius(m3, 2.0, 1.0) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(oracle == doctest::Approx(1.289).epsilon(1e-3));
  CHECK(*ball_sweep_radius(m3, c_k(m3, pi) / c_k(m3, 1.0), 1.0) == doctest::Approx(pi).epsilon(1e-9));
  // c_1(3) = 4 pi (sin 3 - 3 cos 3) = 39.0949..., so the admissible factor at R = 3 is about 1.0098
  CHECK(c_k(m3, 3.0) == doctest::Approx(4 * pi * (std::sin(3.0) - 3 * std::cos(3.0))).epsilon(1e-14));
  CHECK(c_k(m3, pi) / c_k(m3, 3.0) == doctest::Approx(1.00980).epsilon(1e-4));
  CHECK(!ball_sweep_radius(m3, 2.0, 3.0));
}

TEST_CASE("f_T and w_xi") {
  for (const Medium& m : {m2, m3, Medium(2, 1.7)}) {
    for (double T : {0.5, 1.0, 2.0, 3.7}) {
      CHECK(f_T(m, T, T) == doctest::Approx(2 * std::pow(T, m.alpha()) / (pi * m.k())).epsilon(1e-12));
      CHECK(std::abs(f_T_derivative(m, T, T)) < 1e-10);
    }
    for (double xi : {0.4, 1.0, 2.0}) {
      CHECK(std::abs(w_xi(m, xi, xi)) < 1e-12);
      CHECK(std::abs(w_xi_derivative(m, xi, xi)) < 1e-10);
    }
  }
  const double f0 = 2.0 / pi * std::cyl_bessel_j(0.0, 0.8);
  CHECK(f_T(m2, 0.8, 0.0) == doctest::Approx(f0).epsilon(1e-12));
  CHECK(std::abs(f_T(m2, 0.8, 1e-6) - f0) < 1e-6);
}

TEST_CASE("sphere sweep case (d)") {
  const double T = 1.0;
  const double rk = r_k(m2);
  const RadialSweep s = sphere_sweep(m2, T, f_T(m2, T, rk));
  CHECK(s.kind == SweepKind::Ball);
  CHECK(s.applied_case == 'd');
  CHECK(s.outer == doctest::Approx(rk).epsilon(1e-12));
  CHECK(s.inner == 0.0);
  CHECK(s.mass_coefficient == doctest::Approx(c_k(m2, rk) / d_k(m2, T)));
  // interior level of case (d)
  const double t = 0.5 * (f_T(m2, T, 0.0) + f_T(m2, T, rk));
  const RadialSweep b = sphere_sweep(m2, T, t);
  CHECK(b.kind == SweepKind::Ball);
  CHECK(std::abs(f_T(m2, T, b.outer) - t) < 1e-10);
  CHECK(b.outer < rk);
}

TEST_CASE("sphere sweep annulus") {
  const double T = 2.0;
  const double top = f_T(m2, T, T);
  const RadialSweep s = sphere_sweep(m2, T, 0.9 * top);
  REQUIRE(s.kind == SweepKind::Annulus);
  CHECK(std::abs(f_T(m2, T, s.inner) - 0.9 * top) < 1e-10);
  CHECK(std::abs(f_T(m2, T, s.outer) - 0.9 * top) < 1e-10);
  CHECK(s.inner < T);
  CHECK(s.outer > T);
  // annuli only need outer < J_{2,T}; the R_k bound applies to the ball case
  CHECK(s.outer < shell_bracket(m2, T).upper);
  CHECK(s.mass_coefficient == doctest::Approx((c_k(m2, s.outer) - c_k(m2, s.inner)) / d_k(m2, T)));

  // degenerate annulus as the level approaches the maximum
  double prev = 1e9;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const RadialSweep d = sphere_sweep(m2, T, top - eps);
    REQUIRE(d.kind == SweepKind::Annulus);
    const double width = d.outer - d.inner;
    CHECK(width < prev);
    prev = width;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("sphere sweep errors") {
  CHECK_THROWS_AS(sphere_sweep(m2, r_k(m2), 0.1), SweepError);
  CHECK_THROWS_AS(sphere_sweep(m2, 1.0, 1.0), SweepError);
  CHECK_THROWS_AS(sphere_sweep(Medium(2, 0.0), 1.0, 0.1), SweepError);
}

TEST_CASE("shell bracket") {
  const ShellBracket b = shell_bracket(m2, 2.0);
  CHECK(b.lower < 2.0);
  CHECK(b.upper > 2.0);
  if (b.lower > 0.0) CHECK(std::abs(f_T_derivative(m2, 2.0, b.lower)) < 1e-9);
  if (std::isfinite(b.upper)) CHECK(std::abs(f_T_derivative(m2, 2.0, b.upper)) < 1e-9);
}

TEST_CASE("medium validation") {
  CHECK_THROWS(Medium(4, 1.0));
  CHECK_THROWS(Medium(3, -1.0));
  CHECK(Medium(3, 1.0).alpha() == 0.5);
  CHECK(Medium(2, 1.0).alpha() == 0.0);
}
