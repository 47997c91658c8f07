#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hb/quadrature.hpp"
#include "hb/specfun.hpp"

using namespace hb;
using namespace hb::quadrature;
using std::numbers::pi;

namespace {

Measure atom(const Point& p, double m) {
  Measure mu;
  mu.atoms.push_back({p, m});
  return mu;
}

balayage::BalayageResult point_sweep(const Medium& m, double c, double h) {
  balayage::SweepConfig cfg;
  cfg.h = h;
  return balayage::sweep(atom(Point{0.01, 0.02, 0}, c), balayage::Rho::constant(1.0), m, cfg);
}

}  // namespace

TEST_CASE("empty omega passes vacuously") {
  const Medium m(2, 1.0);
  const GridSpec s = GridSpec::centered(2, Point{0, 0, 0}, 2.0, 0.05);
  const Measure mu = ball_density(s, Point{0, 0, 0}, 0.5, 0.5);
  const QuadratureReport r = verify_quadrature(Mask(s), mu, balayage::Rho::constant(1.0), m, {});
  CHECK(r.vacuous);
  CHECK(r.passed);
  CHECK(r.interior_samples == 0);
}

TEST_CASE("point-mass omega is a quadrature domain for kernel translates") {
  const Medium m(2, 1.0);
  const double c = 2 * pi * std::cyl_bessel_j(1.0, 1.0);
  const auto res = point_sweep(m, c, 0.05);
  REQUIRE(res.feasible);
  const Measure mu = atom(Point{0.01, 0.02, 0}, c);
  const QuadratureReport r = verify_quadrature(res.omega, mu, balayage::Rho::constant(1.0), m, {});
  MESSAGE("exterior error " << r.exterior_max_error << " tolerance " << r.tolerance);
  CHECK(r.hypothesis_ok);
  CHECK(!r.vacuous);
  CHECK(r.tolerance == doctest::Approx(10 * 0.05 * c));
  CHECK(r.exterior_max_error <= r.tolerance);
  CHECK(r.interior_violations == 0);
  CHECK(r.samples > 100);
  CHECK(r.passed);
}

TEST_CASE("exterior error decays under refinement") {
  const Medium m(2, 1.0);
  const double c = 2 * pi * std::cyl_bessel_j(1.0, 1.0);
  const Measure mu = atom(Point{0.01, 0.02, 0}, c);
  std::vector<double> err;
  for (double h : {0.05, 0.025}) {
    const auto res = point_sweep(m, c, h);
    REQUIRE(res.feasible);
    err.push_back(verify_quadrature(res.omega, mu, balayage::Rho::constant(1.0), m, {}).exterior_max_error);
  }
  MESSAGE("observed order " << std::log2(err[0] / err[1]));
  CHECK(std::log2(err[0] / err[1]) >= 1.0);
}

TEST_CASE("mass outside omega is rejected") {
  const Medium m(2, 1.0);
  const GridSpec s = GridSpec::centered(2, Point{0, 0, 0}, 2.0, 0.05);
  const Mask small = ball_mask(s, Point{0, 0, 0}, 0.3);
  const QuadratureReport r =
      verify_quadrature(small, atom(Point{1.0, 0, 0}, 1.0), balayage::Rho::constant(1.0), m, {});
  CHECK(!r.hypothesis_ok);
  CHECK(!r.passed);
}

TEST_CASE("samples near an atom are skipped") {
  const Medium m(2, 1.0);
  const double c = 2 * pi * std::cyl_bessel_j(1.0, 1.0);
  const auto res = point_sweep(m, c, 0.05);
  SamplingPlan plan;
  plan.interior = 100000;
  const QuadratureReport r =
      verify_quadrature(res.omega, atom(Point{0.01, 0.02, 0}, c), balayage::Rho::constant(1.0), m, plan);
  CHECK(r.skipped >= 1);
  CHECK(r.interior_violations == 0);
}

TEST_CASE("mean-value identities for a metaharmonic field") {
  const Medium m(3, 1.0);
  const GridSpec s = GridSpec::centered(3, Point{0, 0, 0}, 2.3, 0.05);
  ScalarField f(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = distance(s.center(i), Point{0, 0, 0}, 3);
    f[i] = r > 0 ? std::sin(r) / r : 1.0;
  }
  // oracle: c_1(2) = 4 pi (sin 2 - 2 cos 2)
  const double c2 = 4 * pi * (std::sin(2.0) - 2 * std::cos(2.0));
  const MeanValueResiduals mv = mean_value_check(f, Point{0, 0, 0}, 2.0, m);
  MESSAGE("ball " << mv.ball_integral << " sphere residual " << mv.sphere_residual);
  CHECK(mv.ball_integral == doctest::Approx(c2).epsilon(1e-3));
  CHECK(mv.ball_residual <= 1e-3 * c2);
  // d_1(2) = 4 pi 2 sin 2
  CHECK(mv.sphere_integral == doctest::Approx(8 * pi * std::sin(2.0)).epsilon(1e-3));

  double last = std::numeric_limits<double>::infinity();
  for (double r : {1.6, 0.8, 0.4}) {
    const MeanValueResiduals v = mean_value_check(f, Point{0.1, -0.05, 0.2}, r, m);
    CHECK(v.ball_residual < last);
    last = v.ball_residual;
  }
  CHECK_THROWS_AS(mean_value_check(f, Point{0, 0, 0}, 2.5, m), GridError);
}

TEST_CASE("null ball") {
  SUBCASE("radius and vanishing exterior potential") {
    for (int dim : {2, 3}) {
      const Medium m(dim, 1.0);
      const double R = null_ball_radius(m);
      const double expected = dim == 2 ? specfun::first_positive_zero(specfun::Order::One)
                                       : specfun::first_positive_zero(specfun::Order::ThreeHalves);
      CHECK(R == doctest::Approx(expected).epsilon(1e-12));
      CHECK(exterior_ball_potential(m, R, 2.0, 200) < 1e-12);
      // the critical radius R_k is not a null radius
      CHECK(exterior_ball_potential(m, radial::r_k(m), 2.0, 200) > 1e-2);
    }
    CHECK_THROWS(null_ball_radius(Medium(2, 0.0)));
  }
  SUBCASE("grid potential of the null ball") {
    const Medium m(2, 1.0);
    const double R = null_ball_radius(m);
    const GridSpec s = GridSpec::centered(2, Point{0, 0, 0}, R + 0.5, 0.05);
    const Measure ball = ball_density(s, Point{0, 0, 0}, R, 1.0);
    double sup = 0.0;
    for (double r : {R + 0.1, R + 0.5, R + 1.5}) {
      for (int a = 0; a < 16; ++a) {
        const Point x{r * std::cos(0.4 * a), r * std::sin(0.4 * a), 0};
        sup = std::max(sup, std::abs(potential_at(ball, x, m)));
      }
    }
    MESSAGE("grid null-ball exterior sup " << sup);
    CHECK(sup <= 10 * s.h);
  }
  SUBCASE("classical balls have positive exterior potential") {
    const Medium m(2, 0.0);
    const GridSpec s = GridSpec::centered(2, Point{0, 0, 0}, 1.5, 0.05);
    const Measure ball = ball_density(s, Point{0, 0, 0}, 1.0, 1.0);
    for (int a = 0; a < 16; ++a) {
      const Point x{1.5 * std::cos(0.4 * a), 1.5 * std::sin(0.4 * a), 0};
      // U = -(1/2) log 1.5 for the unit disc; bounded away from zero
      CHECK(std::abs(potential_at(ball, x, m)) > 0.1);
    }
  }
}

TEST_CASE("adding a disjoint null ball keeps the identity") {
  const Medium m(2, 2.0);
  const double c = 2 * pi * std::cyl_bessel_j(1.0, 2.0 * 0.6) * 0.6 / 2.0;
  GridSpec s;
  s.dim = 2;
  s.h = 0.05;
  s.origin = {-2.0, -3.0, 0};
  s.shape = {160, 120, 1};
  balayage::SweepConfig cfg;
  cfg.box = s;
  cfg.h = s.h;
  const Measure mu = atom(Point{0.01, 0.02, 0}, c);
  const auto res = balayage::sweep(mu, balayage::Rho::constant(1.0), m, cfg);
  REQUIRE(res.feasible);
  const QuadratureReport base = verify_quadrature(res.omega, mu, balayage::Rho::constant(1.0), m, {});
  CHECK(base.passed);
  const double R = null_ball_radius(m);
  const Mask extra = ball_mask(s, Point{3.5, 0, 0}, R);
  CHECK((extra & dilate(res.omega, 2)).empty());
  const QuadratureReport both =
      verify_quadrature(res.omega | extra, mu, balayage::Rho::constant(1.0), m, {});
  MESSAGE("with null ball: error " << both.exterior_max_error << " tolerance " << both.tolerance);
  CHECK(both.passed);
  // a ball of the critical radius instead carries exterior potential
  const Mask wrong = ball_mask(s, Point{3.5, 0, 0}, radial::r_k(m));
  const QuadratureReport bad = verify_quadrature(res.omega | wrong, mu, balayage::Rho::constant(1.0), m, {});
  MESSAGE("with critical-radius ball: error " << bad.exterior_max_error);
  CHECK(bad.exterior_max_error > 10 * both.exterior_max_error);
  SamplingPlan tight;
  tight.tolerance = 2 * both.exterior_max_error;
  CHECK(verify_quadrature(res.omega | extra, mu, balayage::Rho::constant(1.0), m, tight).passed);
  CHECK(!verify_quadrature(res.omega | wrong, mu, balayage::Rho::constant(1.0), m, tight).passed);
}

TEST_CASE("shrunken omega fails the exterior identity") {
  const Medium m(2, 1.0);
  const double c = 2 * pi * std::cyl_bessel_j(1.0, 1.0);
  const auto res = point_sweep(m, c, 0.05);
  const Mask shrunk = ball_mask(res.omega.spec, Point{0.01, 0.02, 0}, 0.8);
  const Measure mu = atom(Point{0.01, 0.02, 0}, c);
  const QuadratureReport good = verify_quadrature(res.omega, mu, balayage::Rho::constant(1.0), m, {});
  const QuadratureReport r = verify_quadrature(shrunk, mu, balayage::Rho::constant(1.0), m, {});
  MESSAGE("shrunken error " << r.exterior_max_error << " computed omega " << good.exterior_max_error);
  CHECK(r.exterior_max_error > 5 * good.exterior_max_error);
  SamplingPlan tight;
  tight.tolerance = 2 * good.exterior_max_error;
  CHECK(verify_quadrature(res.omega, mu, balayage::Rho::constant(1.0), m, tight).passed);
  CHECK(!verify_quadrature(shrunk, mu, balayage::Rho::constant(1.0), m, tight).passed);
}
