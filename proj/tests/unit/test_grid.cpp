#include <cmath>
#include <cstdlib>
#include <numbers>

#include "doctest.h"
#include "hb/grid.hpp"

using namespace hb;
using std::numbers::pi;

namespace {

// n^dim cells of width h centered on the origin; odd n puts a cell center there
GridSpec box(int dim, int n, double h) {
  GridSpec s;
  s.dim = dim;
  s.h = h;
  for (int d = 0; d < dim; ++d) {
    s.shape[d] = n;
    s.origin[d] = -0.5 * n * h;
  }
  return s;
}

double radius_of(const GridSpec& s, std::size_t i) {
  const Point p = s.center(i);
  return std::sqrt(p[0] * p[0] + p[1] * p[1] + (s.dim == 3 ? p[2] * p[2] : 0.0));
}

}  // namespace

TEST_CASE("grid spec validation") {
  GridSpec s = box(2, 10, 0.1);
  CHECK_NOTHROW(s.validate());
  s.shape[0] = 2;
  CHECK_THROWS_AS(s.validate(), GridError);
  s = box(2, 10, 0.1);
  s.h = 0.0;
  CHECK_THROWS_AS(s.validate(), GridError);
  s = box(3, 50, 0.1);
  setenv("HB_MAX_CELLS", "1000", 1);
  CHECK_THROWS_AS(s.validate(), GridError);
  unsetenv("HB_MAX_CELLS");
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("centered boxes and cell geometry") {
  const GridSpec s = GridSpec::centered(3, Point{1.0, -2.0, 0.5}, 1.0, 0.1);
  for (int d = 0; d < 3; ++d) {
    CHECK(s.origin[d] + 0.5 * s.shape[d] * s.h == doctest::Approx(Point{1.0, -2.0, 0.5}[d]));
    CHECK(0.5 * s.shape[d] * s.h >= 1.0 - 1e-12);
  }
  const Index3 c = s.locate(Point{1.0, -2.0, 0.5});
  CHECK(distance(s.center(c), Point{1.0, -2.0, 0.5}, 3) <= 0.5 * std::sqrt(3.0) * s.h + 1e-12);
  CHECK(s.boundary_distance(s.index(0, 5, 5)) == 0);
  CHECK(s.equal_volume_radius() == doctest::Approx(std::cbrt(3.0 / (4 * pi)) * 0.1));
}

TEST_CASE("mask morphology") {
  const GridSpec s = box(2, 21, 0.1);
  const Mask b = ball_mask(s, Point{0, 0, 0}, 0.5);
  CHECK(b.count() > 0);
  const Mask d = dilate(b, 1);
  const Mask e = erode(b, 1);
  CHECK(subset_up_to(b, d, 0));
  CHECK(subset_up_to(e, b, 0));
  CHECK(!subset_up_to(d, b, 0));
  CHECK(subset_up_to(d, b, 1));
  CHECK(symmetric_difference(d, b) == outer_layer(b).count());
  CHECK(symmetric_difference(b, e) == inner_layer(b).count());
  int count = 0;
  const Mask two = b | ball_mask(s, Point{0.8, 0.8, 0}, 0.15);
  components(two, &count);
  CHECK(count == 2);
  CHECK(mask_volume(b) == doctest::Approx(b.count() * 0.01));
  const Mask a = annulus_mask(s, Point{0, 0, 0}, 0.3, 0.5);
  CHECK(subset_up_to(a, b, 0));
  CHECK(!a[s.index(10, 10)]);
}

TEST_CASE("measures") {
  Measure m;
  m.atoms.push_back({Point{0, 0, 0}, 2.0});
  m.shells.push_back({Point{0, 0, 0}, 0.5, 3.0});
  CHECK(m.total_mass() == doctest::Approx(2.0 + 3.0 * 2 * pi * 0.5 * 0.5 / 0.5));
  const GridSpec s = box(2, 41, 0.05);
  const ScalarField r = rasterize(m, s);
  CHECK(r.integral() == doctest::Approx(2.0 + 3.0 * pi).epsilon(1e-9));
  Measure bad;
  bad.atoms.push_back({Point{0, 0, 0}, -1.0});
  CHECK_THROWS_AS(bad.validate(2), GridError);
  const Measure bd = ball_density(s, Point{0, 0, 0}, 0.6, 2.0);
  CHECK(bd.total_mass() == doctest::Approx(2.0 * pi * 0.36).epsilon(2e-3));
  // partially covered cells reach one half-diagonal past the ball, bounded by their far corner
  CHECK(bd.support_radius(Point{0, 0, 0}, 2) >= 0.6);
  CHECK(bd.support_radius(Point{0, 0, 0}, 2) <= 0.6 + s.h * std::sqrt(2.0));
}

TEST_CASE("single atom potential equals the kernel") {
  const Medium m(3, 1.0);
  const GridSpec s = box(3, 21, 0.1);
  Measure mu;
  const Point z{0.013, -0.021, 0.007};
  mu.atoms.push_back({z, 2.5});
  const ScalarField U = potential(mu, s, m);
  const Mask sing = singular_cells(mu, s);
  CHECK(sing.count() <= 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (sing[i]) continue;
    worst = std::max(worst, std::abs(U[i] - 2.5 * radial::psi(m, distance(s.center(i), z, 3))));
  }
  CHECK(worst < 1e-13);
}

TEST_CASE("atom on a cell center is regularized and flagged") {
  const Medium m(2, 1.0);
  const GridSpec s = box(2, 11, 0.1);
  Measure mu;
  mu.atoms.push_back({Point{0, 0, 0}, 1.0});
  const ScalarField U = potential(mu, s, m);
  const Mask sing = singular_cells(mu, s);
  REQUIRE(sing.count() == 1);
  const std::size_t c = s.index(5, 5);
  CHECK(sing[c]);
  CHECK(std::isfinite(U[c]));
  CHECK(U[c] == doctest::Approx(radial::smeared_psi(m, s.equal_volume_radius(), 0.0)));
  CHECK(U[c] > U[s.index(5, 6)]);
  CHECK(std::isinf(potential_at(mu, Point{0, 0, 0}, m)));
}

TEST_CASE("shell potential uses the closed form") {
  const Medium m(3, 1.0);
  const GridSpec s = box(3, 25, 0.1);
  Measure mu;
  mu.shells.push_back({Point{0, 0, 0}, 0.6, 1.0});
  const ScalarField U = potential(mu, s, m);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    worst = std::max(worst, std::abs(U[i] - radial::potential_sphere(m, 0.6, radius_of(s, i))));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("ball density potential against the closed form") {
  const Medium m(3, 1.0);
  const GridSpec s = box(3, 61, 0.05);
  const Measure mu = ball_density(s, Point{0, 0, 0}, 1.0, 1.0);
  const ScalarField U = potential(mu, s, m);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = radius_of(s, i);
    if (r < 1.0 + 2 * s.h) continue;
    const double exact = radial::potential_ball(m, 1.0, r);
    err = std::max(err, std::abs(U[i] - exact));
    scale = std::max(scale, std::abs(exact));
  }
  CHECK(err / scale < 1e-3);
}

TEST_CASE("direct and fast convolution agree") {
  for (int dim : {2, 3}) {
    const Medium m(dim, 1.0);
    const GridSpec s = box(dim, dim == 2 ? 41 : 21, 0.1);
    const Measure mu = ball_density(s, Point{0.05, 0.02, 0}, 0.7, 1.3);
    const ScalarField a = potential(mu, s, m, PotentialMethod::Direct);
    const ScalarField b = potential(mu, s, m, PotentialMethod::Fft);
    CHECK(sup_distance(a, b) < 1e-10);
  }
}

TEST_CASE("linearity and symmetry") {
  const Medium m(2, 1.0);
  const GridSpec s = box(2, 41, 0.05);
  Measure a;
  a.atoms.push_back({Point{0.31, 0.12, 0}, 1.0});
  const Measure b = ball_density(s, Point{0, 0, 0}, 0.4, 1.0);
  const ScalarField sum = potential(a + b, s, m);
  const ScalarField parts = potential(a, s, m) + potential(b, s, m);
  CHECK(sup_distance(sum, parts) < 1e-12);

  // a radially symmetric measure centered on a cell center
  const ScalarField U = potential(b, s, m);
  double worst = 0.0;
  for (int i = 0; i < 41; ++i) {
    for (int j = 0; j < 41; ++j) {
      const double v = U[s.index(i, j)];
      worst = std::max(worst, std::abs(v - U[s.index(j, i)]));
      worst = std::max(worst, std::abs(v - U[s.index(40 - i, j)]));
      worst = std::max(worst, std::abs(v - U[s.index(i, 40 - j)]));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("refinement order of the ball potential") {
  const Medium m(2, 1.0);
  const Point probes[] = {{1.5, 0.0, 0}, {0.0, 1.7, 0}, {1.2, 1.2, 0}, {-1.9, 0.4, 0}};
  std::vector<std::vector<double>> vals;
  for (double h : {0.04, 0.02, 0.01}) {
    const GridSpec s = GridSpec::centered(2, Point{0, 0, 0}, 1.2, h);
    const Measure mu = ball_density(s, Point{0, 0, 0}, 1.0, 1.0);
    std::vector<double> v;
    for (const Point& p : probes) v.push_back(potential_at(mu, p, m));
    vals.push_back(v);
  }
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < vals[0].size(); ++i) {
    d1 = std::max(d1, std::abs(vals[0][i] - vals[1][i]));
    d2 = std::max(d2, std::abs(vals[1][i] - vals[2][i]));
  }
  MESSAGE("refinement order " << std::log2(d1 / d2));
  CHECK(std::log2(d1 / d2) >= 1.8);
}

TEST_CASE("discrete Helmholtz operator") {
  const Medium m(3, 1.0);
  SUBCASE("constant field") {
    const GridSpec s = box(3, 9, 0.1);
    const ScalarField c(s, 2.0);
    const ScalarField r = helmholtz_apply(c, m);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.boundary_distance(i) >= 1) CHECK(r[i] == doctest::Approx(-2.0));
    }
  }
  SUBCASE("kernel is annihilated away from the pole at second order") {
    std::vector<double> res;
    for (double h : {0.1, 0.05}) {
      const GridSpec s = GridSpec::centered(3, Point{0, 0, 0}, 1.0, h);
      ScalarField f(s);
      for (std::size_t i = 0; i < s.size(); ++i) f[i] = radial::psi(m, distance(s.center(i), Point{0.0, 0.0, -2.0}, 3));
      const ScalarField r = helmholtz_apply(f, m);
      double worst = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        // same region at both spacings, the first interior layer moves toward the pole as h shrinks
        const bool far = distance(s.center(i), Point{0.0, 0.0, -2.0}, 3) >= 1.2;
        if (s.boundary_distance(i) >= 1 && far) worst = std::max(worst, std::abs(r[i]));
      }
      res.push_back(worst);
    }
    MESSAGE("kernel residuals " << res[0] << " " << res[1]);
    CHECK(res[0] / res[1] > 3.5);
  }
  SUBCASE("discrete potential of a unit atom has unit mass") {
    for (double h : {0.1, 0.05}) {
      const GridSpec s = GridSpec::centered(3, Point{0, 0, 0}, 0.6, h);
      Measure mu;
      mu.atoms.push_back({Point{0.011, 0.017, -0.013}, 1.0});
      const ScalarField r = helmholtz_apply(potential(mu, s, m), m);
      double sum = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.boundary_distance(i) >= 1) sum += r[i] * s.cell_volume();
      }
      MESSAGE("h = " << h << " mass " << sum);
      CHECK(std::abs(sum - 1.0) < 2.0 * h);
    }
  }
}

TEST_CASE("mollification") {
  const Medium m(3, 1.0);
  const GridSpec s = box(3, 41, 0.05);
  Measure mu;
  mu.atoms.push_back({Point{0.012, -0.004, 0.021}, 3.0});
  const ScalarField U = potential(mu, s, m);
  const Mask sing = singular_cells(mu, s);
  std::vector<ScalarField> fields;
  std::vector<double> masses;
  for (double delta : {0.9, 0.6, 0.3}) {
    const Measure md = mollify(mu, delta, s, m);
    masses.push_back(md.total_mass());
    fields.push_back(potential(md, s, m));
  }
  const double tol = 10 * s.h * 3.0 * 1e-2;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (sing[i]) continue;
    CHECK(fields[2][i] <= U[i] + tol);
    CHECK(fields[0][i] <= fields[1][i] + tol);
    CHECK(fields[1][i] <= fields[2][i] + tol);
  }
  // oracle: c (vol(B_r) / c_k(r))^3 with c_k(r) = 4 pi (sin r - r cos r) in 3D at k = 1
  const double deltas[] = {0.9, 0.6, 0.3};
  for (int j = 0; j < 3; ++j) {
    const double r = deltas[j] / 3.0;
    const double ck = 4.0 * pi * (std::sin(r) - r * std::cos(r));
    const double expected = 3.0 * std::pow(4.0 / 3.0 * pi * r * r * r / ck, 3);
    CHECK(masses[j] == doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK(std::abs(masses[2] / 3.0 - 1.0) < std::abs(masses[1] / 3.0 - 1.0));
  CHECK(std::abs(masses[1] / 3.0 - 1.0) < std::abs(masses[0] / 3.0 - 1.0));
  CHECK_THROWS(mollify(mu, 0.0, s, m));
  CHECK_THROWS(mollify(mu, 3 * pi + 0.1, s, m));
}

TEST_CASE("existence precheck") {
  const Medium m(3, 1.0);
  const GridSpec s = box(3, 31, 0.1);
  Measure a;
  a.atoms.push_back({Point{0, 0, 0}, 0.9 * radial::c_k(m, 1.0)});
  CHECK(existence_precheck(a, 1.0, m, s));
  Measure big;
  big.atoms.push_back({Point{0, 0, 0}, 1.01 * radial::c_k(m, pi)});
  for (double r : {0.5, 1.0, 2.0, pi}) CHECK(!existence_precheck(big, r, m, s));
  const Measure d = ball_density(s, Point{0, 0, 0}, 1.0, 0.9);
  CHECK(existence_precheck(d, 0.3, m, s));
}
