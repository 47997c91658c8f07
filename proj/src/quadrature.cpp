#include "hb/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace hb::quadrature {

namespace {

Point random_direction(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Point p{0.0, 0.0, 0.0};
  double n = 0.0;
  do {
    n = 0.0;
    for (int d = 0; d < dim; ++d) {
      p[d] = g(rng);
      n += p[d] * p[d];
    }
  } while (n < 1e-12);
  n = std::sqrt(n);
  for (int d = 0; d < dim; ++d) p[d] /= n;
  return p;
}

bool near_atom(const Measure& mu, const Point& x, double h, int dim) {
  for (const auto& a : mu.atoms) {
    if (distance(a.center, x, dim) < h) return true;
  }
  return false;
}

}  // namespace

QuadratureReport verify_quadrature(const Mask& omega, const Measure& mu, const balayage::Rho& rho,
                                   const Medium& medium, const SamplingPlan& plan) {
  const GridSpec& spec = omega.spec;
  const int dim = spec.dim;
  QuadratureReport rep;
  rep.tolerance = plan.tolerance > 0.0 ? plan.tolerance : 10.0 * spec.h * mu.total_mass();
  if (omega.empty()) {
    rep.vacuous = true;
    rep.passed = true;
    return rep;
  }

  const ScalarField mr = rasterize(mu, spec);
  const Mask near = dilate(omega, 1);
  for (std::size_t i = 0; i < mr.size(); ++i) {
    if (!near[i]) rep.mass_outside += mr[i] * spec.cell_volume();
  }
  rep.hypothesis_ok = rep.mass_outside <= 1e-3 * std::max(mu.total_mass(), 1e-300);
  if (!rep.hypothesis_ok) return rep;

  Measure sat;
  {
    ScalarField f = rho.sample(spec);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!omega[i]) f[i] = 0.0;
    }
    sat.density = std::move(f);
  }

  std::vector<Point> ext;
  std::vector<Point> in;
  {
    Point lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (std::size_t i = 0; i < omega.size(); ++i) {
      if (!omega[i]) continue;
      Point x = spec.center(i);
      for (int d = 0; d < dim; ++d) {
        lo[d] = std::min(lo[d], x[d]);
        hi[d] = std::max(hi[d], x[d]);
      }
    }
    Point c{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) c[d] = 0.5 * (lo[d] + hi[d]);
    double reach = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
      if (omega[i]) reach = std::max(reach, distance(spec.center(i), c, dim));
    }
    const double r1 = reach + 3.0 * spec.h;
    const double r2 = 1.5 * reach + 3.0 * spec.h;
    std::mt19937_64 rng(plan.seed);
    for (int s = 0; s < plan.exterior; ++s) {
      const double r = (s % 2 == 0) ? r1 : r2;
      Point dir = random_direction(rng, dim);
      Point x = c;
      for (int d = 0; d < dim; ++d) x[d] += r * dir[d];
      ext.push_back(x);
    }
    // interior: a sublattice of omega cells
    const std::size_t n = omega.count();
    const std::size_t stride = std::max<std::size_t>(1, n / std::max(1, plan.interior));
    std::size_t seen = 0;
    for (std::size_t i = 0; i < omega.size() && int(in.size()) < plan.interior; ++i) {
      if (!omega[i]) continue;
      if (seen++ % stride == 0) in.push_back(spec.center(i));
    }
  }

  std::vector<double> ext_err(ext.size(), 0.0);
  std::vector<double> in_excess(in.size(), -1e300);
  std::vector<char> ext_skip(ext.size(), 0), in_skip(in.size(), 0);
  const long long ne = (long long)ext.size();
#pragma omp parallel for schedule(dynamic)
  for (long long s = 0; s < ne; ++s) {
    const Point& x = ext[s];
    if (near_atom(mu, x, spec.h, dim)) {
      ext_skip[s] = 1;
      continue;
    }
    ext_err[s] = std::abs(potential_at(sat, x, medium) - potential_at(mu, x, medium));
  }
  const long long ni = (long long)in.size();
#pragma omp parallel for schedule(dynamic)
  for (long long s = 0; s < ni; ++s) {
    const Point& x = in[s];
    if (near_atom(mu, x, spec.h, dim)) {
      in_skip[s] = 1;
      continue;
    }
    in_excess[s] = potential_at(sat, x, medium) - potential_at(mu, x, medium);
  }
  for (std::size_t s = 0; s < ext.size(); ++s) {
    if (ext_skip[s]) {
      ++rep.skipped;
      continue;
    }
    ++rep.exterior_samples;
    rep.exterior_max_error = std::max(rep.exterior_max_error, ext_err[s]);
  }
  rep.interior_max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < in.size(); ++s) {
    if (in_skip[s]) {
      ++rep.skipped;
      continue;
    }
    ++rep.interior_samples;
    rep.interior_max_excess = std::max(rep.interior_max_excess, in_excess[s]);
    if (in_excess[s] > rep.tolerance) ++rep.interior_violations;
  }
  if (rep.interior_samples == 0) rep.interior_max_excess = 0.0;
  rep.samples = rep.exterior_samples + rep.interior_samples;
  rep.passed = rep.exterior_max_error <= rep.tolerance && rep.interior_violations == 0;
  return rep;
}

MeanValueResiduals mean_value_check(const ScalarField& h, const Point& z, double r,
                                    const Medium& medium) {
  const GridSpec& spec = h.spec;
  const int dim = spec.dim;
  for (int d = 0; d < dim; ++d) {
    if (z[d] - r < spec.origin[d] + spec.h || z[d] + r > spec.origin[d] + (spec.shape[d] - 1) * spec.h) {
      throw GridError("mean-value ball exceeds the grid");
    }
  }
  MeanValueResiduals out;
  const double half_diag = 0.5 * spec.h * std::sqrt(double(dim));
  const double vol = spec.cell_volume();
  double acc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Point c = spec.center(i);
    const double d = distance(c, z, dim);
    if (d - half_diag >= r) continue;
    if (d + half_diag <= r) {
      acc += h[i] * vol;
      continue;
    }
    acc += h[i] * vol * cell_fraction_in_ball(spec, c, z, r);
  }
  out.ball_integral = acc;

  const double per_node = std::pow(spec.h / 4.0, dim - 1);
  const int count = std::max(512, int(radial::sphere_area(dim, r) / per_node));
  double sacc = 0.0;
  for (const auto& n : sphere_nodes(dim, z, r, count)) sacc += n.weight * h.interpolate(n.point);
  out.sphere_integral = sacc;

  const double hz = h.interpolate(z);
  out.ball_residual = std::abs(radial::c_k(medium, r) * hz - out.ball_integral);
  out.sphere_residual = std::abs(radial::d_k(medium, r) * hz - out.sphere_integral);
  return out;
}

double null_ball_radius(const Medium& medium) {
  if (medium.classical()) throw std::invalid_argument("no null ball exists for k = 0");
  return specfun::first_positive_zero(medium.half_dim_order()) / medium.k();
}

double exterior_ball_potential(const Medium& medium, double t, double width, int samples) {
  double sup = 0.0;
  for (int s = 1; s <= samples; ++s) {
    const double r = t + width * double(s) / samples;
    sup = std::max(sup, std::abs(radial::potential_ball(medium, t, r)));
  }
  return sup;
}

}  // namespace hb::quadrature
