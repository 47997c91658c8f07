#include "hb/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hb/balayage.hpp"
#include "hb/linalg.hpp"

namespace hb::dirichlet {

namespace {

constexpr double kMinFraction = 1e-6;

}  // namespace

Solution solve(const Problem& p) {
  const GridSpec& spec = p.mask.spec;
  if (!p.boundary_data.spec.same_as(spec)) throw GridError("boundary data grid differs from the mask");
  if (p.mask.empty()) throw GridError("Dirichlet problem on an empty set");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (p.mask[i] && spec.boundary_distance(i) == 0) {
      throw GridError("Dirichlet domain touches the box boundary");
    }
  }

  const double k2 = p.medium.k() * p.medium.k();
  Solution sol;
  sol.lambda1 = balayage::lambda1_estimate(p.mask);
  if (!(sol.lambda1 > k2)) {
    std::ostringstream os;
    os << "lambda_1 = " << sol.lambda1 << " does not exceed k^2 = " << k2
       << ": the maximum principle fails on this domain";
    throw SpectralError(os.str(), sol.lambda1, k2);
  }

  linalg::Operator a = linalg::helmholtz_operator(p.mask, k2);
  const double inv_h2 = 1.0 / (spec.h * spec.h);
  const auto st = spec.strides();
  std::vector<double> b(a.size(), 0.0);
  for (std::size_t c = 0; c < a.size(); ++c) {
    const std::size_t i = a.set.cells[c];
    const Point xi = spec.center(i);
    for (int d = 0; d < spec.dim; ++d) {
      for (int side : {-1, 1}) {
        const std::size_t j = i + side * st[d];
        if (p.mask[j]) continue;
        if (!p.level_set) {
          b[c] += p.boundary_data[j] * inv_h2;
          continue;
        }
        const Point xj = spec.center(j);
        const double pi = p.level_set(xi);
        const double pj = p.level_set(xj);
        double theta = (pi < 0.0 && pj > pi) ? pi / (pi - pj) : 1.0;
        theta = std::clamp(theta, kMinFraction, 1.0);
        Point xg = xi;
        xg[d] += side * theta * spec.h;
        const double g = p.boundary_function ? p.boundary_function(xg) : p.boundary_data[j];
        // ghost value extrapolated linearly through the interface
        a.diag[c] += inv_h2 * (1.0 / theta - 1.0);
        b[c] += g * inv_h2 / theta;
      }
    }
  }

  std::vector<double> x(a.size(), 0.0);
  linalg::CgStatus cg = linalg::pcg(a, b, x, 1e-10, 50000);
  sol.residual = cg.residual;
  sol.iterations = cg.iterations;
  if (cg.breakdown || !cg.converged) {
    std::ostringstream os;
    os << "Dirichlet solve failed (residual " << cg.residual << ", lambda_1 margin "
       << sol.lambda1 - k2 << ")";
    throw SpectralError(os.str(), sol.lambda1, k2);
  }
  sol.h = p.boundary_data;
  for (std::size_t c = 0; c < a.size(); ++c) sol.h[a.set.cells[c]] = x[c];
  return sol;
}

ScalarField harmonic_measure_potential(const Mask& mask, const Point& z, const Medium& medium) {
  const GridSpec& spec = mask.spec;
  if (!spec.contains(z)) throw GridError("source point lies outside the box");
  const Index3 cz = spec.locate(z);
  const std::size_t iz = spec.index(cz[0], cz[1], cz[2]);
  if (!mask[iz] || !erode(mask, 1)[iz]) throw GridError("source point must be an interior cell of the domain");
  Measure atom;
  atom.atoms.push_back({z, 1.0});
  ScalarField u = potential(atom, spec, medium);
  Problem p;
  p.mask = mask;
  p.boundary_data = u;
  p.medium = medium;
  // the set is the union of its cells: the boundary sits on the cell faces,
  // halfway between an inside and an outside center, where U is exact
  p.level_set = [&mask](const Point& x) {
    const Index3 c = mask.spec.locate(x);
    return mask[mask.spec.index(c[0], c[1], c[2])] ? -1.0 : 1.0;
  };
  p.boundary_function = [&atom, &medium](const Point& x) { return potential_at(atom, x, medium); };
  return solve(p).h;
}

}  // namespace hb::dirichlet
