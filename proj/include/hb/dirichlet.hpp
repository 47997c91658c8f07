#pragma once

// Dirichlet problems for Delta + k^2 on discrete open sets and the potential
// of k-harmonic measure, computed without materializing the measure.

#include <functional>
#include <stdexcept>

#include "hb/grid.hpp"

namespace hb::dirichlet {

/// lambda_1 of the domain does not exceed k^2: the maximum principle fails
/// and the boundary value problem has no reliable solution.
class SpectralError : public std::runtime_error {
 public:
  SpectralError(const std::string& what, double lambda1, double k2)
      : std::runtime_error(what), lambda1(lambda1), k2(k2) {}
  double lambda1;
  double k2;
};

struct Problem {
  Mask mask;                   // interior cells
  ScalarField boundary_data;   // read outside the mask (on its outer layer)
  Medium medium{2, 0.0};
  /// Optional signed distance-like function, negative inside. When set, the
  /// boundary is located at the zero crossing between cell centers and
  /// boundary_function (or boundary_data at the outside cell) gives the value
  /// there.
  std::function<double(const Point&)> level_set;
  std::function<double(const Point&)> boundary_function;
};

struct Solution {
  ScalarField h;  // solution on the mask, boundary data elsewhere
  double lambda1 = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

Solution solve(const Problem& p);

/// W = U^{delta_z} off the mask and the Dirichlet extension of it inside.
ScalarField harmonic_measure_potential(const Mask& mask, const Point& z, const Medium& medium);

}  // namespace hb::dirichlet
