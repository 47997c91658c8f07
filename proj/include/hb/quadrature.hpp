#pragma once

// Quadrature-domain identities tested on kernel translates, and mean-value
// residuals for k-metaharmonic grid functions.

#include <cstdint>
#include <string>

#include "hb/balayage.hpp"

namespace hb::quadrature {

struct QuadratureReport {
  double exterior_max_error = 0.0;      // max |U^{rho|omega} - U^mu| off omega
  std::size_t interior_violations = 0;  // U^{rho|omega} > U^mu + tol inside omega
  double interior_max_excess = 0.0;
  std::size_t samples = 0;
  std::size_t exterior_samples = 0;
  std::size_t interior_samples = 0;
  std::size_t skipped = 0;              // samples too close to an atom
  double tolerance = 0.0;
  double mass_outside = 0.0;            // mu mass off omega (and its one-cell layer)
  bool hypothesis_ok = true;            // mass_outside negligible
  bool vacuous = false;                 // omega empty: nothing to test
  bool passed = false;
  std::string test_family = "kernel translates";
};

struct SamplingPlan {
  int exterior = 64;
  int interior = 64;
  std::uint64_t seed = 1;
  /// Equality/inequality tolerance; <= 0 selects 10 h |mu|.
  double tolerance = 0.0;
};

QuadratureReport verify_quadrature(const Mask& omega, const Measure& mu, const balayage::Rho& rho,
                                   const Medium& medium, const SamplingPlan& plan);

struct MeanValueResiduals {
  double ball_integral = 0.0;
  double sphere_integral = 0.0;
  double ball_residual = 0.0;    // |c_k(r) h(z) - ball integral|
  double sphere_residual = 0.0;  // |d_k(r) h(z) - sphere integral|
};

/// Ball integral with sub-sampled cell coverage; sphere integral by midpoint
/// surface quadrature on interpolated values.
MeanValueResiduals mean_value_check(const ScalarField& h, const Point& z, double r,
                                    const Medium& medium);

/// Smallest radius whose uniform ball has vanishing exterior potential,
/// j_{N/2,1}/k (k > 0).
double null_ball_radius(const Medium& medium);

/// sup of |U^{m|B_t(y)}| over sample points at distances in (t, t + width]
/// from y, evaluated by the closed form.
double exterior_ball_potential(const Medium& medium, double t, double width, int samples);

}  // namespace hb::quadrature
