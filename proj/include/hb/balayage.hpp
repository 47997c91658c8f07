#pragma once

// Partial balayage on a bounded box. The discrete problem is the linear
// complementarity problem
//
//   u >= 0,   A u >= s - rho,   u . (A u - s + rho) = 0,
//
// with A = -(Delta_h + k^2), u = 0 on the outermost cell layer and s = A U the
// discrete measure of the obstacle U. Its least element is u = U - V. The
// solver grows an active set from {s > rho}; every iterate stays below the
// least element, so a stop with no violations returns it exactly.

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "hb/grid.hpp"

namespace hb::balayage {

/// Saturation density: a positive constant or a field on the box.
struct Rho {
  double value = 1.0;
  std::optional<ScalarField> field;

  static Rho constant(double v);
  static Rho from_field(ScalarField f);

  bool is_constant() const { return !field.has_value(); }
  ScalarField sample(const GridSpec& spec) const;
  void validate() const;
};

struct SweepConfig {
  std::optional<GridSpec> box;  // auto-sized when empty (constant rho only)
  double h = 0.05;
  double inner_tol = 1e-10;   // max-norm residual of each linear solve
  double outer_tol = 1e-10;   // complementarity violation admitted off the active set
  int max_outer = 100000;
  int max_cg_iterations = 20000;
  double omega_threshold = 1e-3;  // omega = {u > theta h^2}
  std::optional<double> divergence_bound;  // default 1e3 * max |U|
  bool multilevel = true;
  bool compute_lambda1 = true;

  void validate() const;
};

enum class Infeasibility { None, Divergence, BoundaryContact, Indefinite, Stalled };

std::string to_string(Infeasibility r);

struct BalayageResult {
  ScalarField U;  // obstacle (potential of the input)
  ScalarField V;
  ScalarField u;  // U - V >= 0
  ScalarField B;  // density of the swept measure, -(Delta_h + k^2) V
  Mask omega;
  Mask Omega;
  Mask active;    // support of the complementarity solution
  Mask singular;  // cells where U is regularized
  bool feasible = false;
  bool converged = false;
  int iterations = 0;
  long cg_iterations = 0;
  double lambda1_omega = std::numeric_limits<double>::infinity();
  Infeasibility reason = Infeasibility::None;
  std::string diagnostics;
};

/// Box centered on the support: half-width R_k + 2 eps + 10 h for k > 0, and
/// the radius of the ball of mass |mu| / rho plus 2 eps + 10 h for k = 0.
GridSpec auto_box(const Measure& mu, const Medium& medium, double h, const Rho& rho);

BalayageResult sweep(const Measure& mu, const Rho& rho, const Medium& medium,
                     const SweepConfig& config);

/// Same complementarity solve with the obstacle supplied directly on a box.
BalayageResult sweep_from_potential(const ScalarField& U, const Rho& rho, const Medium& medium,
                                    const SweepConfig& config, const Mask* singular = nullptr);

/// Signed input mu = mu_plus - mu_minus: sweeps mu_plus with rho = 1 + mu_minus
/// and returns V - U^{mu_minus} in V. Needs an explicit box.
BalayageResult sweep_signed(const Measure& mu_plus, const Measure& mu_minus,
                            const Medium& medium, const SweepConfig& config);

struct StructureReport {
  double max_excess = 0.0;         // max (B - rho)
  double max_dev_on_omega = 0.0;   // max |B - rho| on omega
  double max_dev_off_omega = 0.0;  // max |B - mu| off omega and its frontier
  double frontier_dev = 0.0;       // max |B - mu| on the frontier layer
  double frontier_mass = 0.0;      // integral of (B - mu) over the frontier layer
  std::size_t omega_outside_Omega = 0;
  std::size_t small_components = 0;  // components of omega with < 4 cells
};

/// The frontier is the one-cell layer outside omega plus active cells where u
/// is below the omega threshold; B there carries the jump of grad u.
StructureReport structure_check(const BalayageResult& r, const Measure& mu, const Rho& rho);

/// Smallest Dirichlet eigenvalue of -Delta_h on the mask (zero outside).
double lambda1_estimate(const Mask& mask, double rel_tol = 1e-6);

struct ScanResult {
  bool bounded = false;
  double feasible = 0.0;    // largest parameter seen feasible
  double infeasible = 0.0;  // smallest parameter seen infeasible
  int runs = 0;
  std::string note;
};

/// Bisection on a monotone family t -> mu_t between a feasible and an
/// infeasible parameter; the upper end doubles from `hi` up to `cap`.
ScanResult feasibility_scan(const std::function<Measure(double)>& family, const Rho& rho,
                            const Medium& medium, const SweepConfig& config, double lo,
                            double hi, double resolution, double cap);

struct GeometryReport {
  bool holds = true;
  double R = 0.0;           // smallest distance from the center to the boundary of omega
  double max_radius = 0.0;  // largest distance from the center to an omega cell
  double bound = 0.0;       // R + 2 eps + 2 h
};

GeometryReport geometry_bound_check(const BalayageResult& r, const Point& center, double epsilon);

struct ThresholdLevel {
  double t = 0.0;
  double width = 0.0;  // final bisection bracket
  double h = 0.0;
};

/// Smallest level t for which {t < f_T(|x|) < f_T(T)} inside the shell
/// bracket of T has lambda_1 >= k^2, estimated on a grid of spacing h.
ThresholdLevel threshold_level(const Medium& medium, double T, double h, double tol = 1e-4);

}  // namespace hb::balayage
