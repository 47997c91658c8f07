#pragma once

// Quasi-static domain growth for mu_t = t eta + rho|_Omega: a sweep per time,
// the terminal time bracket, and the law relating consecutive saturated sets.

#include <optional>
#include <string>
#include <vector>

#include "hb/balayage.hpp"

namespace hb::heleshaw {

struct RunSpec {
  Mask initial_domain;               // Omega; its grid is the sweep box
  Point source{0.0, 0.0, 0.0};       // z, used when eta is empty
  std::optional<Measure> eta;        // defaults to the unit atom at z
  Medium medium{2, 1.0};
  balayage::Rho rho;
  balayage::SweepConfig config;      // box is taken from initial_domain
  std::vector<double> times;         // increasing
  std::optional<Mask> enclosing;     // D, required to have lambda_1 >= k^2
  double bracket_resolution = 0.0;   // > 0 requests a bracket for T
  double bracket_cap = 1e4;
};

struct Step {
  double t = 0.0;
  balayage::BalayageResult result;
  bool feasible = false;
  std::size_t omega_cells = 0;
  double lambda1 = 0.0;
  bool contains_initial = false;  // Omega inside omega_t up to one cell layer
};

struct EvolutionRun {
  std::vector<Step> steps;
  std::optional<balayage::ScanResult> bracket;
  double lambda1_enclosing = 0.0;
  bool interval_ok = true;   // no feasible step after an infeasible one
  bool monotone_ok = true;   // omega_s inside omega_t (one layer) for s < t
  bool inclusion_ok = true;  // Omega inside every feasible omega_t
  bool spectral_ok = true;   // lambda_1(omega_t) > k^2 below the bracket
  std::vector<std::string> flags;
};

/// The measure t eta + rho|_Omega on the run's grid.
Measure source_measure(const RunSpec& spec, double t);

EvolutionRun evolve(const RunSpec& spec);

struct LawReport {
  std::size_t symmetric_difference = 0;
  bool within_layer = false;  // every differing cell within 3 cells of the boundary of omega
  std::size_t layer_cells = 0;
  double v_sup_difference = 0.0;
  double lambda1_t = 0.0;
  balayage::BalayageResult lhs;
  balayage::BalayageResult rhs;
};

/// Compares omega(mu_{t+eps}) with the sweep of rho|_{omega_t} + eps eta
/// swept onto the complement of omega_t, built at the potential level.
LawReport verify_law(const RunSpec& spec, double t, double eps);

/// Potential of eta swept onto the complement of the mask: U^eta outside and
/// its Dirichlet extension inside.
ScalarField swept_source_potential(const Mask& mask, const Measure& eta, const Medium& medium);

struct PotentialSweep {
  balayage::BalayageResult result;
  std::optional<balayage::StructureReport> structure;  // only with a known measure
};

PotentialSweep sweep_from_potential(const ScalarField& U, const balayage::Rho& rho,
                                    const Medium& medium, const balayage::SweepConfig& config,
                                    const Measure* off_support_measure = nullptr);

}  // namespace hb::heleshaw
