#include "hb/heleshaw.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hb/dirichlet.hpp"

namespace hb::heleshaw {

namespace {

Measure eta_of(const RunSpec& spec) {
  if (spec.eta) return *spec.eta;
  Measure m;
  m.atoms.push_back({spec.source, 1.0});
  return m;
}

balayage::SweepConfig config_of(const RunSpec& spec) {
  balayage::SweepConfig cfg = spec.config;
  cfg.box = spec.initial_domain.spec;
  cfg.h = spec.initial_domain.spec.h;
  return cfg;
}

Measure rho_on(const Mask& m, const balayage::Rho& rho) {
  ScalarField f = rho.sample(m.spec);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!m[i]) f[i] = 0.0;
  }
  Measure out;
  out.density = std::move(f);
  return out;
}

// eta must charge every component of Omega
void check_charging(const Mask& omega, const Measure& eta) {
  int count = 0;
  std::vector<int> labels = components(omega, &count);
  std::vector<double> charge(count + 1, 0.0);
  const GridSpec& spec = omega.spec;
  for (const auto& a : eta.atoms) {
    if (!spec.contains(a.center)) continue;
    Index3 c = spec.locate(a.center);
    charge[labels[spec.index(c[0], c[1], c[2])]] += a.mass;
  }
  if (eta.density) {
    ScalarField d = rasterize(Measure{{}, eta.density, {}}, spec);
    for (std::size_t i = 0; i < d.size(); ++i) charge[labels[i]] += d[i];
  }
  for (const auto& s : eta.shells) {
    for (const auto& n : sphere_nodes(spec.dim, s.center, s.radius, 64)) {
      if (!spec.contains(n.point)) continue;
      Index3 c = spec.locate(n.point);
      charge[labels[spec.index(c[0], c[1], c[2])]] += n.weight * s.density;
    }
  }
  for (int c = 1; c <= count; ++c) {
    if (!(charge[c] > 0.0)) {
      throw GridError("the source measure must charge every component of the initial domain");
    }
  }
}

}  // namespace

Measure source_measure(const RunSpec& spec, double t) {
  Measure m = rho_on(spec.initial_domain, spec.rho);
  m += t * eta_of(spec);
  return m;
}

ScalarField swept_source_potential(const Mask& mask, const Measure& eta, const Medium& medium) {
  dirichlet::Problem p;
  p.mask = mask;
  p.boundary_data = potential(eta, mask.spec, medium);
  p.medium = medium;
  return dirichlet::solve(p).h;
}

EvolutionRun evolve(const RunSpec& spec) {
  const Mask& omega0 = spec.initial_domain;
  if (omega0.empty()) throw GridError("initial domain is empty");
  if (spec.times.empty()) throw GridError("time grid is empty");
  for (std::size_t i = 0; i < spec.times.size(); ++i) {
    if (!(spec.times[i] > 0.0) || (i > 0 && !(spec.times[i] > spec.times[i - 1]))) {
      throw GridError("times must be positive and strictly increasing");
    }
  }
  const Measure eta = eta_of(spec);
  if (!spec.eta) {
    const GridSpec& g = omega0.spec;
    Index3 c = g.locate(spec.source);
    if (!g.contains(spec.source) || !erode(omega0, 1)[g.index(c[0], c[1], c[2])]) {
      throw GridError("source point must lie inside the initial domain");
    }
  }
  check_charging(omega0, eta);

  const double k2 = spec.medium.k() * spec.medium.k();
  EvolutionRun run;
  if (spec.enclosing) {
    if (!subset_up_to(omega0, *spec.enclosing, 0) || !subset_up_to(dilate(omega0, 1), *spec.enclosing, 0)) {
      throw GridError("the enclosing domain must contain the closure of the initial domain");
    }
    run.lambda1_enclosing = balayage::lambda1_estimate(*spec.enclosing);
    if (run.lambda1_enclosing < k2) {
      std::ostringstream os;
      os << "enclosing domain has lambda_1 = " << run.lambda1_enclosing << " < k^2 = " << k2;
      throw dirichlet::SpectralError(os.str(), run.lambda1_enclosing, k2);
    }
  } else {
    run.flags.push_back("no enclosing domain declared: lambda_1(D) >= k^2 not checked");
  }

  const balayage::SweepConfig cfg = config_of(spec);
  bool seen_infeasible = false;
  int prev = -1;
  for (double t : spec.times) {
    Step s;
    s.t = t;
    s.result = balayage::sweep(source_measure(spec, t), spec.rho, spec.medium, cfg);
    s.feasible = s.result.feasible && s.result.converged;
    s.omega_cells = s.result.omega.count();
    s.lambda1 = s.result.lambda1_omega;
    if (s.feasible) {
      s.contains_initial = subset_up_to(omega0, s.result.omega, 1);
      if (!s.contains_initial) {
        run.inclusion_ok = false;
        run.flags.push_back("initial domain not inside omega at t = " + std::to_string(t));
      }
      if (seen_infeasible) {
        run.interval_ok = false;
        run.flags.push_back("feasible step after an infeasible one at t = " + std::to_string(t));
      }
      if (prev >= 0 && !subset_up_to(run.steps[prev].result.omega, s.result.omega, 1)) {
        run.monotone_ok = false;
        run.flags.push_back("omega shrank at t = " + std::to_string(t) + " (solver failure)");
      }
    } else {
      seen_infeasible = true;
    }
    run.steps.push_back(std::move(s));
    if (run.steps.back().feasible) prev = int(run.steps.size()) - 1;
  }
  if (!run.steps.front().feasible) run.flags.push_back("first step infeasible: empty interval at this resolution");

  if (spec.bracket_resolution > 0.0) {
    double lo = 0.0, hi = 0.0;
    for (const auto& s : run.steps) {
      if (s.feasible) lo = s.t;
      if (!s.feasible && hi == 0.0) hi = s.t;
    }
    if (lo > 0.0) {
      if (hi == 0.0) hi = 2.0 * lo;
      auto family = [&](double t) { return source_measure(spec, t); };
      run.bracket = balayage::feasibility_scan(family, spec.rho, spec.medium, cfg, lo, hi,
                                               spec.bracket_resolution, spec.bracket_cap);
    }
  }
  for (const auto& s : run.steps) {
    const bool below = !run.bracket || s.t < run.bracket->feasible;
    if (s.feasible && below && !(s.lambda1 > k2)) {
      run.spectral_ok = false;
      run.flags.push_back("lambda_1(omega) <= k^2 below the terminal bracket at t = " + std::to_string(s.t));
    }
  }
  return run;
}

LawReport verify_law(const RunSpec& spec, double t, double eps) {
  if (!(t > 0.0) || !(eps > 0.0)) throw GridError("law check needs t > 0 and eps > 0");
  const balayage::SweepConfig cfg = config_of(spec);
  LawReport rep;
  balayage::BalayageResult base = balayage::sweep(source_measure(spec, t), spec.rho, spec.medium, cfg);
  if (!base.feasible || !base.converged) throw GridError("time t is not feasible");
  rep.lhs = balayage::sweep(source_measure(spec, t + eps), spec.rho, spec.medium, cfg);
  if (!rep.lhs.feasible || !rep.lhs.converged) throw GridError("time t + eps is not feasible");

  const Mask& wt = base.omega;
  rep.lambda1_t = base.lambda1_omega;
  ScalarField W = swept_source_potential(wt, eta_of(spec), spec.medium);
  ScalarField U = potential(rho_on(wt, spec.rho), wt.spec, spec.medium) + eps * W;
  rep.rhs = balayage::sweep_from_potential(U, spec.rho, spec.medium, cfg);

  const Mask& L = rep.lhs.omega;
  const Mask& R = rep.rhs.omega;
  rep.symmetric_difference = symmetric_difference(L, R);
  const Mask layer = dilate(L, 3) & ~erode(L, 3);
  rep.layer_cells = layer.count();
  rep.within_layer = true;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i] != R[i] && !layer[i]) rep.within_layer = false;
  }
  rep.v_sup_difference = sup_distance(rep.lhs.V, rep.rhs.V);
  return rep;
}

PotentialSweep sweep_from_potential(const ScalarField& U, const balayage::Rho& rho,
                                    const Medium& medium, const balayage::SweepConfig& config,
                                    const Measure* off_support_measure) {
  PotentialSweep out;
  out.result = balayage::sweep_from_potential(U, rho, medium, config);
  if (off_support_measure) out.structure = balayage::structure_check(out.result, *off_support_measure, rho);
  return out;
}

}  // namespace hb::heleshaw
