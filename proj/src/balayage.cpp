#include "hb/balayage.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hb/linalg.hpp"

namespace hb::balayage {

// ---------------------------------------------------------------------------
// Rho and configuration

Rho Rho::constant(double v) {
  Rho r;
  r.value = v;
  r.validate();
  return r;
}

Rho Rho::from_field(ScalarField f) {
  Rho r;
  r.field = std::move(f);
  r.validate();
  return r;
}

ScalarField Rho::sample(const GridSpec& spec) const {
  if (!field) return ScalarField(spec, value);
  if (field->spec.same_as(spec)) return *field;
  ScalarField out(spec);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = field->interpolate(spec.center(i));
  return out;
}

void Rho::validate() const {
  if (!field) {
    if (!(value > 0.0) || !std::isfinite(value)) throw GridError("rho must be a positive constant");
    return;
  }
  for (double v : field->values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw GridError("rho field must be positive and finite");
  }
}

void SweepConfig::validate() const {
  if (!(h > 0.0)) throw GridError("grid spacing must be positive");
  if (!(inner_tol > 0.0) || !(outer_tol > 0.0)) throw GridError("solver tolerances must be positive");
  if (!(omega_threshold > 0.0)) throw GridError("omega threshold must be positive");
  if (max_outer < 1 || max_cg_iterations < 1) throw GridError("iteration caps must be positive");
  if (divergence_bound && !(*divergence_bound > 0.0)) throw GridError("divergence bound must be positive");
  if (box) box->validate();
}

std::string to_string(Infeasibility r) {
  switch (r) {
    case Infeasibility::None: return "none";
    case Infeasibility::Divergence: return "divergence";
    case Infeasibility::BoundaryContact: return "boundary-contact";
    case Infeasibility::Indefinite: return "indefinite";
    case Infeasibility::Stalled: return "stalled";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Active-set solver

namespace {

struct Lcp {
  GridSpec spec;
  std::vector<double> f;
  std::vector<std::uint8_t> eligible;
  double shift = 0.0;
};

struct LcpOutcome {
  Mask active;
  Mask last_good;  // last active set whose solve stayed nonnegative
  std::vector<double> u;
  Infeasibility reason = Infeasibility::None;
  bool converged = false;
  bool restart_plain = false;
  int iterations = 0;
  long cg_iterations = 0;
  std::string note;
};

Lcp make_lcp(const GridSpec& spec, std::vector<double> f, double shift) {
  Lcp p;
  p.spec = spec;
  p.f = std::move(f);
  p.shift = shift;
  p.eligible.resize(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) p.eligible[i] = spec.boundary_distance(i) >= 1;
  return p;
}

LcpOutcome solve_active_set(const Lcp& p, const Mask* start, const SweepConfig& cfg, double bound) {
  const GridSpec& spec = p.spec;
  const double tau = cfg.outer_tol;
  const double inv_h2 = 1.0 / (spec.h * spec.h);
  const bool plain = start == nullptr;
  LcpOutcome out;
  out.u.assign(spec.size(), 0.0);
  out.last_good = Mask(spec);

  Mask S(spec);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    S.flags[i] = p.eligible[i] && (p.f[i] > tau || (start && (*start)[i]));
  }
  std::vector<double>& ufull = out.u;
  int drops = 0;

  for (int it = 1; it <= cfg.max_outer; ++it) {
    out.iterations = it;
    linalg::Operator a = linalg::helmholtz_operator(S, p.shift);
    std::vector<double> b(a.size()), x(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
      b[c] = p.f[a.set.cells[c]];
      x[c] = ufull[a.set.cells[c]];
    }
    linalg::CgStatus st = linalg::pcg(a, b, x, cfg.inner_tol, cfg.max_cg_iterations);
    out.cg_iterations += st.iterations;
    if (st.breakdown || !st.converged) {
      if (!plain) {
        out.restart_plain = true;
        return out;
      }
      out.reason = st.breakdown ? Infeasibility::Indefinite : Infeasibility::Stalled;
      std::ostringstream os;
      os << "linear solve " << (st.breakdown ? "lost positive definiteness" : "did not converge")
         << " on " << a.size() << " active cells (residual " << st.residual << ")";
      out.note = os.str();
      out.active = S;
      return out;
    }

    double xmax = 0.0;
    for (double v : x) xmax = std::max(xmax, v);
    const double neg_tol = 1e-8 * std::max(1.0, xmax);
    std::size_t negatives = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      if (x[c] < -neg_tol) ++negatives;
    }
    if (negatives > 0) {
      if (plain) {
        out.reason = Infeasibility::Indefinite;
        out.note = "active-set solution lost positivity on " + std::to_string(negatives) + " cells";
        out.active = S;
        return out;
      }
      // a warm start overshot the solution support: shrink and retry
      if (++drops > 20) {
        out.restart_plain = true;
        return out;
      }
      for (std::size_t c = 0; c < a.size(); ++c) {
        const std::size_t i = a.set.cells[c];
        if (x[c] < -neg_tol) {
          S.set(i, false);
          ufull[i] = 0.0;
        } else {
          ufull[i] = std::max(0.0, x[c]);
        }
      }
      continue;
    }
    if (xmax > bound) {
      out.reason = Infeasibility::Divergence;
      std::ostringstream os;
      os << "max u = " << xmax << " exceeds the divergence bound " << bound;
      out.note = os.str();
      out.active = S;
      return out;
    }
    for (std::size_t c = 0; c < a.size(); ++c) ufull[a.set.cells[c]] = std::max(0.0, x[c]);
    out.last_good = S;

    std::vector<std::size_t> violators;
    const auto strides = spec.strides();
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (!p.eligible[i] || S[i]) continue;
      const Index3 ci = spec.coords(i);
      double nb = 0.0;
      for (int d = 0; d < spec.dim; ++d) {
        if (ci[d] > 0) nb += ufull[i - strides[d]];
        if (ci[d] + 1 < spec.shape[d]) nb += ufull[i + strides[d]];
      }
      // (A u - f)_i = -nb/h^2 - f_i
      if (nb * inv_h2 + p.f[i] > tau) violators.push_back(i);
    }
    if (violators.empty()) {
      out.converged = true;
      out.active = S;
      return out;
    }
    for (std::size_t i : violators) {
      if (spec.boundary_distance(i) <= 2) {
        out.reason = Infeasibility::BoundaryContact;
        out.note = "saturated set reached the box boundary layer";
        out.active = S;
        return out;
      }
      S.set(i);
    }
  }
  out.reason = Infeasibility::Stalled;
  out.note = "active-set iteration cap reached";
  out.active = S;
  return out;
}

Lcp coarsen(const Lcp& p) {
  GridSpec c = p.spec;
  c.h = 2.0 * p.spec.h;
  for (int d = 0; d < p.spec.dim; ++d) c.shape[d] = (p.spec.shape[d] + 1) / 2;
  std::vector<double> sum(c.size(), 0.0);
  std::vector<int> cnt(c.size(), 0);
  for (std::size_t i = 0; i < p.spec.size(); ++i) {
    Index3 fi = p.spec.coords(i);
    std::size_t j = c.index(fi[0] / 2, fi[1] / 2, fi[2] / 2);
    sum[j] += p.f[i];
    ++cnt[j];
  }
  for (std::size_t j = 0; j < c.size(); ++j) sum[j] /= cnt[j];
  return make_lcp(c, std::move(sum), p.shift);
}

Mask prolongate(const Mask& coarse, const GridSpec& fine) {
  Mask m(fine);
  for (std::size_t i = 0; i < fine.size(); ++i) {
    Index3 fi = fine.coords(i);
    m.flags[i] = coarse[coarse.spec.index(fi[0] / 2, fi[1] / 2, fi[2] / 2)];
  }
  return m;
}

LcpOutcome solve_multilevel(const Lcp& p, const SweepConfig& cfg, double bound, int depth) {
  int smallest = 1 << 30;
  for (int d = 0; d < p.spec.dim; ++d) smallest = std::min(smallest, p.spec.shape[d]);
  if (cfg.multilevel && depth < 4 && smallest >= 32) {
    LcpOutcome co = solve_multilevel(coarsen(p), cfg, bound, depth + 1);
    if (!co.last_good.empty()) {
      Mask start = erode(prolongate(co.last_good, p.spec), 3);
      LcpOutcome fine = solve_active_set(p, &start, cfg, bound);
      fine.cg_iterations += co.cg_iterations;
      if (!fine.restart_plain) return fine;
    }
  }
  return solve_active_set(p, nullptr, cfg, bound);
}

void zero_boundary_layer(ScalarField& f) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.spec.boundary_distance(i) == 0) f[i] = 0.0;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Sweeps

GridSpec auto_box(const Measure& mu, const Medium& medium, double h, const Rho& rho) {
  if (!rho.is_constant()) throw GridError("a variable rho needs an explicit box");
  const int dim = medium.dim();
  auto [lo, hi] = mu.bounding_box(dim);
  Point c{0.0, 0.0, 0.0};
  for (int d = 0; d < dim; ++d) c[d] = 0.5 * (lo[d] + hi[d]);
  const double eps = mu.support_radius(c, dim);
  double reach;
  if (medium.classical()) {
    const double vol = mu.total_mass() / rho.value;
    reach = std::pow(vol / radial::ball_volume(dim, 1.0), 1.0 / dim);
  } else {
    reach = radial::r_k(medium);
  }
  return GridSpec::centered(dim, c, reach + 2.0 * eps + 10.0 * h, h);
}

BalayageResult sweep_from_potential(const ScalarField& U, const Rho& rho, const Medium& medium,
                                    const SweepConfig& config, const Mask* singular) {
  config.validate();
  rho.validate();
  const GridSpec& spec = U.spec;
  spec.validate();
  if (spec.dim != medium.dim()) throw GridError("potential grid dimension does not match the medium");
  if (!U.all_finite()) throw GridError("obstacle potential has non-finite values");

  const ScalarField rf = rho.sample(spec);
  ScalarField s = helmholtz_apply(U, medium);
  zero_boundary_layer(s);
  std::vector<double> f(spec.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = s[i] - rf[i];

  double umax = 0.0;
  for (double v : U.values) umax = std::max(umax, std::abs(v));
  const double bound = config.divergence_bound.value_or(1e3 * std::max(umax, 1.0));

  const double k2 = medium.k() * medium.k();
  LcpOutcome sol = solve_multilevel(make_lcp(spec, std::move(f), k2), config, bound, 0);

  BalayageResult r;
  r.U = U;
  r.u = ScalarField(spec);
  r.u.values = std::move(sol.u);
  r.V = U - r.u;
  ScalarField au = helmholtz_apply(r.u, medium);
  r.B = s - au;
  zero_boundary_layer(r.B);
  r.active = sol.active.size() ? sol.active : Mask(spec);
  r.singular = singular ? *singular : Mask(spec);
  r.reason = sol.reason;
  r.feasible = sol.reason == Infeasibility::None;
  r.converged = sol.converged && r.feasible;
  r.iterations = sol.iterations;
  r.cg_iterations = sol.cg_iterations;
  r.diagnostics = sol.note;

  const double cut = config.omega_threshold * spec.h * spec.h;
  r.omega = Mask(spec);
  r.Omega = Mask(spec);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    r.omega.flags[i] = r.u[i] > cut;
    // 10h below rho, but never below rho/2 (coarse grids would admit B = 0)
    const double slack = std::min(10.0 * spec.h, 0.5 * rf[i]);
    r.Omega.flags[i] = spec.boundary_distance(i) >= 1 && r.B[i] >= rf[i] - slack;
  }
  if (r.feasible && config.compute_lambda1 && !r.omega.empty()) {
    r.lambda1_omega = lambda1_estimate(r.omega);
  }
  return r;
}

BalayageResult sweep(const Measure& mu, const Rho& rho, const Medium& medium,
                     const SweepConfig& config) {
  config.validate();
  const GridSpec box = config.box ? *config.box : auto_box(mu, medium, config.h, rho);
  mu.validate(box.dim);

  Measure m = mu;
  if (m.density && !m.density->spec.same_as(box)) {
    m.density = rasterize(Measure{{}, mu.density, {}}, box);
  }
  // the support must keep clear of the pinned boundary layer
  {
    auto [lo, hi] = m.empty() ? std::pair<Point, Point>{} : m.bounding_box(box.dim);
    const Point up = box.upper();
    for (int d = 0; d < box.dim && !m.empty(); ++d) {
      if (lo[d] < box.origin[d] + 3.0 * box.h || hi[d] > up[d] - 3.0 * box.h) {
        throw GridError("box too small: the measure support comes within 3 cells of its boundary");
      }
    }
  }
  ScalarField U = potential(m, box, medium);
  Mask sing = singular_cells(m, box);
  return sweep_from_potential(U, rho, medium, config, &sing);
}

BalayageResult sweep_signed(const Measure& mu_plus, const Measure& mu_minus,
                            const Medium& medium, const SweepConfig& config) {
  if (!config.box) throw GridError("signed sweeps need an explicit box");
  const GridSpec& box = *config.box;
  ScalarField rho = rasterize(mu_minus, box);
  for (double& v : rho.values) v += 1.0;
  BalayageResult r = sweep(mu_plus, Rho::from_field(rho), medium, config);
  r.V = r.V - potential(mu_minus, box, medium);
  return r;
}

// ---------------------------------------------------------------------------
// Reports

StructureReport structure_check(const BalayageResult& r, const Measure& mu, const Rho& rho) {
  const GridSpec& spec = r.B.spec;
  const ScalarField rf = rho.sample(spec);
  const ScalarField mr = rasterize(mu, spec);
  const Mask frontier = (outer_layer(r.omega) | r.active) & ~r.omega;
  StructureReport rep;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  const double vol = spec.cell_volume();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec.boundary_distance(i) == 0) continue;
    rep.max_excess = std::max(rep.max_excess, r.B[i] - rf[i]);
    if (r.omega[i]) {
      rep.max_dev_on_omega = std::max(rep.max_dev_on_omega, std::abs(r.B[i] - rf[i]));
      if (!r.Omega[i]) ++rep.omega_outside_Omega;
    } else if (frontier[i]) {
      rep.frontier_dev = std::max(rep.frontier_dev, std::abs(r.B[i] - mr[i]));
      rep.frontier_mass += (r.B[i] - mr[i]) * vol;
    } else if (!r.singular[i]) {
      rep.max_dev_off_omega = std::max(rep.max_dev_off_omega, std::abs(r.B[i] - mr[i]));
    }
  }
  int count = 0;
  std::vector<int> labels = components(r.omega, &count);
  std::vector<int> sizes(count + 1, 0);
  for (int l : labels) ++sizes[l];
  for (int c = 1; c <= count; ++c) rep.small_components += sizes[c] < 4;
  return rep;
}

double lambda1_estimate(const Mask& mask, double rel_tol) {
  if (mask.empty()) throw GridError("eigenvalue of an empty set");
  linalg::Operator a = linalg::helmholtz_operator(mask, 0.0);
  const std::size_t n = a.size();
  std::vector<double> x(n, 1.0 / std::sqrt(double(n))), y(n, 0.0);
  double lambda = 0.0;
  int settled = 0;
  for (int it = 0; it < 2000; ++it) {
    double xmax = 0.0;
    for (double v : x) xmax = std::max(xmax, std::abs(v));
    std::fill(y.begin(), y.end(), 0.0);
    linalg::pcg(a, x, y, 1e-11 * xmax, 10000);
    double xy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xy += x[i] * y[i];
      yy += y[i] * y[i];
    }
    const double next = xy / yy;
    const double norm = std::sqrt(yy);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
    if (it > 0 && std::abs(next - lambda) <= 0.1 * rel_tol * next) {
      if (++settled >= 2) return next;
    } else {
      settled = 0;
    }
    lambda = next;
  }
  return lambda;
}

ScanResult feasibility_scan(const std::function<Measure(double)>& family, const Rho& rho,
                            const Medium& medium, const SweepConfig& config, double lo,
                            double hi, double resolution, double cap) {
  if (!(lo > 0.0) || !(hi > lo) || !(resolution > 0.0)) {
    throw GridError("feasibility scan needs 0 < lo < hi and a positive resolution");
  }
  SweepConfig cfg = config;
  cfg.compute_lambda1 = false;
  ScanResult out;
  auto feasible = [&](double t) {
    ++out.runs;
    BalayageResult r = sweep(family(t), rho, medium, cfg);
    return r.feasible && r.converged;
  };
  if (!feasible(lo)) {
    out.bounded = true;
    out.infeasible = lo;
    out.note = "lower end already infeasible";
    return out;
  }
  out.feasible = lo;
  while (feasible(hi)) {
    out.feasible = hi;
    if (2.0 * hi > cap) {
      out.bounded = false;
      out.note = "no infeasible parameter below the cap";
      return out;
    }
    hi *= 2.0;
  }
  out.bounded = true;
  out.infeasible = hi;
  while (out.infeasible - out.feasible > resolution) {
    const double mid = 0.5 * (out.feasible + out.infeasible);
    if (feasible(mid)) {
      out.feasible = mid;
    } else {
      out.infeasible = mid;
    }
  }
  return out;
}

GeometryReport geometry_bound_check(const BalayageResult& r, const Point& center, double epsilon) {
  GeometryReport g;
  const Mask& w = r.omega;
  const GridSpec& spec = w.spec;
  if (w.empty()) {
    g.bound = 2.0 * epsilon + 2.0 * spec.h;
    return g;
  }
  const auto st = spec.strides();
  g.R = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!w[i]) continue;
    const Point xi = spec.center(i);
    g.max_radius = std::max(g.max_radius, distance(xi, center, spec.dim));
    const Index3 c = spec.coords(i);
    for (int d = 0; d < spec.dim; ++d) {
      for (int side : {-1, 1}) {
        const int n = c[d] + side;
        const bool outside = n < 0 || n >= spec.shape[d] || !w[i + side * st[d]];
        if (!outside) continue;
        Point face = xi;
        face[d] += 0.5 * side * spec.h;
        g.R = std::min(g.R, distance(face, center, spec.dim));
      }
    }
  }
  g.bound = g.R + 2.0 * epsilon + 2.0 * spec.h;
  g.holds = g.max_radius <= g.bound;
  return g;
}

ThresholdLevel threshold_level(const Medium& medium, double T, double h, double tol) {
  if (medium.classical()) throw GridError("threshold level needs k > 0");
  const radial::ShellBracket br = radial::shell_bracket(medium, T);
  const double k = medium.k();
  const double j2 = std::isfinite(br.upper) ? br.upper : T + 4.0 * std::acos(-1.0) / k;
  const double fmax = radial::f_T(medium, T, T);
  const double lo0 = std::max(radial::f_T(medium, T, br.lower), radial::f_T(medium, T, j2));

  const GridSpec spec = GridSpec::centered(medium.dim(), Point{0.0, 0.0, 0.0}, j2 + 3.0 * h, h);
  std::vector<double> level(spec.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double r = distance(spec.center(i), Point{0.0, 0.0, 0.0}, spec.dim);
    if (r > br.lower && r < j2) level[i] = radial::f_T(medium, T, r);
  }
  const double k2 = k * k;
  auto admissible = [&](double t) {
    Mask m(spec);
    for (std::size_t i = 0; i < spec.size(); ++i) m.flags[i] = level[i] > t;
    return m.empty() || lambda1_estimate(m, 1e-7) >= k2;
  };
  ThresholdLevel out;
  out.h = h;
  if (admissible(lo0)) {
    out.t = lo0;
    return out;
  }
  double lo = lo0, hi = fmax;
  while (hi - lo > tol * std::abs(fmax)) {
    const double mid = 0.5 * (lo + hi);
    if (admissible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.t = hi;
  out.width = hi - lo;
  return out;
}

}  // namespace hb::balayage
