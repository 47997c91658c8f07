// hbal: batch front end. One subcommand per process; every run writes its
// artifacts plus manifest.json into --out.
//
// Exit status: 0 success, 2 valid scenario whose sweep is infeasible, 1 error.

#include <omp.h>
#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "hb/balayage.hpp"
#include "hb/dirichlet.hpp"
#include "hb/grid_io.hpp"
#include "hb/heleshaw.hpp"
#include "hb/quadrature.hpp"
#include "hb/radial.hpp"
#include "hb/scenario.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hb;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kInfeasible = 2;

struct Options {
  std::string scenario;
  std::string out = ".";
  double grid_h = 0.0;
  std::uint64_t seed = 1;
  int threads = 0;
  bool csv = false;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// summaries carry finite numbers only
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void field(const std::string& stem, const ScalarField& f, bool csv) {
    io::write_field(f, path(stem + ".bin"));
    add(stem + ".bin");
    add(stem + ".bin.json");
    if (csv) {
      io::write_field_csv(f, path(stem + ".csv"));
      add(stem + ".csv");
    }
  }

  void mask(const std::string& stem, const Mask& m) {
    io::write_mask(m, path(stem + ".pgm"));
    add(stem + ".pgm");
    add(stem + ".pgm.json");
  }

  void text(const std::string& name, const std::string& body) {
    io::write_text(path(name), body);
    add(name);
  }

  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

  void manifest(const std::string& command, const scenario::Scenario* s, const std::optional<GridSpec>& grid,
                const Options& opt) {
    json m;
    m["tool"] = "hbal";
    m["version"] = HB_VERSION;
    m["command"] = command;
    if (s) {
      m["scenario"] = s->path.filename().string();
      m["scenario_sha256"] = sha256_hex(s->text);
    } else {
      m["scenario"] = nullptr;
      m["scenario_sha256"] = nullptr;
    }
    m["grid"] = grid ? io::spec_to_json(*grid) : json(nullptr);
    m["options"] = {{"grid_h", opt.grid_h > 0.0 ? json(opt.grid_h) : json(nullptr)}, {"seed", opt.seed}};
    json files = json::array();
    for (const auto& name : files_) files.push_back({{"name", name}, {"sha256", sha256_hex(read_bytes(path(name)))}});
    m["files"] = files;
    io::write_text(path("manifest.json"), m.dump(2) + "\n");
  }

 private:
  void add(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }

  fs::path dir_;
  std::vector<std::string> files_;
};

double equivalent_radius(const Mask& m) {
  return std::pow(mask_volume(m) / radial::ball_volume(m.spec.dim, 1.0), 1.0 / m.spec.dim);
}

json sweep_summary(const balayage::BalayageResult& r, const Measure& mu) {
  json j;
  j["feasible"] = r.feasible;
  j["converged"] = r.converged;
  j["reason"] = balayage::to_string(r.reason);
  j["iterations"] = r.iterations;
  j["cg_iterations"] = r.cg_iterations;
  j["total_mass"] = num(mu.total_mass());
  j["diagnostics"] = r.diagnostics;
  if (r.feasible) {
    j["omega_cells"] = r.omega.count();
    j["omega_volume"] = num(mask_volume(r.omega));
    j["omega_equivalent_radius"] = num(equivalent_radius(r.omega));
    j["Omega_cells"] = r.Omega.count();
    j["lambda1_omega"] = num(r.lambda1_omega);
    j["swept_mass"] = num(r.B.integral());
  }
  return j;
}

scenario::Scenario load_scenario(const Options& opt) {
  if (opt.scenario.empty()) throw std::invalid_argument("--scenario is required for this command");
  scenario::Scenario s = scenario::load(opt.scenario);
  if (opt.grid_h > 0.0) scenario::override_h(s, opt.grid_h);
  return s;
}

int cmd_sweep(const Options& opt) {
  const scenario::Scenario s = load_scenario(opt);
  const Medium& medium = scenario::require_medium(s);
  if (!s.measure || s.measure->empty()) throw std::invalid_argument("sweep needs a nonempty 'measure'");
  const GridSpec box = scenario::resolve_box(s);
  const Measure mu = s.measure->build(box);
  balayage::SweepConfig cfg = s.config;
  cfg.box = box;
  cfg.h = box.h;
  const balayage::BalayageResult r = balayage::sweep(mu, s.rho, medium, cfg);

  Artifacts out(opt.out);
  out.field("U", r.U, opt.csv);
  json summary = sweep_summary(r, mu);
  if (r.feasible) {
    out.field("V", r.V, opt.csv);
    out.field("u", r.u, opt.csv);
    out.field("B", r.B, opt.csv);
    out.mask("omega", r.omega);
    out.mask("Omega", r.Omega);
    const balayage::StructureReport st = balayage::structure_check(r, mu, s.rho);
    summary["structure"] = {{"max_excess", num(st.max_excess)},
                            {"max_dev_on_omega", num(st.max_dev_on_omega)},
                            {"max_dev_off_omega", num(st.max_dev_off_omega)},
                            {"frontier_dev", num(st.frontier_dev)},
                            {"omega_outside_Omega", st.omega_outside_Omega},
                            {"small_components", st.small_components}};
  }
  out.json_file("summary.json", summary);
  out.manifest("sweep", &s, box, opt);
  if (!r.feasible) {
    std::cerr << "infeasible: " << balayage::to_string(r.reason) << ": " << r.diagnostics << "\n";
    return kInfeasible;
  }
  return kOk;
}

GridSpec run_grid(const scenario::Scenario& s, const scenario::DomainSpec& d) {
  if (d.kind == scenario::DomainSpec::Kind::MaskFile) return d.mask->spec;
  if (!s.box && !s.box_center) throw std::invalid_argument("a ball or box domain needs an explicit 'box'");
  return scenario::resolve_box(s);
}

int cmd_heleshaw(const Options& opt) {
  const scenario::Scenario s = load_scenario(opt);
  const Medium& medium = scenario::require_medium(s);
  if (!s.heleshaw) throw std::invalid_argument("scenario has no 'heleshaw' block");
  const auto& hb = *s.heleshaw;
  const GridSpec box = run_grid(s, hb.initial);

  heleshaw::RunSpec spec;
  spec.initial_domain = hb.initial.on(box);
  spec.source = hb.source;
  if (hb.eta) spec.eta = hb.eta->build(box);
  spec.medium = medium;
  spec.rho = s.rho;
  spec.config = s.config;
  spec.times = hb.times;
  if (hb.enclosing) spec.enclosing = hb.enclosing->on(box);
  spec.bracket_resolution = hb.bracket_resolution;
  spec.bracket_cap = hb.bracket_cap;
  const heleshaw::EvolutionRun run = heleshaw::evolve(spec);

  Artifacts out(opt.out);
  out.mask("initial", spec.initial_domain);
  json series = json::array();
  bool any_feasible = false;
  for (std::size_t i = 0; i < run.steps.size(); ++i) {
    const auto& st = run.steps[i];
    json e;
    e["t"] = st.t;
    e["feasible"] = st.feasible;
    e["omega_cells"] = st.feasible ? json(st.omega_cells) : json(nullptr);
    e["lambda1"] = st.feasible ? num(st.lambda1) : json(nullptr);
    e["reason"] = balayage::to_string(st.result.reason);
    if (st.feasible) {
      any_feasible = true;
      char name[32];
      std::snprintf(name, sizeof(name), "omega_%03zu", i);
      out.mask(name, st.result.omega);
      e["mask"] = std::string(name) + ".pgm";
    }
    series.push_back(e);
  }
  out.json_file("timeseries.json", series);

  json rj;
  rj["interval_ok"] = run.interval_ok;
  rj["monotone_ok"] = run.monotone_ok;
  rj["inclusion_ok"] = run.inclusion_ok;
  rj["spectral_ok"] = run.spectral_ok;
  rj["lambda1_enclosing"] = hb.enclosing ? num(run.lambda1_enclosing) : json(nullptr);
  rj["k_squared"] = medium.k() * medium.k();
  rj["flags"] = run.flags;
  if (run.bracket) {
    rj["bracket"] = {{"bounded", run.bracket->bounded},
                     {"feasible", num(run.bracket->feasible)},
                     {"infeasible", num(run.bracket->infeasible)},
                     {"runs", run.bracket->runs},
                     {"note", run.bracket->note},
                     {"terminal_attained", s.rho.is_constant() ? json(run.bracket->feasible > 0.0) : json(nullptr)}};
  }
  out.json_file("run.json", rj);

  if (!hb.law.empty()) {
    json law = json::array();
    for (const auto& lc : hb.law) {
      json e{{"t", lc.t}, {"eps", lc.eps}};
      try {
        const heleshaw::LawReport rep = heleshaw::verify_law(spec, lc.t, lc.eps);
        e["symmetric_difference"] = rep.symmetric_difference;
        e["within_layer"] = rep.within_layer;
        e["layer_cells"] = rep.layer_cells;
        e["v_sup_difference"] = num(rep.v_sup_difference);
        e["lambda1_t"] = num(rep.lambda1_t);
        e["ok"] = rep.within_layer;
      } catch (const GridError& err) {
        e["ok"] = false;
        e["error"] = err.what();
      }
      law.push_back(e);
    }
    out.json_file("law.json", law);
  }
  out.manifest("heleshaw", &s, box, opt);
  return any_feasible ? kOk : kInfeasible;
}

int cmd_verify(const Options& opt) {
  const scenario::Scenario s = load_scenario(opt);
  const Medium& medium = scenario::require_medium(s);
  if (!s.measure) throw std::invalid_argument("verify needs a 'measure'");
  const scenario::VerifyBlock vb = s.verify.value_or(scenario::VerifyBlock{});

  Mask omega;
  GridSpec grid;
  if (vb.omega) {
    omega = *vb.omega;
    grid = omega.spec;
  } else {
    grid = scenario::resolve_box(s);
    balayage::SweepConfig cfg = s.config;
    cfg.box = grid;
    cfg.h = grid.h;
    cfg.compute_lambda1 = false;
    const balayage::BalayageResult r = balayage::sweep(s.measure->build(grid), s.rho, medium, cfg);
    if (!r.feasible) {
      std::cerr << "infeasible: " << balayage::to_string(r.reason) << ": " << r.diagnostics << "\n";
      Artifacts out(opt.out);
      out.json_file("quadrature.json", {{"feasible", false}, {"reason", balayage::to_string(r.reason)}});
      out.manifest("verify", &s, grid, opt);
      return kInfeasible;
    }
    omega = r.omega;
  }
  const Measure mu = s.measure->build(grid);
  quadrature::SamplingPlan plan;
  plan.exterior = vb.exterior_samples;
  plan.interior = vb.interior_samples;
  plan.seed = opt.seed;
  plan.tolerance = vb.tolerance;
  const quadrature::QuadratureReport rep = quadrature::verify_quadrature(omega, mu, s.rho, medium, plan);

  json j;
  j["exterior_max_error"] = num(rep.exterior_max_error);
  j["interior_violations"] = rep.interior_violations;
  j["interior_max_excess"] = num(rep.interior_max_excess);
  j["samples"] = rep.samples;
  j["exterior_samples"] = rep.exterior_samples;
  j["interior_samples"] = rep.interior_samples;
  j["skipped"] = rep.skipped;
  j["tolerance"] = num(rep.tolerance);
  j["mass_outside"] = num(rep.mass_outside);
  j["hypothesis_ok"] = rep.hypothesis_ok;
  j["vacuous"] = rep.vacuous;
  j["passed"] = rep.passed;
  j["test_family"] = rep.test_family;
  j["omega_cells"] = omega.count();
  Artifacts out(opt.out);
  out.json_file("quadrature.json", j);
  out.manifest("verify", &s, grid, opt);
  return kOk;
}

int cmd_lambda1(const Options& opt) {
  const scenario::Scenario s = load_scenario(opt);
  const Medium& medium = scenario::require_medium(s);
  if (!s.lambda1) throw std::invalid_argument("scenario has no 'lambda1' block");
  const auto& lb = *s.lambda1;
  GridSpec grid;
  if (lb.domain.kind == scenario::DomainSpec::Kind::MaskFile) {
    grid = lb.domain.mask->spec;
  } else if (s.box || s.box_center) {
    grid = scenario::resolve_box(s);
  } else if (lb.domain.kind == scenario::DomainSpec::Kind::Ball) {
    grid = GridSpec::centered(medium.dim(), lb.domain.center, lb.domain.radius + 5.0 * s.h, s.h);
  } else {
    Point c{0.0, 0.0, 0.0};
    double half = 0.0;
    for (int d = 0; d < medium.dim(); ++d) {
      c[d] = 0.5 * (lb.domain.lower[d] + lb.domain.upper[d]);
      half = std::max(half, 0.5 * (lb.domain.upper[d] - lb.domain.lower[d]));
    }
    grid = GridSpec::centered(medium.dim(), c, half + 5.0 * s.h, s.h);
  }
  const Mask m = lb.domain.on(grid);
  if (m.empty()) throw std::invalid_argument("lambda1 domain covers no cell");
  const double l1 = balayage::lambda1_estimate(m, lb.rel_tol);
  const double k2 = medium.k() * medium.k();
  json j{{"lambda1", num(l1)},
         {"cells", m.count()},
         {"volume", num(mask_volume(m))},
         {"h", grid.h},
         {"k_squared", k2},
         {"exceeds_k_squared", l1 > k2}};
  Artifacts out(opt.out);
  out.mask("domain", m);
  out.json_file("lambda1.json", j);
  out.manifest("lambda1", &s, grid, opt);
  return kOk;
}

int cmd_radial_table(const Options& opt) {
  std::optional<scenario::Scenario> s;
  if (!opt.scenario.empty()) s = load_scenario(opt);
  const scenario::RadialTableBlock tb =
      (s && s->radial_table) ? *s->radial_table : scenario::RadialTableBlock{};

  std::ostringstream csv;
  csv << "quantity,medium,parameters,value\n";
  auto row = [&](const std::string& q, const Medium& m, const std::string& p, const std::string& v) {
    csv << q << ',' << m.describe() << ',' << p << ',' << v << '\n';
  };
  auto f = [](double v) { return io::format_double(v); };
  for (int dim : tb.dims) {
    for (double k : tb.ks) {
      const Medium m(dim, k);
      if (!m.classical()) row("R_k", m, "", f(radial::r_k(m)));
      for (double r : tb.radii) {
        row("c_k", m, "r=" + f(r), f(radial::c_k(m, r)));
        row("d_k", m, "r=" + f(r), f(radial::d_k(m, r)));
      }
      for (double c : tb.point_masses) {
        const auto r = radial::point_mass_radius(m, c);
        row("point_mass_radius", m, "c=" + f(c), r ? f(*r) : "infeasible");
      }
      for (const auto& b : tb.balls) {
        const auto r = radial::ball_sweep_radius(m, b.density, b.radius);
        row("ball_sweep_radius", m, "c=" + f(b.density) + ";R=" + f(b.radius), r ? f(*r) : "infeasible");
      }
      for (const auto& sc : tb.spheres) {
        const std::string p = "T=" + f(sc.T) + ";t=" + f(sc.t);
        try {
          const radial::RadialSweep sw = radial::sphere_sweep(m, sc.T, sc.t);
          if (sw.kind == radial::SweepKind::Infeasible) {
            row("sphere_sweep", m, p, "infeasible");
            continue;
          }
          row("sphere_sweep_inner", m, p, f(sw.inner));
          row("sphere_sweep_outer", m, p, f(sw.outer));
        } catch (const radial::SweepError& e) {
          row("sphere_sweep", m, p, "infeasible");
        }
      }
    }
  }
  Artifacts out(opt.out);
  out.text("radial_table.csv", csv.str());
  out.manifest("radial-table", s ? &*s : nullptr, std::nullopt, opt);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Helmholtz partial balayage"};
  app.set_version_flag("--version", std::string(HB_VERSION));
  app.require_subcommand(1);
  Options opt;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opt.scenario, "scenario JSON");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--grid-h", opt.grid_h, "override the grid spacing")->check(CLI::PositiveNumber);
    sub->add_option("--seed", opt.seed, "sampling seed");
    sub->add_option("--threads", opt.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--csv", opt.csv, "also write fields as CSV");
  };
  std::map<std::string, int (*)(const Options&)> commands{{"sweep", cmd_sweep},
                                                          {"heleshaw", cmd_heleshaw},
                                                          {"radial-table", cmd_radial_table},
                                                          {"verify", cmd_verify},
                                                          {"lambda1", cmd_lambda1}};
  std::map<std::string, std::string> help{{"sweep", "partial balayage of the scenario measure"},
                                          {"heleshaw", "domain evolution over a time grid"},
                                          {"radial-table", "closed-form radial quantities as CSV"},
                                          {"verify", "quadrature identities on a domain"},
                                          {"lambda1", "first Dirichlet eigenvalue of a domain"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help[name]);
    common(sub);
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kError;
  }
  if (opt.threads > 0) omp_set_num_threads(opt.threads);
  for (CLI::App* sub : subs) {
    if (!sub->parsed()) continue;
    try {
      return commands.at(sub->get_name())(opt);
    } catch (const scenario::SchemaError& e) {
      std::cerr << "schema error: " << e.what() << "\n";
      return kError;
    } catch (const dirichlet::SpectralError& e) {
      std::cerr << "spectral condition violated: " << e.what() << "\n";
      return kError;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kError;
    }
  }
  return kError;
}
