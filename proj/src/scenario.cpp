#include "hb/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hb/grid_io.hpp"
#include "hb/json_lines.hpp"

namespace hb::scenario {

using nlohmann::json;

namespace {

std::string where(const std::string& file, int line, const std::string& pointer) {
  std::ostringstream os;
  os << file << ':' << line << ": " << (pointer.empty() ? "/" : pointer) << ": ";
  return os.str();
}

class Ctx {
 public:
  Ctx(const std::string& text, std::filesystem::path origin)
      : origin_(std::move(origin)), lines_(json_lines::pointer_lines(text)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw SchemaError(origin_.string(), line_of(ptr), ptr, msg);
  }

  int line_of(std::string ptr) const {
    while (true) {
      auto it = lines_.find(ptr);
      if (it != lines_.end()) return it->second;
      if (ptr.empty()) return 1;
      ptr = ptr.substr(0, ptr.rfind('/'));
    }
  }

  void object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(ptr, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!ok.count(it.key())) fail(ptr + "/" + it.key(), "unknown key '" + it.key() + "'");
    }
  }

  const json& at(const json& j, const std::string& ptr, const char* key) const {
    if (!j.contains(key)) fail(ptr, std::string("missing required key '") + key + "'");
    return j.at(key);
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(ptr, "must be finite");
    return v;
  }

  double positive(const json& j, const std::string& ptr) const {
    const double v = number(j, ptr);
    if (!(v > 0.0)) fail(ptr, "must be positive");
    return v;
  }

  double nonnegative(const json& j, const std::string& ptr) const {
    const double v = number(j, ptr);
    if (v < 0.0) fail(ptr, "must be nonnegative");
    return v;
  }

  int integer(const json& j, const std::string& ptr, int lo, int hi) const {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    const long long v = j.get<long long>();
    if (v < lo || v > hi) fail(ptr, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return int(v);
  }

  bool boolean(const json& j, const std::string& ptr) const {
    if (!j.is_boolean()) fail(ptr, "expected true or false");
    return j.get<bool>();
  }

  std::string string(const json& j, const std::string& ptr) const {
    if (!j.is_string()) fail(ptr, "expected a string");
    return j.get<std::string>();
  }

  Point point(const json& j, const std::string& ptr, int dim) const {
    if (!j.is_array() || int(j.size()) != dim) {
      fail(ptr, "expected an array of " + std::to_string(dim) + " numbers");
    }
    Point p{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) p[d] = number(j[d], ptr + "/" + std::to_string(d));
    return p;
  }

  const json& array(const json& j, const std::string& ptr) const {
    if (!j.is_array()) fail(ptr, "expected an array");
    return j;
  }

  std::filesystem::path file(const json& j, const std::string& ptr) const {
    std::filesystem::path p = string(j, ptr);
    if (p.is_relative()) p = origin_.parent_path() / p;
    if (!std::filesystem::exists(p)) fail(ptr, "file not found: " + p.string());
    return p;
  }

  ScalarField field_file(const json& j, const std::string& ptr, int dim) const {
    const auto p = file(j, ptr);
    try {
      ScalarField f = io::read_field(p);
      if (f.spec.dim != dim) fail(ptr, "field dimension does not match the medium");
      return f;
    } catch (const io::IoError& e) {
      fail(ptr, e.what());
    } catch (const GridError& e) {
      fail(ptr, e.what());
    }
  }

  Mask mask_file(const json& j, const std::string& ptr, int dim) const {
    const auto p = file(j, ptr);
    try {
      Mask m = io::read_mask(p);
      if (m.spec.dim != dim) fail(ptr, "mask dimension does not match the medium");
      return m;
    } catch (const io::IoError& e) {
      fail(ptr, e.what());
    } catch (const GridError& e) {
      fail(ptr, e.what());
    }
  }

 private:
  std::filesystem::path origin_;
  std::map<std::string, int> lines_;
};

MeasureSpec parse_measure(const Ctx& c, const json& j, const std::string& ptr, int dim) {
  c.object(j, ptr, {"atoms", "balls", "shells", "density_file"});
  MeasureSpec m;
  if (j.contains("atoms")) {
    const auto& a = c.array(j["atoms"], ptr + "/atoms");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = ptr + "/atoms/" + std::to_string(i);
      c.object(a[i], p, {"center", "mass"});
      m.atoms.push_back({c.point(c.at(a[i], p, "center"), p + "/center", dim),
                         c.positive(c.at(a[i], p, "mass"), p + "/mass")});
    }
  }
  if (j.contains("balls")) {
    const auto& a = c.array(j["balls"], ptr + "/balls");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = ptr + "/balls/" + std::to_string(i);
      c.object(a[i], p, {"center", "radius", "density"});
      m.balls.push_back({c.point(c.at(a[i], p, "center"), p + "/center", dim),
                         c.positive(c.at(a[i], p, "radius"), p + "/radius"),
                         c.positive(c.at(a[i], p, "density"), p + "/density")});
    }
  }
  if (j.contains("shells")) {
    const auto& a = c.array(j["shells"], ptr + "/shells");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = ptr + "/shells/" + std::to_string(i);
      c.object(a[i], p, {"center", "radius", "density"});
      m.shells.push_back({c.point(c.at(a[i], p, "center"), p + "/center", dim),
                          c.positive(c.at(a[i], p, "radius"), p + "/radius"),
                          c.positive(c.at(a[i], p, "density"), p + "/density")});
    }
  }
  if (j.contains("density_file")) {
    ScalarField f = c.field_file(j["density_file"], ptr + "/density_file", dim);
    if (!f.all_finite() || f.min() < 0.0) c.fail(ptr + "/density_file", "density must be finite and nonnegative");
    m.density = std::move(f);
  }
  return m;
}

DomainSpec parse_domain(const Ctx& c, const json& j, const std::string& ptr, int dim) {
  c.object(j, ptr, {"ball", "box", "mask"});
  if (j.size() != 1) c.fail(ptr, "give exactly one of 'ball', 'box' or 'mask'");
  DomainSpec d;
  if (j.contains("ball")) {
    const std::string p = ptr + "/ball";
    c.object(j["ball"], p, {"center", "radius"});
    d.kind = DomainSpec::Kind::Ball;
    d.center = c.point(c.at(j["ball"], p, "center"), p + "/center", dim);
    d.radius = c.positive(c.at(j["ball"], p, "radius"), p + "/radius");
  } else if (j.contains("box")) {
    const std::string p = ptr + "/box";
    c.object(j["box"], p, {"lower", "upper"});
    d.kind = DomainSpec::Kind::Box;
    d.lower = c.point(c.at(j["box"], p, "lower"), p + "/lower", dim);
    d.upper = c.point(c.at(j["box"], p, "upper"), p + "/upper", dim);
    for (int a = 0; a < dim; ++a) {
      if (!(d.upper[a] > d.lower[a])) c.fail(p + "/upper", "upper corner must exceed the lower corner");
    }
  } else {
    d.kind = DomainSpec::Kind::MaskFile;
    d.mask = c.mask_file(j["mask"], ptr + "/mask", dim);
  }
  return d;
}

void parse_solver(const Ctx& c, const json& j, const std::string& ptr, balayage::SweepConfig& cfg) {
  c.object(j, ptr, {"inner_tol", "outer_tol", "max_outer", "max_cg_iterations", "omega_threshold",
                    "divergence_bound", "multilevel"});
  if (j.contains("inner_tol")) cfg.inner_tol = c.positive(j["inner_tol"], ptr + "/inner_tol");
  if (j.contains("outer_tol")) cfg.outer_tol = c.positive(j["outer_tol"], ptr + "/outer_tol");
  if (j.contains("max_outer")) cfg.max_outer = c.integer(j["max_outer"], ptr + "/max_outer", 1, 100000000);
  if (j.contains("max_cg_iterations")) {
    cfg.max_cg_iterations = c.integer(j["max_cg_iterations"], ptr + "/max_cg_iterations", 1, 100000000);
  }
  if (j.contains("omega_threshold")) cfg.omega_threshold = c.positive(j["omega_threshold"], ptr + "/omega_threshold");
  if (j.contains("divergence_bound")) cfg.divergence_bound = c.positive(j["divergence_bound"], ptr + "/divergence_bound");
  if (j.contains("multilevel")) cfg.multilevel = c.boolean(j["multilevel"], ptr + "/multilevel");
}

std::vector<double> number_list(const Ctx& c, const json& j, const std::string& ptr, bool positive) {
  std::vector<double> out;
  const auto& a = c.array(j, ptr);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string p = ptr + "/" + std::to_string(i);
    out.push_back(positive ? c.positive(a[i], p) : c.nonnegative(a[i], p));
  }
  return out;
}

HeleShawBlock parse_heleshaw(const Ctx& c, const json& j, const std::string& ptr, int dim) {
  c.object(j, ptr, {"initial", "source", "eta", "times", "enclosing", "bracket_resolution", "bracket_cap", "law"});
  HeleShawBlock b;
  b.initial = parse_domain(c, c.at(j, ptr, "initial"), ptr + "/initial", dim);
  if (j.contains("source")) b.source = c.point(j["source"], ptr + "/source", dim);
  if (j.contains("eta")) b.eta = parse_measure(c, j["eta"], ptr + "/eta", dim);
  if (!j.contains("source") && !j.contains("eta")) c.fail(ptr, "give a 'source' point or an 'eta' measure");
  b.times = number_list(c, c.at(j, ptr, "times"), ptr + "/times", true);
  if (b.times.empty()) c.fail(ptr + "/times", "needs at least one time");
  for (std::size_t i = 1; i < b.times.size(); ++i) {
    if (!(b.times[i] > b.times[i - 1])) c.fail(ptr + "/times/" + std::to_string(i), "times must increase strictly");
  }
  if (j.contains("enclosing")) b.enclosing = parse_domain(c, j["enclosing"], ptr + "/enclosing", dim);
  if (j.contains("bracket_resolution")) {
    b.bracket_resolution = c.positive(j["bracket_resolution"], ptr + "/bracket_resolution");
  }
  if (j.contains("bracket_cap")) b.bracket_cap = c.positive(j["bracket_cap"], ptr + "/bracket_cap");
  if (j.contains("law")) {
    const auto& a = c.array(j["law"], ptr + "/law");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = ptr + "/law/" + std::to_string(i);
      c.object(a[i], p, {"t", "eps"});
      b.law.push_back({c.positive(c.at(a[i], p, "t"), p + "/t"), c.positive(c.at(a[i], p, "eps"), p + "/eps")});
    }
  }
  return b;
}

VerifyBlock parse_verify(const Ctx& c, const json& j, const std::string& ptr, int dim) {
  c.object(j, ptr, {"omega", "exterior_samples", "interior_samples", "tolerance"});
  VerifyBlock b;
  if (j.contains("omega")) b.omega = c.mask_file(j["omega"], ptr + "/omega", dim);
  if (j.contains("exterior_samples")) {
    b.exterior_samples = c.integer(j["exterior_samples"], ptr + "/exterior_samples", 1, 1000000);
  }
  if (j.contains("interior_samples")) {
    b.interior_samples = c.integer(j["interior_samples"], ptr + "/interior_samples", 0, 1000000);
  }
  if (j.contains("tolerance")) b.tolerance = c.positive(j["tolerance"], ptr + "/tolerance");
  return b;
}

RadialTableBlock parse_radial_table(const Ctx& c, const json& j, const std::string& ptr) {
  c.object(j, ptr, {"dims", "k", "radii", "point_masses", "balls", "spheres"});
  RadialTableBlock b;
  if (j.contains("dims")) {
    b.dims.clear();
    const auto& a = c.array(j["dims"], ptr + "/dims");
    for (std::size_t i = 0; i < a.size(); ++i) b.dims.push_back(c.integer(a[i], ptr + "/dims/" + std::to_string(i), 2, 3));
  }
  if (j.contains("k")) b.ks = number_list(c, j["k"], ptr + "/k", false);
  if (j.contains("radii")) b.radii = number_list(c, j["radii"], ptr + "/radii", true);
  if (j.contains("point_masses")) b.point_masses = number_list(c, j["point_masses"], ptr + "/point_masses", true);
  if (j.contains("balls")) {
    const auto& a = c.array(j["balls"], ptr + "/balls");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = ptr + "/balls/" + std::to_string(i);
      c.object(a[i], p, {"radius", "density"});
      Ball ball;
      ball.radius = c.positive(c.at(a[i], p, "radius"), p + "/radius");
      ball.density = c.positive(c.at(a[i], p, "density"), p + "/density");
      b.balls.push_back(ball);
    }
  }
  if (j.contains("spheres")) {
    const auto& a = c.array(j["spheres"], ptr + "/spheres");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = ptr + "/spheres/" + std::to_string(i);
      c.object(a[i], p, {"T", "t"});
      b.spheres.push_back({c.positive(c.at(a[i], p, "T"), p + "/T"), c.positive(c.at(a[i], p, "t"), p + "/t")});
    }
  }
  return b;
}

}  // namespace

SchemaError::SchemaError(const std::string& file, int line, const std::string& pointer, const std::string& msg)
    : std::runtime_error(where(file, line, pointer) + msg), line_(line), pointer_(pointer) {}

bool MeasureSpec::empty() const {
  return atoms.empty() && balls.empty() && shells.empty() && !density;
}

Measure MeasureSpec::envelope(int dim) const {
  Measure m;
  m.atoms = atoms;
  m.shells = shells;
  m.density = density;
  for (const auto& b : balls) {
    const double mass = b.density * radial::ball_volume(dim, b.radius);
    m.shells.push_back({b.center, b.radius, mass / radial::sphere_area(dim, b.radius)});
  }
  return m;
}

Measure MeasureSpec::build(const GridSpec& box) const {
  Measure m;
  m.atoms = atoms;
  m.shells = shells;
  if (density) m.density = rasterize(Measure{{}, density, {}}, box);
  for (const auto& b : balls) m += ball_density(box, b.center, b.radius, b.density);
  return m;
}

Mask DomainSpec::on(const GridSpec& box) const {
  switch (kind) {
    case Kind::Ball:
      return ball_mask(box, center, radius);
    case Kind::Box: {
      Mask m(box);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const Point x = box.center(i);
        bool in = true;
        for (int d = 0; d < box.dim; ++d) in = in && x[d] > lower[d] && x[d] < upper[d];
        m.set(i, in);
      }
      return m;
    }
    case Kind::MaskFile:
      if (!mask->spec.same_as(box)) throw GridError("mask file grid differs from the run grid");
      return *mask;
  }
  return Mask(box);
}

Scenario parse(const std::string& text, const std::filesystem::path& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = json_lines::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
    throw SchemaError(origin.string(), line, "", std::string("not valid JSON: ") + e.what());
  }
  const Ctx c(text, origin);
  c.object(doc, "", {"medium", "measure", "rho", "box", "h", "solver", "heleshaw", "verify", "lambda1",
                     "radial_table", "description"});
  Scenario s;
  s.path = origin;
  s.text = text;
  if (doc.contains("description")) c.string(doc["description"], "/description");

  int dim = 0;
  if (doc.contains("medium")) {
    const json& m = doc["medium"];
    c.object(m, "/medium", {"dim", "k"});
    dim = c.integer(c.at(m, "/medium", "dim"), "/medium/dim", 2, 3);
    const double k = c.nonnegative(c.at(m, "/medium", "k"), "/medium/k");
    s.medium = Medium(dim, k);
  }
  auto need_dim = [&](const char* key) {
    if (dim == 0) c.fail(std::string("/") + key, "requires a 'medium' block");
  };

  if (doc.contains("h")) s.h = c.positive(doc["h"], "/h");
  s.config.h = s.h;
  if (doc.contains("solver")) parse_solver(c, doc["solver"], "/solver", s.config);

  if (doc.contains("measure")) {
    need_dim("measure");
    s.measure = parse_measure(c, doc["measure"], "/measure", dim);
  }

  if (doc.contains("rho")) {
    need_dim("rho");
    const json& r = doc["rho"];
    if (r.is_number()) {
      s.rho = balayage::Rho::constant(c.positive(r, "/rho"));
    } else {
      c.object(r, "/rho", {"constant", "field"});
      if (r.size() != 1) c.fail("/rho", "give exactly one of 'constant' or 'field'");
      if (r.contains("constant")) {
        s.rho = balayage::Rho::constant(c.positive(r["constant"], "/rho/constant"));
      } else {
        ScalarField f = c.field_file(r["field"], "/rho/field", dim);
        if (!f.all_finite() || !(f.min() > 0.0)) c.fail("/rho/field", "rho must be finite and bounded below by a positive constant");
        s.rho = balayage::Rho::from_field(std::move(f));
      }
    }
  }

  if (doc.contains("box")) {
    const json& b = doc["box"];
    if (b.is_string()) {
      if (b.get<std::string>() != "auto") c.fail("/box", "expected \"auto\" or an object");
    } else {
      need_dim("box");
      c.object(b, "/box", {"origin", "shape", "h", "center", "half_width"});
      if (b.contains("origin") || b.contains("shape")) {
        GridSpec g;
        g.dim = dim;
        g.origin = c.point(c.at(b, "/box", "origin"), "/box/origin", dim);
        const json& sh = c.at(b, "/box", "shape");
        if (!sh.is_array() || int(sh.size()) != dim) c.fail("/box/shape", "expected " + std::to_string(dim) + " integers");
        for (int d = 0; d < dim; ++d) g.shape[d] = c.integer(sh[d], "/box/shape/" + std::to_string(d), 3, 1 << 20);
        g.h = b.contains("h") ? c.positive(b["h"], "/box/h") : s.h;
        if (b.contains("center") || b.contains("half_width")) c.fail("/box", "give origin/shape or center/half_width, not both");
        try {
          g.validate();
        } catch (const GridError& e) {
          c.fail("/box", e.what());
        }
        s.box = g;
        s.h = g.h;
        s.config.h = g.h;
      } else {
        s.box_center = c.point(c.at(b, "/box", "center"), "/box/center", dim);
        s.box_half_width = c.positive(c.at(b, "/box", "half_width"), "/box/half_width");
        if (b.contains("h")) {
          s.h = c.positive(b["h"], "/box/h");
          s.config.h = s.h;
        }
      }
    }
  }

  if (doc.contains("heleshaw")) {
    need_dim("heleshaw");
    s.heleshaw = parse_heleshaw(c, doc["heleshaw"], "/heleshaw", dim);
  }
  if (doc.contains("verify")) {
    need_dim("verify");
    s.verify = parse_verify(c, doc["verify"], "/verify", dim);
  }
  if (doc.contains("lambda1")) {
    need_dim("lambda1");
    const json& l = doc["lambda1"];
    c.object(l, "/lambda1", {"domain", "rel_tol"});
    Lambda1Block b;
    b.domain = parse_domain(c, c.at(l, "/lambda1", "domain"), "/lambda1/domain", dim);
    if (l.contains("rel_tol")) b.rel_tol = c.positive(l["rel_tol"], "/lambda1/rel_tol");
    s.lambda1 = b;
  }
  if (doc.contains("radial_table")) s.radial_table = parse_radial_table(c, doc["radial_table"], "/radial_table");

  try {
    s.config.validate();
  } catch (const std::exception& e) {
    c.fail("/solver", e.what());
  }
  return s;
}

Scenario load(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str(), p);
}

void override_h(Scenario& s, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("--grid-h must be positive");
  auto reject_mask = [&](const std::optional<Mask>& m) {
    if (m && std::abs(m->spec.h - h) > 1e-12 * h) {
      throw std::invalid_argument("--grid-h cannot resample a mask file (grid h = " + io::format_double(m->spec.h) + ")");
    }
  };
  if (s.heleshaw) {
    reject_mask(s.heleshaw->initial.mask);
    if (s.heleshaw->enclosing) reject_mask(s.heleshaw->enclosing->mask);
  }
  if (s.verify) reject_mask(s.verify->omega);
  if (s.lambda1) reject_mask(s.lambda1->domain.mask);
  if (s.box) {
    GridSpec g = *s.box;
    Point c{0.0, 0.0, 0.0};
    double half = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      c[d] = g.origin[d] + 0.5 * g.shape[d] * g.h;
      half = std::max(half, 0.5 * g.shape[d] * g.h);
    }
    GridSpec n = g;
    n.h = h;
    for (int d = 0; d < g.dim; ++d) {
      n.shape[d] = std::max(3, int(std::lround(g.shape[d] * g.h / h)));
      n.origin[d] = c[d] - 0.5 * n.shape[d] * h;
    }
    n.validate();
    s.box = n;
  }
  s.h = h;
  s.config.h = h;
}

GridSpec resolve_box(const Scenario& s) {
  const Medium& m = require_medium(s);
  if (s.box) return *s.box;
  if (s.box_center) return GridSpec::centered(m.dim(), *s.box_center, *s.box_half_width, s.h);
  if (!s.rho.is_constant()) throw GridError("a variable rho needs an explicit box");
  if (!s.measure || s.measure->empty()) throw GridError("an automatic box needs a nonempty measure");
  return balayage::auto_box(s.measure->envelope(m.dim()), m, s.h, s.rho);
}

const Medium& require_medium(const Scenario& s) {
  if (!s.medium) throw SchemaError(s.path.string(), 1, "/medium", "this command requires a 'medium' block");
  return *s.medium;
}

}  // namespace hb::scenario
