#pragma once

// Scenario files: JSON documents describing a medium, a measure, rho, the
// box and command-specific blocks. The published schema lives in
// schema/scenario.schema.json; parsing here enforces the same rules and
// reports violations with the source line.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hb/balayage.hpp"
#include "json.hpp"

namespace hb::scenario {

class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& file, int line, const std::string& pointer, const std::string& msg);
  int line() const { return line_; }
  const std::string& pointer() const { return pointer_; }

 private:
  int line_;
  std::string pointer_;
};

struct Ball {
  Point center{0.0, 0.0, 0.0};
  double radius = 0.0;
  double density = 0.0;
};

/// A measure before rasterization: balls and density files need a box.
struct MeasureSpec {
  std::vector<Atom> atoms;
  std::vector<Ball> balls;
  std::vector<Shell> shells;
  std::optional<ScalarField> density;

  bool empty() const;
  /// Same support and mass, with balls stood in by shells; enough to size a box.
  Measure envelope(int dim) const;
  Measure build(const GridSpec& box) const;
};

/// A domain given as a ball, an axis-aligned box or a mask file.
struct DomainSpec {
  enum class Kind { Ball, Box, MaskFile } kind = Kind::Ball;
  Point center{0.0, 0.0, 0.0};
  double radius = 0.0;
  Point lower{0.0, 0.0, 0.0};
  Point upper{0.0, 0.0, 0.0};
  std::optional<Mask> mask;

  Mask on(const GridSpec& box) const;
};

struct LawCheck {
  double t = 0.0;
  double eps = 0.0;
};

struct HeleShawBlock {
  DomainSpec initial;
  Point source{0.0, 0.0, 0.0};
  std::optional<MeasureSpec> eta;
  std::vector<double> times;
  std::optional<DomainSpec> enclosing;
  double bracket_resolution = 0.0;
  double bracket_cap = 1e4;
  std::vector<LawCheck> law;
};

struct VerifyBlock {
  std::optional<Mask> omega;  // absent: sweep the measure first
  int exterior_samples = 64;
  int interior_samples = 64;
  double tolerance = 0.0;  // <= 0: 10 h |mu|
};

struct Lambda1Block {
  DomainSpec domain;
  double rel_tol = 1e-6;
};

struct SphereCase {
  double T = 0.0;
  double t = 0.0;
};

struct RadialTableBlock {
  std::vector<int> dims{2, 3};
  std::vector<double> ks{1.0};
  std::vector<double> radii{0.5, 1.0, 2.0};
  std::vector<double> point_masses;
  std::vector<Ball> balls;  // center ignored; density c, radius R
  std::vector<SphereCase> spheres;
};

struct Scenario {
  std::filesystem::path path;
  std::string text;  // raw bytes, hashed into the manifest
  std::optional<Medium> medium;
  std::optional<MeasureSpec> measure;
  balayage::Rho rho;
  std::optional<GridSpec> box;  // absent means auto
  std::optional<Point> box_center;
  std::optional<double> box_half_width;
  double h = 0.05;
  balayage::SweepConfig config;
  std::optional<HeleShawBlock> heleshaw;
  std::optional<VerifyBlock> verify;
  std::optional<Lambda1Block> lambda1;
  std::optional<RadialTableBlock> radial_table;
};

Scenario load(const std::filesystem::path& p);
Scenario parse(const std::string& text, const std::filesystem::path& origin);

/// Overrides the grid spacing. Explicit boxes keep their extent; grids taken
/// from mask or density files cannot be resampled and are rejected.
void override_h(Scenario& s, double h);

/// The sweep box: explicit, centered, or sized from the measure (constant rho).
GridSpec resolve_box(const Scenario& s);

const Medium& require_medium(const Scenario& s);

}  // namespace hb::scenario
