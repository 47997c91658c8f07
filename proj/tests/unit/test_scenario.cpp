#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "hb/scenario.hpp"

using namespace hb;
using namespace hb::scenario;
namespace fs = std::filesystem;

namespace {

int line_of_error(const std::string& text) {
  try {
    parse(text, "inline.json");
  } catch (const SchemaError& e) {
    return e.line();
  }
  return -1;
}

std::string pointer_of_error(const std::string& text) {
  try {
    parse(text, "inline.json");
  } catch (const SchemaError& e) {
    return e.pointer();
  }
  return "";
}

}  // namespace

TEST_CASE("bundled scenarios load") {
  const fs::path dir = fs::path(HB_SOURCE_DIR) / "scenarios";
  int n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load(entry.path()));
    ++n;
  }
  CHECK(n >= 5);
}

TEST_CASE("point-mass scenario contents") {
  const Scenario s = load(fs::path(HB_SOURCE_DIR) / "scenarios" / "point_mass_3d.json");
  REQUIRE(s.medium.has_value());
  CHECK(s.medium->dim() == 3);
  CHECK(s.medium->k() == 1.0);
  REQUIRE(s.measure.has_value());
  REQUIRE(s.measure->atoms.size() == 1);
  CHECK(s.measure->atoms[0].mass == doctest::Approx(4 * std::numbers::pi * (std::sin(2.0) - 2 * std::cos(2.0))));
  CHECK(!s.box.has_value());
  const GridSpec b = resolve_box(s);
  CHECK(b.dim == 3);
  CHECK(b.h == s.h);
}

TEST_CASE("minimal scenario and defaults") {
  const Scenario s = parse(R"({"medium": {"dim": 2, "k": 0.5}, "measure": {"atoms": [{"center": [0, 0], "mass": 1}]}})",
                           "inline.json");
  CHECK(s.rho.is_constant());
  CHECK(s.rho.value == 1.0);
  CHECK(s.h == 0.05);
  CHECK(!s.heleshaw.has_value());
  const GridSpec b = resolve_box(s);
  CHECK(b.dim == 2);
}

TEST_CASE("errors name the offending line and pointer") {
  const std::string bad_mass = "{\n  \"medium\": {\"dim\": 2, \"k\": 1},\n  \"measure\": {\"atoms\": [\n    {\"center\": [0, 0], \"mass\": -1}\n  ]}\n}\n";
  CHECK(line_of_error(bad_mass) == 4);
  CHECK(pointer_of_error(bad_mass) == "/measure/atoms/0/mass");

  const std::string unknown = "{\n  \"medium\": {\"dim\": 2, \"k\": 1},\n  \"colour\": 3\n}\n";
  CHECK(line_of_error(unknown) == 3);
  CHECK(pointer_of_error(unknown) == "/colour");

  const std::string dim = "{\n  \"medium\": {\"dim\": 4, \"k\": 1}\n}\n";
  CHECK(line_of_error(dim) == 2);

  const std::string syntax = "{\n  \"medium\": {\"dim\": 2, \"k\": 1},\n  \"h\": ,\n}\n";
  CHECK(line_of_error(syntax) == 3);

  try {
    parse(bad_mass, "bad.json");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).rfind("bad.json:4: /measure/atoms/0/mass:", 0) == 0);
  }
}

TEST_CASE("point dimension must match the medium") {
  const std::string t = R"({"medium": {"dim": 2, "k": 1}, "measure": {"atoms": [{"center": [0, 0, 0], "mass": 1}]}})";
  CHECK_THROWS_AS(parse(t, "inline.json"), SchemaError);
}

TEST_CASE("rho forms") {
  const std::string base = R"({"medium": {"dim": 2, "k": 1}, "rho": )";
  CHECK(parse(base + "2.5}", "x.json").rho.value == 2.5);
  CHECK(parse(base + R"({"constant": 3}})", "x.json").rho.value == 3.0);
  CHECK_THROWS_AS(parse(base + "-1}", "x.json"), SchemaError);
  CHECK_THROWS_AS(parse(base + R"({"field": "missing.bin"}})", "x.json"), std::exception);
}

TEST_CASE("box forms and grid overrides") {
  const std::string t =
      R"({"medium": {"dim": 2, "k": 1}, "measure": {"atoms": [{"center": [0, 0], "mass": 1}]},
          "box": {"center": [1, 0], "half_width": 2}, "h": 0.1})";
  Scenario s = parse(t, "x.json");
  GridSpec b = resolve_box(s);
  CHECK(b.h == 0.1);
  CHECK(b.origin[0] + 0.5 * b.shape[0] * b.h == doctest::Approx(1.0));
  override_h(s, 0.05);
  b = resolve_box(s);
  CHECK(b.h == 0.05);
  CHECK(b.shape[0] * b.h >= 4.0 - 1e-12);

  const std::string explicit_box =
      R"({"medium": {"dim": 2, "k": 1}, "box": {"origin": [-1, -1], "shape": [20, 20], "h": 0.1}})";
  Scenario e = parse(explicit_box, "x.json");
  override_h(e, 0.05);
  const GridSpec eb = resolve_box(e);
  CHECK(eb.shape[0] == 40);
  CHECK(eb.origin[0] == doctest::Approx(-1.0));
}

TEST_CASE("blocks") {
  const Scenario hs = load(fs::path(HB_SOURCE_DIR) / "scenarios" / "heleshaw_2d.json");
  REQUIRE(hs.heleshaw.has_value());
  CHECK(!hs.heleshaw->times.empty());
  CHECK(std::is_sorted(hs.heleshaw->times.begin(), hs.heleshaw->times.end()));
  const Scenario rt = load(fs::path(HB_SOURCE_DIR) / "scenarios" / "radial_table.json");
  CHECK(rt.radial_table.has_value());
  const Scenario l1 = load(fs::path(HB_SOURCE_DIR) / "scenarios" / "lambda1_disc.json");
  REQUIRE(l1.lambda1.has_value());
  CHECK(l1.lambda1->domain.kind == DomainSpec::Kind::Ball);

  const std::string bad_times =
      R"({"medium": {"dim": 2, "k": 1}, "heleshaw": {"initial": {"ball": {"center": [0, 0], "radius": 0.5}},
          "source": [0, 0], "times": []}})";
  CHECK_THROWS_AS(parse(bad_times, "x.json"), SchemaError);
}
