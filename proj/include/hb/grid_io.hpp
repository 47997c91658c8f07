#pragma once

// File formats. Fields: raw little-endian float64, row-major with the last
// axis fastest, plus a JSON sidecar (<file>.json) holding the grid. Masks:
// binary PGM (P5, 0 or 255), width = last extent, height = product of the
// others, plus the same sidecar.

#include <filesystem>
#include <stdexcept>
#include <string>

#include "hb/grid.hpp"
#include "json.hpp"

namespace hb::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json spec_to_json(const GridSpec& s);
GridSpec spec_from_json(const nlohmann::json& j);

std::filesystem::path sidecar_path(const std::filesystem::path& p);

void write_field(const ScalarField& f, const std::filesystem::path& bin);
ScalarField read_field(const std::filesystem::path& bin);
/// One row per cell: coordinates of the cell center, then the value.
void write_field_csv(const ScalarField& f, const std::filesystem::path& csv);

void write_mask(const Mask& m, const std::filesystem::path& pgm);
Mask read_mask(const std::filesystem::path& pgm);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Writes text atomically enough for our purposes (truncate + write).
void write_text(const std::filesystem::path& p, const std::string& text);

}  // namespace hb::io
