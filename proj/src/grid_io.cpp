#include "hb/grid_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hb::io {

using nlohmann::json;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

json sidecar(const GridSpec& s, const std::string& format) {
  json j = spec_to_json(s);
  j["format"] = format;
  j["layout"] = "row-major, last axis fastest";
  return j;
}

std::pair<int, int> pgm_extent(const GridSpec& s) {
  const int width = s.shape[s.dim - 1];
  int height = 1;
  for (int d = 0; d < s.dim - 1; ++d) height *= s.shape[d];
  return {width, height};
}

json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("invalid JSON in " + p.string() + ": " + e.what());
  }
}

}  // namespace

json spec_to_json(const GridSpec& s) {
  json j;
  j["dim"] = s.dim;
  j["h"] = s.h;
  j["origin"] = json::array();
  j["shape"] = json::array();
  for (int d = 0; d < s.dim; ++d) {
    j["origin"].push_back(s.origin[d]);
    j["shape"].push_back(s.shape[d]);
  }
  return j;
}

GridSpec spec_from_json(const json& j) {
  try {
    GridSpec s;
    s.dim = j.at("dim").get<int>();
    s.h = j.at("h").get<double>();
    const auto& o = j.at("origin");
    const auto& sh = j.at("shape");
    if (int(o.size()) != s.dim || int(sh.size()) != s.dim) throw IoError("grid arrays must have dim entries");
    for (int d = 0; d < s.dim; ++d) {
      s.origin[d] = o[d].get<double>();
      s.shape[d] = sh[d].get<int>();
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed grid description: ") + e.what());
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".json");
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

void write_field(const ScalarField& f, const std::filesystem::path& bin) {
  std::ofstream out(bin, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + bin.string());
  std::vector<std::uint64_t> raw(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) raw[i] = to_little(std::bit_cast<std::uint64_t>(f[i]));
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size() * 8));
  if (!out) throw IoError("write failed for " + bin.string());
  write_text(sidecar_path(bin), sidecar(f.spec, "float64-le").dump(2) + "\n");
}

ScalarField read_field(const std::filesystem::path& bin) {
  const json meta = read_json_file(sidecar_path(bin));
  if (meta.value("format", "") != "float64-le") throw IoError("unsupported field format in " + bin.string());
  ScalarField f(spec_from_json(meta));
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin.string());
  std::vector<std::uint64_t> raw(f.size());
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size() * 8));
  if (in.gcount() != std::streamsize(raw.size() * 8)) throw IoError("field file is truncated: " + bin.string());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::bit_cast<double>(to_little(raw[i]));
  return f;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_field_csv(const ScalarField& f, const std::filesystem::path& csv) {
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw IoError("cannot write " + csv.string());
  static const char* axes[] = {"x", "y", "z"};
  for (int d = 0; d < f.spec.dim; ++d) out << axes[d] << ',';
  out << "value\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Point p = f.spec.center(i);
    for (int d = 0; d < f.spec.dim; ++d) out << format_double(p[d]) << ',';
    out << format_double(f[i]) << '\n';
  }
}

void write_mask(const Mask& m, const std::filesystem::path& pgm) {
  auto [w, h] = pgm_extent(m.spec);
  std::ofstream out(pgm, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + pgm.string());
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> px(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) px[i] = m[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(px.data()), std::streamsize(px.size()));
  if (!out) throw IoError("write failed for " + pgm.string());
  write_text(sidecar_path(pgm), sidecar(m.spec, "pgm-p5").dump(2) + "\n");
}

Mask read_mask(const std::filesystem::path& pgm) {
  const json meta = read_json_file(sidecar_path(pgm));
  Mask m(spec_from_json(meta));
  std::ifstream in(pgm, std::ios::binary);
  if (!in) throw IoError("cannot open " + pgm.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  auto [ew, eh] = pgm_extent(m.spec);
  if (magic != "P5" || maxval != 255 || w != ew || h != eh) {
    throw IoError("mask image does not match its metadata: " + pgm.string());
  }
  std::vector<unsigned char> px(m.size());
  in.read(reinterpret_cast<char*>(px.data()), std::streamsize(px.size()));
  if (in.gcount() != std::streamsize(px.size())) throw IoError("mask file is truncated: " + pgm.string());
  for (std::size_t i = 0; i < m.size(); ++i) m.flags[i] = px[i] >= 128;
  return m;
}

}  // namespace hb::io
