#pragma once

// Uniform cell-centered grids in two or three dimensions, grid functions,
// boolean masks, and compactly supported measures together with the
// k-potential evaluated on a grid.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hb/radial.hpp"

namespace hb {

/// Points always carry three coordinates; the third is ignored when N = 2.
using Point = std::array<double, 3>;
using Index3 = std::array<int, 3>;

double distance(const Point& a, const Point& b, int dim);

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cap on the number of cells of any grid: HB_MAX_CELLS if set, else 2^26.
std::size_t max_cells();

struct GridSpec {
  int dim = 2;
  Point origin{0.0, 0.0, 0.0};  // lower corner of the box
  double h = 1.0;
  Index3 shape{1, 1, 1};  // shape[2] == 1 when dim == 2

  /// A box of cells centered on `center` whose half-width is at least
  /// `half_width` (rounded up to whole cells).
  static GridSpec centered(int dim, const Point& center, double half_width, double h);

  std::size_t size() const {
    return std::size_t(shape[0]) * std::size_t(shape[1]) * std::size_t(shape[2]);
  }
  std::size_t index(int i, int j, int l = 0) const {
    return (std::size_t(i) * shape[1] + std::size_t(j)) * shape[2] + std::size_t(l);
  }
  Index3 coords(std::size_t linear) const;
  std::array<std::ptrdiff_t, 3> strides() const {
    return {std::ptrdiff_t(shape[1]) * shape[2], std::ptrdiff_t(shape[2]), 1};
  }
  Point center(std::size_t linear) const;
  Point center(const Index3& c) const;
  Point upper() const;
  double cell_volume() const;
  /// Radius of the ball whose volume equals one cell.
  double equal_volume_radius() const;
  /// Cell containing p (clamped to the box).
  Index3 locate(const Point& p) const;
  bool contains(const Point& p) const;
  /// Distance (in cells) from a cell to the nearest box face.
  int boundary_distance(std::size_t linear) const;

  void validate() const;
  bool same_as(const GridSpec& o) const;
};

struct ScalarField {
  GridSpec spec;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& s, double fill = 0.0) : spec(s), values(s.size(), fill) {}

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }

  double max() const;
  double min() const;
  double integral() const;  // sum of values times cell volume
  /// Multilinear interpolation between cell centers (clamped at the box).
  double interpolate(const Point& p) const;
  bool all_finite() const;
};

ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(double s, const ScalarField& a);
double sup_distance(const ScalarField& a, const ScalarField& b);

struct Mask {
  GridSpec spec;
  std::vector<std::uint8_t> flags;

  Mask() = default;
  explicit Mask(const GridSpec& s, bool fill = false) : spec(s), flags(s.size(), fill ? 1 : 0) {}

  bool operator[](std::size_t i) const { return flags[i] != 0; }
  void set(std::size_t i, bool v = true) { flags[i] = v ? 1 : 0; }
  std::size_t size() const { return flags.size(); }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

// Mask algebra and morphology (face-neighbour connectivity).
Mask operator|(const Mask& a, const Mask& b);
Mask operator&(const Mask& a, const Mask& b);
Mask operator~(const Mask& a);
Mask dilate(const Mask& m, int cells = 1);
Mask erode(const Mask& m, int cells = 1);
/// Cells outside m that share a face with a cell of m.
Mask outer_layer(const Mask& m);
/// Cells of m that share a face with a cell outside m (or the box boundary).
Mask inner_layer(const Mask& m);
std::size_t symmetric_difference(const Mask& a, const Mask& b);
/// a \ b contains no cell farther than `layers` cells from b.
bool subset_up_to(const Mask& a, const Mask& b, int layers);
/// Connected components; labels are 1-based, 0 outside the mask.
std::vector<int> components(const Mask& m, int* count);
Mask component_mask(const std::vector<int>& labels, const GridSpec& spec, int label);
Mask ball_mask(const GridSpec& spec, const Point& center, double radius);
/// Fraction of the cell at cell_center covered by B_radius(c): exact chords
/// along each axis, sub midpoint samples across.
double cell_fraction_in_ball(const GridSpec& spec, const Point& cell_center, const Point& c,
                             double radius, int sub = 16);
Mask annulus_mask(const GridSpec& spec, const Point& center, double inner, double outer);
/// Volume (cell count times cell volume).
double mask_volume(const Mask& m);

struct Atom {
  Point center{};
  double mass = 0.0;
};

/// Uniform surface density on a sphere (circle when N = 2).
struct Shell {
  Point center{};
  double radius = 0.0;
  double density = 0.0;
};

/// Compactly supported positive measure: point atoms, a cell density field
/// (mass per unit volume) and spherical shells.
struct Measure {
  std::vector<Atom> atoms;
  std::optional<ScalarField> density;
  std::vector<Shell> shells;

  double total_mass() const;
  bool empty() const;
  /// Bounding box of the support, as (lower, upper). Throws for an empty measure.
  std::pair<Point, Point> bounding_box(int dim) const;
  /// Smallest radius about `c` containing the support.
  double support_radius(const Point& c, int dim) const;
  void validate(int dim) const;

  Measure& operator+=(const Measure& o);
};

Measure operator+(Measure a, const Measure& b);
Measure operator*(double s, Measure a);

/// Uniform density on a ball, rasterized with fractional cell coverage.
Measure ball_density(const GridSpec& spec, const Point& center, double radius, double density);
/// Density `value` on the cells of a mask.
Measure mask_density(const Mask& m, double value);
/// Density field on `spec` carrying the same mass: atoms to their cell, shells
/// through surface samples, densities copied (or resampled when grids differ).
ScalarField rasterize(const Measure& mu, const GridSpec& spec);

/// Quadrature nodes on a sphere: Fibonacci points (N = 3) or equally spaced
/// angles (N = 2); weights sum to the surface area.
struct SurfaceNode {
  Point point;
  double weight;
};
std::vector<SurfaceNode> sphere_nodes(int dim, const Point& center, double radius, int count);

enum class PotentialMethod { Auto, Direct, Fft };

/// U_k^mu at the cell centers of `target`.
ScalarField potential(const Measure& mu, const GridSpec& target, const Medium& medium,
                      PotentialMethod method = PotentialMethod::Auto);
/// U_k^mu at an arbitrary point (direct summation).
double potential_at(const Measure& mu, const Point& x, const Medium& medium);
/// Cells whose equal-volume ball contains an atom: the potential is
/// regularized there (kernel averaged over that ball) and flagged.
Mask singular_cells(const Measure& mu, const GridSpec& target);

/// -(Delta_h + k^2) with the (2N+1)-point stencil; values outside the box are
/// taken as zero, so results on the outermost cell layer are not meaningful.
ScalarField helmholtz_apply(const ScalarField& f, const Medium& medium);

/// Mollification mu * phi_delta, phi_delta = c_k(delta/3)^-3 (chi * chi * chi)
/// with chi the indicator of B_{delta/3}; requires 0 < delta < 3 R_k.
Measure mollify(const Measure& mu, double delta, const GridSpec& spec, const Medium& medium);

/// Sufficient condition for existence: sup_x mu(B_r(x)) <= c_k(r), with x
/// ranging over the cell centers of `spec` and the atom positions.
bool existence_precheck(const Measure& mu, double r, const Medium& medium, const GridSpec& spec);
double max_ball_mass(const Measure& mu, double r, const GridSpec& spec);

/// Linear convolution on a grid, cropped to the input shape:
/// out[i] = sum_o kernel[o] * in[i - o] for offsets |o_d| <= half[d].
std::vector<double> convolve(const GridSpec& spec, const std::vector<double>& in,
                             const std::vector<double>& kernel, const Index3& half);

}  // namespace hb
