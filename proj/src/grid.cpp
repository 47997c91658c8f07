#include "hb/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <numbers>
#include <string>

namespace hb {

namespace {

constexpr double kPi = std::numbers::pi;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

int nice_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

// Kernel for a unit mass smeared over a ball of radius a centered at distance d.
double cell_kernel(const Medium& medium, double a, double d) {
  if (d < a) return radial::smeared_psi(medium, a, d);
  return radial::psi(medium, d);
}

template <class F>
void for_each_neighbor(const GridSpec& s, std::size_t i, F&& f) {
  const Index3 c = s.coords(i);
  const auto st = s.strides();
  for (int d = 0; d < s.dim; ++d) {
    if (c[d] > 0) f(i - st[d]);
    if (c[d] + 1 < s.shape[d]) f(i + st[d]);
  }
}

}  // namespace

double cell_fraction_in_ball(const GridSpec& spec, const Point& cell_center, const Point& c,
                             double radius, int sub) {
  const int dim = spec.dim;
  const double h = spec.h;
  const double half_diag = 0.5 * h * std::sqrt(double(dim));
  const double d = distance(cell_center, c, dim);
  if (d + half_diag <= radius) return 1.0;
  if (d - half_diag >= radius) return 0.0;
  // transverse midpoint samples with the exact chord along one axis, averaged over
  // the choice of axis so lattice symmetries are kept
  const int tsub = dim == 3 ? sub : 1;
  double acc = 0.0;
  for (int axis = 0; axis < dim; ++axis) {
    const int t0 = (axis + 1) % dim;
    const int t1 = (axis + 2) % dim;
    const double lo = cell_center[axis] - 0.5 * h;
    const double hi = cell_center[axis] + 0.5 * h;
    for (int a = 0; a < sub; ++a) {
      for (int b = 0; b < tsub; ++b) {
        const double x = cell_center[t0] + ((a + 0.5) / sub - 0.5) * h - c[t0];
        double q = x * x;
        if (dim == 3) {
          const double y = cell_center[t1] + ((b + 0.5) / sub - 0.5) * h - c[t1];
          q += y * y;
        }
        if (q >= radius * radius) continue;
        const double half = std::sqrt(radius * radius - q);
        acc += std::max(0.0, std::min(hi, c[axis] + half) - std::max(lo, c[axis] - half));
      }
    }
  }
  return acc / (h * sub * tsub * dim);
}

double distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

std::size_t max_cells() {
  if (const char* env = std::getenv("HB_MAX_CELLS")) {
    try {
      long long v = std::stoll(env);
      if (v > 0) return std::size_t(v);
    } catch (const std::exception&) {
    }
  }
  return std::size_t(1) << 26;
}

// ---------------------------------------------------------------------------
// GridSpec

GridSpec GridSpec::centered(int dim, const Point& center, double half_width, double h) {
  if (!(h > 0.0)) throw GridError("grid spacing must be positive");
  GridSpec s;
  s.dim = dim;
  s.h = h;
  const int n = std::max(3, int(std::ceil(2.0 * half_width / h - 1e-9)));
  for (int d = 0; d < 3; ++d) {
    if (d < dim) {
      s.shape[d] = n;
      s.origin[d] = center[d] - 0.5 * n * h;
    } else {
      s.shape[d] = 1;
      s.origin[d] = 0.0;
    }
  }
  s.validate();
  return s;
}

Index3 GridSpec::coords(std::size_t linear) const {
  Index3 c{0, 0, 0};
  c[2] = int(linear % shape[2]);
  linear /= shape[2];
  c[1] = int(linear % shape[1]);
  c[0] = int(linear / shape[1]);
  return c;
}

Point GridSpec::center(const Index3& c) const {
  Point p{0.0, 0.0, 0.0};
  for (int d = 0; d < dim; ++d) p[d] = origin[d] + (c[d] + 0.5) * h;
  return p;
}

Point GridSpec::center(std::size_t linear) const { return center(coords(linear)); }

Point GridSpec::upper() const {
  Point p{0.0, 0.0, 0.0};
  for (int d = 0; d < dim; ++d) p[d] = origin[d] + shape[d] * h;
  return p;
}

double GridSpec::cell_volume() const { return std::pow(h, dim); }

double GridSpec::equal_volume_radius() const {
  return dim == 2 ? h / std::sqrt(kPi) : h * std::cbrt(3.0 / (4.0 * kPi));
}

Index3 GridSpec::locate(const Point& p) const {
  Index3 c{0, 0, 0};
  for (int d = 0; d < dim; ++d) {
    int v = int(std::floor((p[d] - origin[d]) / h));
    c[d] = std::clamp(v, 0, shape[d] - 1);
  }
  return c;
}

bool GridSpec::contains(const Point& p) const {
  for (int d = 0; d < dim; ++d) {
    if (p[d] < origin[d] || p[d] > origin[d] + shape[d] * h) return false;
  }
  return true;
}

int GridSpec::boundary_distance(std::size_t linear) const {
  const Index3 c = coords(linear);
  int best = 1 << 30;
  for (int d = 0; d < dim; ++d) best = std::min({best, c[d], shape[d] - 1 - c[d]});
  return best;
}

void GridSpec::validate() const {
  if (dim != 2 && dim != 3) throw GridError("grid dimension must be 2 or 3");
  if (!(h > 0.0) || !std::isfinite(h)) throw GridError("grid spacing must be positive");
  for (int d = 0; d < dim; ++d) {
    if (shape[d] < 3) throw GridError("grid extents must be at least 3 cells");
  }
  if (dim == 2 && shape[2] != 1) throw GridError("2-D grids must have shape[2] == 1");
  if (size() > max_cells()) {
    throw GridError("grid of " + std::to_string(size()) + " cells exceeds the cap of " +
                    std::to_string(max_cells()) + " (HB_MAX_CELLS)");
  }
}

bool GridSpec::same_as(const GridSpec& o) const {
  if (dim != o.dim || shape != o.shape) return false;
  if (std::abs(h - o.h) > 1e-12 * h) return false;
  for (int d = 0; d < dim; ++d) {
    if (std::abs(origin[d] - o.origin[d]) > 1e-9 * h) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// ScalarField

double ScalarField::max() const { return *std::max_element(values.begin(), values.end()); }
double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }

double ScalarField::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * spec.cell_volume();
}

bool ScalarField::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::interpolate(const Point& p) const {
  const int dim = spec.dim;
  Index3 base{0, 0, 0};
  std::array<double, 3> w{0.0, 0.0, 0.0};
  for (int d = 0; d < dim; ++d) {
    double x = (p[d] - spec.origin[d]) / spec.h - 0.5;
    x = std::clamp(x, 0.0, double(spec.shape[d] - 1));
    int i = std::min(int(std::floor(x)), spec.shape[d] - 2);
    base[d] = i;
    w[d] = x - i;
  }
  double acc = 0.0;
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    Index3 idx = base;
    double weight = 1.0;
    for (int d = 0; d < dim; ++d) {
      int bit = (c >> d) & 1;
      idx[d] += bit;
      weight *= bit ? w[d] : 1.0 - w[d];
    }
    acc += weight * values[spec.index(idx[0], idx[1], idx[2])];
  }
  return acc;
}

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  if (!a.spec.same_as(b.spec)) throw GridError("field grids differ");
  ScalarField r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  if (!a.spec.same_as(b.spec)) throw GridError("field grids differ");
  ScalarField r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

ScalarField operator*(double s, const ScalarField& a) {
  ScalarField r = a;
  for (double& v : r.values) v *= s;
  return r;
}

double sup_distance(const ScalarField& a, const ScalarField& b) {
  if (!a.spec.same_as(b.spec)) throw GridError("field grids differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Masks

std::size_t Mask::count() const {
  return std::size_t(std::count(flags.begin(), flags.end(), std::uint8_t(1)));
}

Mask operator|(const Mask& a, const Mask& b) {
  Mask r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.flags[i] = a.flags[i] | b.flags[i];
  return r;
}

Mask operator&(const Mask& a, const Mask& b) {
  Mask r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.flags[i] = a.flags[i] & b.flags[i];
  return r;
}

Mask operator~(const Mask& a) {
  Mask r = a;
  for (auto& f : r.flags) f = f ? 0 : 1;
  return r;
}

Mask dilate(const Mask& m, int cells) {
  Mask cur = m;
  for (int it = 0; it < cells; ++it) {
    Mask next = cur;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (!cur[i]) continue;
      for_each_neighbor(cur.spec, i, [&](std::size_t j) { next.flags[j] = 1; });
    }
    cur = std::move(next);
  }
  return cur;
}

Mask erode(const Mask& m, int cells) {
  Mask cur = m;
  for (int it = 0; it < cells; ++it) {
    Mask next = cur;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (!cur[i]) continue;
      if (cur.spec.boundary_distance(i) == 0) {
        next.flags[i] = 0;
        continue;
      }
      bool keep = true;
      for_each_neighbor(cur.spec, i, [&](std::size_t j) { keep = keep && cur[j]; });
      next.flags[i] = keep ? 1 : 0;
    }
    cur = std::move(next);
  }
  return cur;
}

Mask outer_layer(const Mask& m) { return dilate(m, 1) & ~m; }

Mask inner_layer(const Mask& m) { return m & ~erode(m, 1); }

std::size_t symmetric_difference(const Mask& a, const Mask& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += (a.flags[i] != b.flags[i]);
  return n;
}

bool subset_up_to(const Mask& a, const Mask& b, int layers) {
  const Mask allowed = layers > 0 ? dilate(b, layers) : b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !allowed[i]) return false;
  }
  return true;
}

std::vector<int> components(const Mask& m, int* count) {
  std::vector<int> label(m.size(), 0);
  int next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (!m[s] || label[s]) continue;
    ++next;
    label[s] = next;
    queue.push_back(s);
    while (!queue.empty()) {
      std::size_t i = queue.front();
      queue.pop_front();
      for_each_neighbor(m.spec, i, [&](std::size_t j) {
        if (m[j] && !label[j]) {
          label[j] = next;
          queue.push_back(j);
        }
      });
    }
  }
  if (count) *count = next;
  return label;
}

Mask component_mask(const std::vector<int>& labels, const GridSpec& spec, int label) {
  Mask r(spec);
  for (std::size_t i = 0; i < labels.size(); ++i) r.flags[i] = labels[i] == label;
  return r;
}

Mask ball_mask(const GridSpec& spec, const Point& center, double radius) {
  Mask r(spec);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.flags[i] = distance(spec.center(i), center, spec.dim) < radius;
  }
  return r;
}

Mask annulus_mask(const GridSpec& spec, const Point& center, double inner, double outer) {
  Mask r(spec);
  for (std::size_t i = 0; i < r.size(); ++i) {
    double d = distance(spec.center(i), center, spec.dim);
    r.flags[i] = d > inner && d < outer;
  }
  return r;
}

double mask_volume(const Mask& m) { return double(m.count()) * m.spec.cell_volume(); }

// ---------------------------------------------------------------------------
// Measures

double Measure::total_mass() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.mass;
  if (density) s += density->integral();
  for (const auto& sh : shells) s += sh.density * radial::sphere_area(density ? density->spec.dim : 3, sh.radius);
  return s;
}

bool Measure::empty() const {
  if (!atoms.empty() || !shells.empty()) return false;
  if (!density) return true;
  return std::all_of(density->values.begin(), density->values.end(),
                     [](double v) { return v == 0.0; });
}

std::pair<Point, Point> Measure::bounding_box(int dim) const {
  Point lo{1e300, 1e300, 1e300};
  Point hi{-1e300, -1e300, -1e300};
  auto grow = [&](const Point& p, double r) {
    for (int d = 0; d < dim; ++d) {
      lo[d] = std::min(lo[d], p[d] - r);
      hi[d] = std::max(hi[d], p[d] + r);
    }
  };
  for (const auto& a : atoms) grow(a.center, 0.0);
  for (const auto& s : shells) grow(s.center, s.radius);
  if (density) {
    for (std::size_t i = 0; i < density->size(); ++i) {
      if ((*density)[i] != 0.0) grow(density->spec.center(i), 0.5 * density->spec.h);
    }
  }
  if (lo[0] > hi[0]) throw GridError("measure has empty support");
  for (int d = dim; d < 3; ++d) lo[d] = hi[d] = 0.0;
  return {lo, hi};
}

double Measure::support_radius(const Point& c, int dim) const {
  double r = 0.0;
  for (const auto& a : atoms) r = std::max(r, distance(a.center, c, dim));
  for (const auto& s : shells) r = std::max(r, distance(s.center, c, dim) + s.radius);
  if (density) {
    const double half_diag = 0.5 * density->spec.h * std::sqrt(double(dim));
    for (std::size_t i = 0; i < density->size(); ++i) {
      if ((*density)[i] != 0.0) {
        r = std::max(r, distance(density->spec.center(i), c, dim) + half_diag);
      }
    }
  }
  return r;
}

void Measure::validate(int dim) const {
  for (const auto& a : atoms) {
    if (!(a.mass > 0.0) || !std::isfinite(a.mass)) throw GridError("atom masses must be positive");
  }
  for (const auto& s : shells) {
    if (!(s.radius > 0.0) || !(s.density > 0.0)) {
      throw GridError("shells need positive radius and surface density");
    }
  }
  if (density) {
    if (density->spec.dim != dim) throw GridError("density grid dimension mismatch");
    for (double v : density->values) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw GridError("densities must be finite and >= 0");
    }
  }
}

Measure& Measure::operator+=(const Measure& o) {
  atoms.insert(atoms.end(), o.atoms.begin(), o.atoms.end());
  shells.insert(shells.end(), o.shells.begin(), o.shells.end());
  if (o.density) {
    if (!density) {
      density = o.density;
    } else if (density->spec.same_as(o.density->spec)) {
      *density = *density + *o.density;
    } else {
      ScalarField moved = rasterize(Measure{{}, o.density, {}}, density->spec);
      *density = *density + moved;
    }
  }
  return *this;
}

Measure operator+(Measure a, const Measure& b) {
  a += b;
  return a;
}

Measure operator*(double s, Measure a) {
  if (!(s >= 0.0)) throw GridError("measures may only be scaled by s >= 0");
  for (auto& at : a.atoms) at.mass *= s;
  for (auto& sh : a.shells) sh.density *= s;
  if (a.density) *a.density = s * *a.density;
  return a;
}

Measure ball_density(const GridSpec& spec, const Point& center, double radius, double density) {
  ScalarField f(spec);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = density * cell_fraction_in_ball(spec, spec.center(i), center, radius, 16);
  }
  Measure m;
  m.density = std::move(f);
  return m;
}

Measure mask_density(const Mask& mask, double value) {
  ScalarField f(mask.spec);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = mask[i] ? value : 0.0;
  Measure m;
  m.density = std::move(f);
  return m;
}

std::vector<SurfaceNode> sphere_nodes(int dim, const Point& center, double radius, int count) {
  std::vector<SurfaceNode> nodes;
  nodes.reserve(count);
  const double w = radial::sphere_area(dim, radius) / count;
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      double th = 2.0 * kPi * (i + 0.5) / count;
      nodes.push_back({{center[0] + radius * std::cos(th), center[1] + radius * std::sin(th), 0.0}, w});
    }
    return nodes;
  }
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / count;
    double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    nodes.push_back({{center[0] + radius * rr * std::cos(phi), center[1] + radius * rr * std::sin(phi),
                      center[2] + radius * z},
                     w});
  }
  return nodes;
}

namespace {

int shell_node_count(const GridSpec& spec, double radius) {
  const double area = radial::sphere_area(spec.dim, radius);
  const double per_cell = std::pow(spec.h, spec.dim - 1);
  return std::max(256, int(16.0 * area / per_cell));
}

}  // namespace

ScalarField rasterize(const Measure& mu, const GridSpec& spec) {
  ScalarField out(spec);
  const double inv_vol = 1.0 / spec.cell_volume();
  auto deposit = [&](const Point& p, double mass) {
    if (!spec.contains(p)) throw GridError("measure support leaves the grid");
    Index3 c = spec.locate(p);
    out[spec.index(c[0], c[1], c[2])] += mass * inv_vol;
  };
  for (const auto& a : mu.atoms) deposit(a.center, a.mass);
  for (const auto& s : mu.shells) {
    for (const auto& n : sphere_nodes(spec.dim, s.center, s.radius, shell_node_count(spec, s.radius))) {
      deposit(n.point, n.weight * s.density);
    }
  }
  if (mu.density) {
    const ScalarField& d = *mu.density;
    if (d.spec.same_as(spec)) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
    } else {
      const double vol = d.spec.cell_volume();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] != 0.0) deposit(d.spec.center(i), d[i] * vol);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

std::vector<double> convolve(const GridSpec& spec, const std::vector<double>& in,
                             const std::vector<double>& kernel, const Index3& half) {
  const int dim = spec.dim;
  Index3 kshape{1, 1, 1};
  for (int d = 0; d < dim; ++d) kshape[d] = 2 * half[d] + 1;
  const std::size_t ksize = std::size_t(kshape[0]) * kshape[1] * kshape[2];
  if (kernel.size() != ksize) throw GridError("convolution kernel has the wrong size");

  std::size_t nnz = 0;
  for (double v : in) nnz += (v != 0.0);
  std::size_t knnz = 0;
  for (double v : kernel) knnz += (v != 0.0);

  std::vector<double> out(in.size(), 0.0);
  if (double(nnz) * double(knnz) < 2e7) {
    // direct scatter from the nonzero inputs
    for (std::size_t j = 0; j < in.size(); ++j) {
      if (in[j] == 0.0) continue;
      const Index3 c = spec.coords(j);
      for (int a = -half[0]; a <= half[0]; ++a) {
        int i0 = c[0] + a;
        if (i0 < 0 || i0 >= spec.shape[0]) continue;
        for (int b = -half[1]; b <= half[1]; ++b) {
          int i1 = c[1] + b;
          if (i1 < 0 || i1 >= spec.shape[1]) continue;
          for (int e = -half[2]; e <= half[2]; ++e) {
            int i2 = c[2] + e;
            if (i2 < 0 || i2 >= spec.shape[2]) continue;
            std::size_t kidx =
                (std::size_t(a + half[0]) * kshape[1] + std::size_t(b + half[1])) * kshape[2] +
                std::size_t(e + half[2]);
            double kv = kernel[kidx];
            if (kv != 0.0) out[spec.index(i0, i1, i2)] += kv * in[j];
          }
        }
      }
    }
    return out;
  }

  Index3 pad{1, 1, 1};
  for (int d = 0; d < dim; ++d) pad[d] = nice_fft_size(spec.shape[d] + half[d]);
  const std::size_t real_size = std::size_t(pad[0]) * pad[1] * pad[2];
  const int last = pad[dim - 1];
  const std::size_t cplx_size = real_size / last * (last / 2 + 1);

  double* a = fftw_alloc_real(real_size);
  double* k = fftw_alloc_real(real_size);
  fftw_complex* fa = fftw_alloc_complex(cplx_size);
  fftw_complex* fk = fftw_alloc_complex(cplx_size);
  std::fill(a, a + real_size, 0.0);
  std::fill(k, k + real_size, 0.0);

  auto pidx = [&](int i0, int i1, int i2) {
    return dim == 2 ? std::size_t(i0) * pad[1] + std::size_t(i1)
                    : (std::size_t(i0) * pad[1] + std::size_t(i1)) * pad[2] + std::size_t(i2);
  };
  for (std::size_t j = 0; j < in.size(); ++j) {
    const Index3 c = spec.coords(j);
    a[pidx(c[0], c[1], c[2])] = in[j];
  }
  for (int x = -half[0]; x <= half[0]; ++x) {
    for (int y = -half[1]; y <= half[1]; ++y) {
      for (int z = -half[2]; z <= half[2]; ++z) {
        std::size_t kidx =
            (std::size_t(x + half[0]) * kshape[1] + std::size_t(y + half[1])) * kshape[2] +
            std::size_t(z + half[2]);
        int w0 = (x % pad[0] + pad[0]) % pad[0];
        int w1 = (y % pad[1] + pad[1]) % pad[1];
        int w2 = dim == 3 ? (z % pad[2] + pad[2]) % pad[2] : 0;
        k[pidx(w0, w1, w2)] = kernel[kidx];
      }
    }
  }

  fftw_plan pa, pk, pinv;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    pa = fftw_plan_dft_r2c(dim, pad.data(), a, fa, FFTW_ESTIMATE);
    pk = fftw_plan_dft_r2c(dim, pad.data(), k, fk, FFTW_ESTIMATE);
    pinv = fftw_plan_dft_c2r(dim, pad.data(), fa, a, FFTW_ESTIMATE);
  }
  fftw_execute(pa);
  fftw_execute(pk);
  const double scale = 1.0 / double(real_size);
  for (std::size_t i = 0; i < cplx_size; ++i) {
    std::complex<double> u(fa[i][0], fa[i][1]);
    std::complex<double> v(fk[i][0], fk[i][1]);
    std::complex<double> w = u * v * scale;
    fa[i][0] = w.real();
    fa[i][1] = w.imag();
  }
  fftw_execute(pinv);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const Index3 c = spec.coords(j);
    out[j] = a[pidx(c[0], c[1], c[2])];
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pk);
    fftw_destroy_plan(pinv);
  }
  fftw_free(a);
  fftw_free(k);
  fftw_free(fa);
  fftw_free(fk);
  return out;
}

// ---------------------------------------------------------------------------
// Potentials

Mask singular_cells(const Measure& mu, const GridSpec& target) {
  Mask m(target);
  const double a = target.equal_volume_radius();
  for (const auto& at : mu.atoms) {
    if (!target.contains(at.center)) continue;
    Index3 c = target.locate(at.center);
    // the equal-volume ball lies inside the cell's neighbourhood
    for (int x = -1; x <= 1; ++x) {
      for (int y = -1; y <= 1; ++y) {
        for (int z = (target.dim == 3 ? -1 : 0); z <= (target.dim == 3 ? 1 : 0); ++z) {
          Index3 n{c[0] + x, c[1] + y, c[2] + z};
          bool ok = true;
          for (int d = 0; d < target.dim; ++d) ok = ok && n[d] >= 0 && n[d] < target.shape[d];
          if (!ok) continue;
          std::size_t i = target.index(n[0], n[1], n[2]);
          if (distance(target.center(i), at.center, target.dim) < a) m.set(i);
        }
      }
    }
  }
  return m;
}

namespace {

void add_atoms_and_shells(const Measure& mu, ScalarField& out, const Medium& medium) {
  const GridSpec& s = out.spec;
  const double a = s.equal_volume_radius();
  const long long n = (long long)out.size();
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < n; ++ii) {
    const std::size_t i = std::size_t(ii);
    const Point x = s.center(i);
    double acc = 0.0;
    for (const auto& at : mu.atoms) acc += at.mass * cell_kernel(medium, a, distance(x, at.center, s.dim));
    for (const auto& sh : mu.shells) {
      acc += sh.density * radial::potential_sphere(medium, sh.radius, distance(x, sh.center, s.dim));
    }
    out[i] += acc;
  }
}

void add_density_direct(const ScalarField& dens, ScalarField& out, const Medium& medium) {
  const GridSpec& src = dens.spec;
  const double a = src.equal_volume_radius();
  const double vol = src.cell_volume();
  std::vector<std::pair<Point, double>> sources;
  for (std::size_t j = 0; j < dens.size(); ++j) {
    if (dens[j] != 0.0) sources.emplace_back(src.center(j), dens[j] * vol);
  }
  const GridSpec& s = out.spec;
  const long long n = (long long)out.size();
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < n; ++ii) {
    const std::size_t i = std::size_t(ii);
    const Point x = s.center(i);
    double acc = 0.0;
    for (const auto& [y, m] : sources) acc += m * cell_kernel(medium, a, distance(x, y, s.dim));
    out[i] += acc;
  }
}

void add_density_fft(const ScalarField& dens, ScalarField& out, const Medium& medium) {
  const GridSpec& s = out.spec;
  const double a = s.equal_volume_radius();
  Index3 half{0, 0, 0};
  Index3 kshape{1, 1, 1};
  for (int d = 0; d < s.dim; ++d) {
    half[d] = s.shape[d] - 1;
    kshape[d] = 2 * half[d] + 1;
  }
  std::vector<double> kernel(std::size_t(kshape[0]) * kshape[1] * kshape[2]);
  const long long nk = (long long)kernel.size();
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < nk; ++ii) {
    std::size_t idx = std::size_t(ii);
    int z = int(idx % kshape[2]) - half[2];
    idx /= kshape[2];
    int y = int(idx % kshape[1]) - half[1];
    int x = int(idx / kshape[1]) - half[0];
    double d = s.h * std::sqrt(double(x) * x + double(y) * y + double(z) * z);
    kernel[std::size_t(ii)] = cell_kernel(medium, a, d);
  }
  std::vector<double> masses(dens.values);
  const double vol = s.cell_volume();
  for (double& v : masses) v *= vol;
  std::vector<double> conv = convolve(s, masses, kernel, half);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += conv[i];
}

}  // namespace

ScalarField potential(const Measure& mu, const GridSpec& target, const Medium& medium,
                      PotentialMethod method) {
  target.validate();
  mu.validate(target.dim);
  ScalarField out(target);
  add_atoms_and_shells(mu, out, medium);
  if (mu.density) {
    const ScalarField& d = *mu.density;
    const bool same = d.spec.same_as(target);
    std::size_t nnz = 0;
    for (double v : d.values) nnz += (v != 0.0);
    bool use_fft = same && (method == PotentialMethod::Fft ||
                            (method == PotentialMethod::Auto && double(nnz) * double(target.size()) > 4e6));
    if (method == PotentialMethod::Fft && !same) {
      throw GridError("fast convolution needs the density on the target grid");
    }
    if (use_fft) {
      add_density_fft(d, out, medium);
    } else {
      add_density_direct(d, out, medium);
    }
  }
  return out;
}

double potential_at(const Measure& mu, const Point& x, const Medium& medium) {
  double acc = 0.0;
  const int dim = mu.density ? mu.density->spec.dim : 3;
  (void)dim;
  for (const auto& at : mu.atoms) {
    double d = distance(x, at.center, 3);
    if (d < 1e-14) return std::numeric_limits<double>::infinity();
    acc += at.mass * radial::psi(medium, d);
  }
  for (const auto& sh : mu.shells) {
    acc += sh.density * radial::potential_sphere(medium, sh.radius, distance(x, sh.center, 3));
  }
  if (mu.density) {
    const ScalarField& dens = *mu.density;
    const GridSpec& s = dens.spec;
    const double a = s.equal_volume_radius();
    const double vol = s.cell_volume();
    for (std::size_t j = 0; j < dens.size(); ++j) {
      if (dens[j] == 0.0) continue;
      acc += dens[j] * vol * cell_kernel(medium, a, distance(x, s.center(j), s.dim));
    }
  }
  return acc;
}

ScalarField helmholtz_apply(const ScalarField& f, const Medium& medium) {
  const GridSpec& s = f.spec;
  ScalarField out(s);
  const double inv_h2 = 1.0 / (s.h * s.h);
  const double diag = 2.0 * s.dim * inv_h2 - medium.k() * medium.k();
  const auto st = s.strides();
  const long long n = (long long)f.size();
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < n; ++ii) {
    const std::size_t i = std::size_t(ii);
    const Index3 c = s.coords(i);
    double nb = 0.0;
    for (int d = 0; d < s.dim; ++d) {
      if (c[d] > 0) nb += f[i - st[d]];
      if (c[d] + 1 < s.shape[d]) nb += f[i + st[d]];
    }
    out[i] = diag * f[i] - inv_h2 * nb;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mollification and the existence test

Measure mollify(const Measure& mu, double delta, const GridSpec& spec, const Medium& medium) {
  const double rk = radial::r_k(medium);
  if (!(delta > 0.0) || !(delta < 3.0 * rk)) {
    throw GridError("mollification radius must satisfy 0 < delta < 3 R_k (R_k = " +
                    std::to_string(rk) + ")");
  }
  const double r = delta / 3.0;
  Index3 half{0, 0, 0};
  Index3 kshape{1, 1, 1};
  const int reach = int(std::ceil(r / spec.h + 0.5));
  for (int d = 0; d < spec.dim; ++d) {
    half[d] = reach;
    kshape[d] = 2 * reach + 1;
  }
  GridSpec kspec;
  kspec.dim = spec.dim;
  kspec.h = spec.h;
  kspec.shape = kshape;
  for (int d = 0; d < spec.dim; ++d) kspec.origin[d] = -(reach + 0.5) * spec.h;
  std::vector<double> kernel(kspec.size());
  const double vol = spec.cell_volume();
  const Point zero{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    kernel[i] = vol * cell_fraction_in_ball(kspec, kspec.center(i), zero, r, 8);
  }
  // subsampling misjudges a ball only a few cells wide; pin its mass to the exact volume
  double ksum = 0.0;
  for (double w : kernel) ksum += w;
  const double exact = spec.dim == 2 ? std::numbers::pi * r * r : 4.0 / 3.0 * std::numbers::pi * r * r * r;
  for (double& w : kernel) w *= exact / ksum;
  // atoms go in with linear weights so the deposited centroid stays on the atom
  Measure rest = mu;
  rest.atoms.clear();
  std::vector<double> v = rasterize(rest, spec).values;
  const double inv_vol = 1.0 / vol;
  for (const auto& a : mu.atoms) {
    if (!spec.contains(a.center)) throw GridError("measure support leaves the grid");
    Index3 lo{0, 0, 0};
    Point frac{0.0, 0.0, 0.0};
    for (int d = 0; d < spec.dim; ++d) {
      const double x = (a.center[d] - spec.origin[d]) / spec.h - 0.5;
      lo[d] = std::clamp(int(std::floor(x)), 0, spec.shape[d] - 2);
      frac[d] = std::clamp(x - lo[d], 0.0, 1.0);
    }
    const int corners = 1 << spec.dim;
    for (int c = 0; c < corners; ++c) {
      Index3 at = lo;
      double w = a.mass * inv_vol;
      for (int d = 0; d < spec.dim; ++d) {
        const int bit = (c >> d) & 1;
        at[d] += bit;
        w *= bit ? frac[d] : 1.0 - frac[d];
      }
      v[spec.index(at[0], at[1], at[2])] += w;
    }
  }
  for (int pass = 0; pass < 3; ++pass) v = convolve(spec, v, kernel, half);
  const double norm = std::pow(radial::c_k(medium, r), -3.0);
  Measure out;
  ScalarField dens(spec);
  for (std::size_t i = 0; i < dens.size(); ++i) dens[i] = std::max(0.0, norm * v[i]);
  out.density = std::move(dens);
  return out;
}

double max_ball_mass(const Measure& mu, double r, const GridSpec& spec) {
  Measure rest;
  rest.density = mu.density;
  rest.shells = mu.shells;
  ScalarField cells = rasterize(rest, spec);
  const double vol = spec.cell_volume();
  for (double& v : cells.values) v *= vol;

  const int reach = int(std::ceil(r / spec.h));
  Index3 half{0, 0, 0};
  Index3 kshape{1, 1, 1};
  for (int d = 0; d < spec.dim; ++d) {
    half[d] = reach;
    kshape[d] = 2 * reach + 1;
  }
  std::vector<double> ind(std::size_t(kshape[0]) * kshape[1] * kshape[2], 0.0);
  for (int x = -half[0]; x <= half[0]; ++x) {
    for (int y = -half[1]; y <= half[1]; ++y) {
      for (int z = -half[2]; z <= half[2]; ++z) {
        double d = spec.h * std::sqrt(double(x) * x + double(y) * y + double(z) * z);
        std::size_t idx = (std::size_t(x + half[0]) * kshape[1] + std::size_t(y + half[1])) * kshape[2] +
                          std::size_t(z + half[2]);
        ind[idx] = d < r ? 1.0 : 0.0;
      }
    }
  }
  std::vector<double> sums = convolve(spec, cells.values, ind, half);

  auto atom_mass_near = [&](const Point& x) {
    double s = 0.0;
    for (const auto& a : mu.atoms) {
      if (distance(x, a.center, spec.dim) < r) s += a.mass;
    }
    return s;
  };
  double best = 0.0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    best = std::max(best, sums[i] + (mu.atoms.empty() ? 0.0 : atom_mass_near(spec.center(i))));
  }
  for (const auto& a : mu.atoms) {
    // density part at an off-center point: cells whose centers fall in the ball
    double s = atom_mass_near(a.center);
    const Index3 c = spec.locate(a.center);
    for (int x = -reach - 1; x <= reach + 1; ++x) {
      for (int y = -reach - 1; y <= reach + 1; ++y) {
        int zr = spec.dim == 3 ? reach + 1 : 0;
        for (int z = -zr; z <= zr; ++z) {
          Index3 n{c[0] + x, c[1] + y, c[2] + z};
          bool ok = true;
          for (int d = 0; d < spec.dim; ++d) ok = ok && n[d] >= 0 && n[d] < spec.shape[d];
          if (!ok) continue;
          std::size_t j = spec.index(n[0], n[1], n[2]);
          if (cells[j] != 0.0 && distance(spec.center(j), a.center, spec.dim) < r) s += cells[j];
        }
      }
    }
    best = std::max(best, s);
  }
  return best;
}

bool existence_precheck(const Measure& mu, double r, const Medium& medium, const GridSpec& spec) {
  const double rk = radial::r_k(medium);
  if (!(r > 0.0) || r > rk * (1.0 + 1e-12)) {
    throw GridError("existence precheck radius must lie in (0, R_k]");
  }
  return max_ball_mass(mu, r, spec) <= radial::c_k(medium, std::min(r, rk)) * (1.0 + 1e-12);
}

}  // namespace hb
