#include "hb/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace hb::linalg {

namespace {

constexpr double kMicRelax = 0.95;

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Modified incomplete Cholesky with zero fill-in, relaxed.
class Preconditioner {
 public:
  explicit Preconditioner(const Operator& a) : a_(a), d_(a.size()) {
    const double off = a.off;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double di = a.diag[i];
      for (std::int32_t j : a.set.nbr[i]) {
        if (j < 0 || std::size_t(j) >= i) continue;
        di -= off * off / d_[j];
        // fill that would connect i with the other upper neighbours of j
        double upper = 0.0;
        for (std::int32_t l : a.set.nbr[j]) {
          if (l > j && std::size_t(l) != i) upper += off;
        }
        di -= kMicRelax * off * upper / d_[j];
      }
      if (!(di > 1e-6 * a.diag[i])) di = a.diag[i];
      d_[i] = di;
    }
  }

  void solve(const std::vector<double>& r, std::vector<double>& z) const {
    const std::size_t n = d_.size();
    const double off = a_.off;
    z.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = r[i];
      for (std::int32_t j : a_.set.nbr[i]) {
        if (j >= 0 && std::size_t(j) < i) s -= off * z[j];
      }
      z[i] = s / d_[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = 0.0;
      for (std::int32_t j : a_.set.nbr[ii]) {
        if (j >= 0 && std::size_t(j) > ii) s += off * z[j];
      }
      z[ii] -= s / d_[ii];
    }
  }

 private:
  const Operator& a_;
  std::vector<double> d_;
};

}  // namespace

CellSet make_cell_set(const Mask& m) {
  CellSet s;
  s.spec = m.spec;
  s.slot.assign(m.size(), -1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) {
      s.slot[i] = std::int32_t(s.cells.size());
      s.cells.push_back(i);
    }
  }
  const auto st = m.spec.strides();
  s.nbr.resize(s.cells.size());
  for (std::size_t c = 0; c < s.cells.size(); ++c) {
    const std::size_t i = s.cells[c];
    const Index3 ix = m.spec.coords(i);
    auto& nb = s.nbr[c];
    nb.fill(-1);
    for (int d = 0; d < m.spec.dim; ++d) {
      if (ix[d] > 0) nb[2 * d] = s.slot[i - st[d]];
      if (ix[d] + 1 < m.spec.shape[d]) nb[2 * d + 1] = s.slot[i + st[d]];
    }
  }
  return s;
}

void Operator::apply(const std::vector<double>& x, std::vector<double>& y) const {
  const std::size_t n = size();
  y.resize(n);
  const long long nn = (long long)n;
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < nn; ++ii) {
    const std::size_t i = std::size_t(ii);
    double s = 0.0;
    for (std::int32_t j : set.nbr[i]) {
      if (j >= 0) s += x[j];
    }
    y[i] = diag[i] * x[i] + off * s;
  }
}

Operator helmholtz_operator(const Mask& m, double shift) {
  Operator a;
  a.set = make_cell_set(m);
  const double inv_h2 = 1.0 / (m.spec.h * m.spec.h);
  a.off = -inv_h2;
  a.diag.assign(a.set.size(), 2.0 * m.spec.dim * inv_h2 - shift);
  return a;
}

CgStatus pcg(const Operator& a, const std::vector<double>& b, std::vector<double>& x, double tol,
             int max_iter) {
  const std::size_t n = a.size();
  CgStatus st;
  x.resize(n, 0.0);
  if (n == 0) {
    st.converged = true;
    return st;
  }
  Preconditioner m(a);
  std::vector<double> r(n), z(n), p(n), ap(n);

  auto true_residual = [&]() {
    a.apply(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    return max_abs(r);
  };

  double res = true_residual();
  int restarts = 0;
  while (st.iterations < max_iter) {
    if (res <= tol) {
      st.converged = true;
      break;
    }
    m.solve(r, z);
    p = z;
    double rz = dot(r, z);
    bool restart = false;
    while (st.iterations < max_iter) {
      a.apply(p, ap);
      const double pap = dot(p, ap);
      ++st.iterations;
      if (!(pap > 0.0)) {
        st.breakdown = true;
        st.residual = res;
        return st;
      }
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      if (max_abs(r) <= tol) {
        restart = true;
        break;
      }
      m.solve(r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    const double prev = res;
    res = true_residual();
    if (!restart) break;
    // recursive residual drifted from the true one: restart a bounded number of times
    if (res > tol && (++restarts > 8 || res >= prev)) break;
  }
  st.residual = res;
  st.converged = res <= tol;
  return st;
}

ScalarField scatter(const CellSet& s, const std::vector<double>& x) {
  ScalarField f(s.spec);
  for (std::size_t c = 0; c < s.size(); ++c) f[s.cells[c]] = x[c];
  return f;
}

std::vector<double> gather(const CellSet& s, const ScalarField& f) {
  std::vector<double> x(s.size());
  for (std::size_t c = 0; c < s.size(); ++c) x[c] = f[s.cells[c]];
  return x;
}

}  // namespace hb::linalg
