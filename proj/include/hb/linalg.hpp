#pragma once

// Sparse symmetric operators on a subset of grid cells and a preconditioned
// conjugate-gradient solver for them.

#include <array>
#include <cstdint>
#include <vector>

#include "hb/grid.hpp"

namespace hb::linalg {

/// Compact numbering of the cells of a mask, in increasing linear order, with
/// a face-neighbour table (-1 for neighbours outside the set).
struct CellSet {
  GridSpec spec;
  std::vector<std::size_t> cells;
  std::vector<std::int32_t> slot;  // linear index -> compact id or -1
  std::vector<std::array<std::int32_t, 6>> nbr;

  std::size_t size() const { return cells.size(); }
};

CellSet make_cell_set(const Mask& m);

/// A = diag - (1/h^2) * (sum over in-set face neighbours).
struct Operator {
  CellSet set;
  std::vector<double> diag;
  double off = 0.0;  // off-diagonal entry, -1/h^2

  void apply(const std::vector<double>& x, std::vector<double>& y) const;
  std::size_t size() const { return set.size(); }
};

/// -(Delta_h + shift) on the cells of m with zero values outside m.
Operator helmholtz_operator(const Mask& m, double shift);

struct CgStatus {
  bool converged = false;
  bool breakdown = false;  // p.Ap <= 0: the operator is not positive definite
  int iterations = 0;
  double residual = 0.0;  // max-norm of the true residual at exit
};

/// Solves A x = b from the initial guess in x; stops when the max-norm of the
/// residual is below tol.
CgStatus pcg(const Operator& a, const std::vector<double>& b, std::vector<double>& x, double tol,
             int max_iter);

/// Scatters compact values onto the full grid (zero elsewhere) and back.
ScalarField scatter(const CellSet& s, const std::vector<double>& x);
std::vector<double> gather(const CellSet& s, const ScalarField& f);

}  // namespace hb::linalg
