#pragma once

// Closed-form radial quantities for the operator Delta + k^2: the fundamental
// solution, mean-value kernels, potentials of spheres and balls, and the
// explicit sweeps of point masses, balls and spheres. Every kernel has a k = 0
// branch that reduces to the classical Newtonian/logarithmic case.

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "hb/specfun.hpp"

namespace hb {

/// Ambient dimension and wavenumber shared by all formulas.
class Medium {
 public:
  Medium(int dim, double k);

  int dim() const { return dim_; }
  double k() const { return k_; }
  /// alpha = (N-2)/2
  double alpha() const { return 0.5 * (dim_ - 2); }
  specfun::Order alpha_order() const;
  specfun::Order half_dim_order() const;
  bool classical() const { return k_ == 0.0; }

  std::string describe() const;

 private:
  int dim_;
  double k_;
};

}  // namespace hb

namespace hb::radial {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Fundamental solution of -(Delta + k^2) as a function of |x|.
double psi(const Medium& m, double r);

double c_k(const Medium& m, double r);
double d_k(const Medium& m, double r);

/// Volume and surface area of the unit-radius ball in N dimensions, scaled to r.
double ball_volume(int dim, double r);
double sphere_area(int dim, double r);

/// Critical radius j_{alpha,1}/k; kUnbounded when k = 0.
double r_k(const Medium& m);

/// Potential of unit surface density on the sphere of radius t, at distance r
/// from its center.
double potential_sphere(const Medium& m, double t, double r);

/// Potential of unit volume density on the ball of radius t.
double potential_ball(const Medium& m, double t, double r);

/// Integral of psi over the ball of radius a centered at distance d < a from
/// the evaluation point, divided by the ball's volume (the smeared kernel).
double smeared_psi(const Medium& m, double a, double d);

/// Radius r in (0, R_k] with c_k(r) = c, or nullopt if c > c_k(R_k).
std::optional<double> point_mass_radius(const Medium& m, double c);

/// Radius r in (R, R_k] with c_k(r) = c * c_k(R), or nullopt when infeasible.
std::optional<double> ball_sweep_radius(const Medium& m, double c, double R);

double f_T(const Medium& m, double T, double xi);
double f_T_derivative(const Medium& m, double T, double xi);
double w_xi(const Medium& m, double xi, double r);
double w_xi_derivative(const Medium& m, double xi, double r);

/// Neighbours of T in the list {0, zeros of f_T'}; the upper one is
/// kUnbounded if no zero is found below the search limit.
struct ShellBracket {
  double lower;
  double upper;
};
ShellBracket shell_bracket(const Medium& m, double T);

enum class SweepKind { Ball, Annulus, Infeasible };

struct RadialSweep {
  SweepKind kind = SweepKind::Infeasible;
  double inner = 0.0;
  double outer = 0.0;
  /// Surface density of the sphere measure whose sweep is the returned set.
  double mass_coefficient = 0.0;
  char applied_case = '?';  // 'a'..'d'
};

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sweep of a multiple of surface measure on the sphere of radius T at level t.
RadialSweep sphere_sweep(const Medium& m, double T, double t);

}  // namespace hb::radial
