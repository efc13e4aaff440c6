#pragma once

// Finite-mode divergence-free vector fields on the 2-torus [0, 2 pi)^2 and the
// reduced dynamics of the truncated volume-preserving diffeomorphism group:
// Navier-Stokes for the L2 metric and viscous Camassa-Holm for the H1 metric.
//
// A field is u = sum_k (a_k A_k + b_k B_k) over one representative k of each
// {k, -k} class with |k| = |k1| + |k2| <= m, where
//   A_k = (k2 cos(k.theta), -k1 cos(k.theta)),  B_k = (k2 sin(k.theta), -k1 sin(k.theta)).
// Nonlinear terms use exact convolution over the truncated modes.

#include <Eigen/Dense>

#include <array>
#include <cstdlib>
#include <iosfwd>
#include <string>
#include <vector>

namespace stochep::torus {

struct Wavevector
{
  int k1 = 0;
  int k2 = 0;

  int l1() const { return std::abs(k1) + std::abs(k2); }
  double norm_sq() const { return static_cast<double>(k1 * k1 + k2 * k2); }
  friend bool operator==(const Wavevector&, const Wavevector&) = default;
};

/// Representative of the class {k, -k}: first nonzero component positive.
Wavevector canonical(Wavevector k);

class ModeSet
{
 public:
  /// All representatives {k1 >= 1} u {k1 = 0, k2 >= 1} with |k| <= m and
  /// amplitude lambda[|k|] (lambda[0] is ignored).
  static ModeSet truncated(int m, std::vector<double> lambda);

  /// lambda(|k|) = |k|^-gamma.
  static ModeSet power_law(int m, double gamma);

  /// Arbitrary representative list, not checked for closure. Used to build
  /// anisotropic negative controls.
  static ModeSet custom(int m, std::vector<Wavevector> reps, std::vector<double> lambda);

  int m() const { return m_; }
  const std::vector<Wavevector>& reps() const { return reps_; }
  std::size_t size() const { return reps_.size(); }
  double lambda(const Wavevector& k) const { return lambda_[static_cast<std::size_t>(k.l1())]; }
  const std::vector<double>& lambda_schedule() const { return lambda_; }

  /// Index of the representative of k, or -1.
  int index_of(Wavevector k) const;

  /// Closed (modulo sign) under (k1,k2) -> (k2,k1) and (k1,k2) -> (-k1,k2).
  bool is_closed() const;

  /// Same representatives with lambda scaled so that nu_effective equals nu.
  ModeSet with_viscosity(double nu) const;

 private:
  ModeSet(int m, std::vector<Wavevector> reps, std::vector<double> lambda);

  int m_ = 0;
  std::vector<Wavevector> reps_;
  std::vector<double> lambda_;
};

/// nu_eff = sum over representatives of lambda(|k|)^2 k1^2; the constant for
/// which sum_k (A_k A_k f + B_k B_k f) = nu_eff Laplacian(f).
double nu_effective(const ModeSet& modes);

struct IdentityReport
{
  Wavevector test_mode;
  /// Multipliers of f = exp(i q.theta) on each side.
  double lhs = 0.0;
  double rhs = 0.0;
  double error = 0.0;
};

/// Evaluates sum_k (A_k A_k f + B_k B_k f) = sum_k lambda^2 D_k^2 f with
/// D_k = k2 d1 - k1 d2 against nu_eff Laplacian(f) on f = exp(i q.theta).
IdentityReport laplacian_identity_check(const ModeSet& modes, Wavevector q);

/// Worst identity error over all test modes with |q| <= m.
double laplacian_identity_defect(const ModeSet& modes);

/// nu fitted from the operator identity on f = exp(i theta_1).
double fitted_viscosity(const ModeSet& modes);

struct VelocityField
{
  std::vector<Wavevector> reps;
  Eigen::VectorXd a;
  Eigen::VectorXd b;

  static VelocityField zeros(const ModeSet& modes);
  std::size_t size() const { return reps.size(); }
  bool is_finite() const { return a.allFinite() && b.allFinite(); }

  /// Velocity at a physical point.
  Eigen::Vector2d operator()(double theta1, double theta2) const;
};

enum class Metric { kL2, kH1 };

std::string to_string(Metric metric);

/// <u, v> for the L2 or H1 metric (integrals over [0, 2 pi)^2).
double inner(const VelocityField& u, const VelocityField& v, Metric metric);
double energy(const VelocityField& u, Metric metric);

/// Throws std::invalid_argument when u carries a mode outside `modes`.
void require_within(const VelocityField& u, const ModeSet& modes);

/// u on every representative of `modes` (missing coefficients are zero).
VelocityField embed(const VelocityField& u, const ModeSet& modes);

/// K(u) = -(nu_eff / 2) Laplacian(u), coefficient-wise.
VelocityField k_operator_closed(const VelocityField& u, const ModeSet& modes);

/// K(u) from the defining pairing
///   <K(u), v> = -<u, 1/2 sum_k (nabla0_{ad_v A_k} A_k + nabla0_{A_k}(ad_v A_k) + same for B_k)>
/// with ad_v X = -[v, X] and nabla0 = Leray projection of the flat derivative,
/// evaluated on every basis field v by exact products and solved against
/// the (diagonal) gram matrix of `metric`.
VelocityField k_operator_pairing(const VelocityField& u, const ModeSet& modes, Metric metric);

/// Right-hand side of the K pairing for a single v (any field within `modes`).
double k_pairing(const VelocityField& u, const VelocityField& v, const ModeSet& modes, Metric metric);

/// ad*_u u = P(u . grad u), truncated to the modes listed in u (embed first
/// to obtain the full truncated operator).
VelocityField ad_star_l2(const VelocityField& u);

/// ad*_u u = (1 - Laplacian)^{-1} P(u . grad v + sum_j v_j grad u_j), v = u - Laplacian(u).
VelocityField ad_star_h1(const VelocityField& u);

VelocityField ad_star(const VelocityField& u, Metric metric);

/// du/dt = -ad*_u u - K(u), returned on every representative of `modes`.
VelocityField fluid_rhs(const VelocityField& u, const ModeSet& modes, Metric metric);

struct FluidTrajectory
{
  Metric metric = Metric::kL2;
  std::vector<double> times;
  std::vector<VelocityField> fields;
};

/// RK4 on du/dt = -ad*_u u - K(u) over [0, T]; records every `record_every` steps
/// and the final state.
FluidTrajectory integrate_fluid(const VelocityField& u0, const ModeSet& modes, Metric metric, double horizon,
                                double dt, std::size_t record_every = 1);

/// Long-format CSV: t,k1,k2,a,b,energy_L2,energy_H1.
void write_fluid_csv(std::ostream& os, const FluidTrajectory& traj);

}  // namespace stochep::torus
