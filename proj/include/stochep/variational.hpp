#pragma once

// Numerical check of the stochastic Euler-Poincare variational principle on
// SO(3): the reduced velocity of the perturbed process g_eps = g e_eps is
// deterministic, so the action J(eps) and its Gateaux derivative can be
// evaluated without sampling and compared to the Euler-Poincare pairing.

#include "stochep/algebra.hpp"
#include "stochep/group_sde.hpp"
#include "stochep/reduced_dynamics.hpp"

#include <string>
#include <vector>

namespace stochep {

/// Reduced velocity of the perturbed process on the trajectory grid.
struct PerturbedVelocity
{
  std::vector<double> times;
  std::vector<Eigen::Vector3d> values;
};

/// w_eps(t) = 1/2 sum_i nabla_{H_i^eps} H_i^eps + Ad(-1/2 sum_i nabla_{H_i} H_i + u(t)) + eps v'(t),
/// H_i^eps = Ad(H_i), where Ad is conjugation by e_eps^{-1}(t) for left-invariant
/// data and by e_eps(t) (the flow of the reversed composition) for right-invariant data.
/// At eps = 0 the result equals u exactly.
PerturbedVelocity perturbed_velocity(const ReducedTrajectory& u, const NoiseBasis& noise, const GeometrySpec& g,
                                     const VariationCurve& v, double eps);

/// Composite Simpson rule on a uniform grid (Simpson 3/8 closes an odd
/// number of intervals).
double simpson(const std::vector<double>& times, const std::vector<double>& values);
double trapezoid(const std::vector<double>& times, const std::vector<double>& values);

/// J = 1/2 int_0^1 <w, w> dt (Simpson).
double action(const PerturbedVelocity& w, const GeometrySpec& g);
double action_trapezoid(const PerturbedVelocity& w, const GeometrySpec& g);

struct GateauxEstimate
{
  /// [J(eps) - J(-eps)] / (2 eps)
  double central = 0.0;
  /// (4 D(eps/2) - D(eps)) / 3
  double richardson = 0.0;
};

inline constexpr double kDefaultGateauxStep = 1e-4;

GateauxEstimate gateaux_derivative(const ReducedTrajectory& u, const NoiseBasis& noise, const GeometrySpec& g,
                                   const VariationCurve& v, double eps = kDefaultGateauxStep);

/// Fourth-order finite-difference time derivative on a uniform grid (>= 5 nodes).
std::vector<AlgebraVector> time_derivative(const ReducedTrajectory& u);

/// int_0^1 < -u' + ep_rhs(u), v > dt, with u' from time_derivative.
double ep_pairing(const ReducedTrajectory& u, const NoiseBasis& noise, const GeometrySpec& g,
                  const VariationCurve& v);

/// sin(pi x), exactly zero at integers.
double sin_pi(double x);

/// v(t) = sin(pi n t) c.
VariationCurve sine_variation(int n, const Eigen::Vector3d& coefficient);

struct NamedVariation
{
  std::string id;
  VariationCurve curve;
};

/// Ten fixed test curves: n = 1..5 for each of two coefficient vectors.
std::vector<NamedVariation> variation_dictionary();

struct VariationResult
{
  std::string v_id;
  double dj_fd = 0.0;
  double dj_pairing = 0.0;
  double diff = 0.0;
};

/// Gateaux derivative (Richardson) and pairing for every dictionary curve.
std::vector<VariationResult> check_dictionary(const ReducedTrajectory& u, const NoiseBasis& noise,
                                              const GeometrySpec& g);

}  // namespace stochep
