#pragma once

#include "stochep/algebra.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace stochep {

using Rhs = std::function<AlgebraVector(double t, const AlgebraVector& u)>;

/// Drift curve u(t) sampled on a strictly increasing grid starting at 0.
struct ReducedTrajectory
{
  std::vector<double> times;
  std::vector<AlgebraVector> states;

  std::size_t size() const { return times.size(); }

  /// Linear interpolation between grid nodes; clamps outside the grid.
  AlgebraVector at(double t) const;
};

/// Throws std::invalid_argument on a non-increasing grid, non-finite states or
/// mismatched lengths.
void validate(const ReducedTrajectory& traj);

/// Uniform grid 0, dt, ..., T. T/dt must be an integer up to 1e-9 relative.
std::vector<double> uniform_grid(double horizon, double dt);

/// Reduced Euler-Poincare right-hand side:
///   left side:  +(ad*_{u~} u + K(u)),  right side: -(ad*_{u~} u + K(u)),
/// with u~ = u - 1/2 sum_i nabla_{H_i} H_i.
AlgebraVector ep_rhs(const AlgebraVector& u, const NoiseBasis& noise, const GeometrySpec& g);

/// Closed-form dissipative rigid body
///   I_1 u1' = (I_2 - I_3) u2 u3 - (I_2 - I_3)^2 / (2 I_2 I_3) u1   (and cyclic),
/// divided componentwise by I. Independent of the generic machinery.
Eigen::Vector3d rigid_body_rhs(const Eigen::Vector3d& u, const Eigen::Vector3d& inertia);

/// Classical fixed-step RK4 on the given grid. Throws NumericalBlowup with the
/// index of the first step that produced a non-finite state.
ReducedTrajectory integrate(const Rhs& rhs, const AlgebraVector& u0, const std::vector<double>& grid);

/// 1/2 <u, u>.
double kinetic_energy(const AlgebraVector& u, const GeometrySpec& g);

/// CSV with columns t,u1,...,un,energy.
void write_trajectory_csv(std::ostream& os, const ReducedTrajectory& traj, const GeometrySpec& g);

}  // namespace stochep
