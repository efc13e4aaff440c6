#include "stochep/reduced_dynamics.hpp"

#include "stochep/errors.hpp"
#include "stochep/format.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace stochep {

AlgebraVector ReducedTrajectory::at(double t) const
{
  if (times.empty()) throw std::invalid_argument("empty trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  if (w == 0.0) return states[lo];
  return (1.0 - w) * states[lo] + w * states[hi];
}

void validate(const ReducedTrajectory& traj)
{
  if (traj.times.size() != traj.states.size())
    throw std::invalid_argument("trajectory: times and states differ in length");
  if (traj.times.empty()) throw std::invalid_argument("trajectory: empty grid");
  for (std::size_t n = 1; n < traj.times.size(); ++n)
    if (!(traj.times[n] > traj.times[n - 1]))
      throw std::invalid_argument("trajectory: grid is not strictly increasing");
  for (const auto& s : traj.states)
    if (!s.allFinite()) throw std::invalid_argument("trajectory: non-finite state");
}

std::vector<double> uniform_grid(double horizon, double dt)
{
  if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("grid: horizon and dt must be positive");
  const double steps = horizon / dt;
  const auto n = static_cast<std::size_t>(std::llround(steps));
  if (n == 0 || std::abs(steps - static_cast<double>(n)) > 1e-9 * steps)
    throw std::invalid_argument("grid: dt does not divide the horizon");
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = horizon * static_cast<double>(i) / static_cast<double>(n);
  return grid;
}

AlgebraVector ep_rhs(const AlgebraVector& u, const NoiseBasis& noise, const GeometrySpec& g)
{
  const AlgebraVector drift = u - 0.5 * contraction(noise, g);
  return g.side_sign() * (ad_star(drift, u, g) + k_operator(u, noise, g));
}

Eigen::Vector3d rigid_body_rhs(const Eigen::Vector3d& u, const Eigen::Vector3d& inertia)
{
  if ((inertia.array() <= 0.0).any()) throw std::invalid_argument("rigid body: moments must be positive");
  const double i1 = inertia[0], i2 = inertia[1], i3 = inertia[2];
  const double d23 = i2 - i3, d31 = i3 - i1, d12 = i1 - i2;
  return {
      (d23 * u[1] * u[2] - d23 * d23 / (2.0 * i2 * i3) * u[0]) / i1,
      (d31 * u[0] * u[2] - d31 * d31 / (2.0 * i1 * i3) * u[1]) / i2,
      (d12 * u[0] * u[1] - d12 * d12 / (2.0 * i1 * i2) * u[2]) / i3,
  };
}

ReducedTrajectory integrate(const Rhs& rhs, const AlgebraVector& u0, const std::vector<double>& grid)
{
  if (grid.empty()) throw std::invalid_argument("integrate: empty grid");
  if (!u0.allFinite()) throw std::invalid_argument("integrate: non-finite initial state");
  ReducedTrajectory traj;
  traj.times = grid;
  traj.states.reserve(grid.size());
  traj.states.push_back(u0);
  for (std::size_t n = 0; n + 1 < grid.size(); ++n)
  {
    const double t = grid[n];
    const double h = grid[n + 1] - t;
    if (!(h > 0.0)) throw std::invalid_argument("integrate: grid is not strictly increasing");
    const AlgebraVector& u = traj.states.back();
    auto stage = [&](double s, const AlgebraVector& x) {
      if (!x.allFinite()) throw NumericalBlowup("integrate: non-finite stage state", n);
      AlgebraVector k = rhs(s, x);
      if (!k.allFinite()) throw NumericalBlowup("integrate: non-finite right-hand side", n);
      return k;
    };
    const AlgebraVector k1 = stage(t, u);
    const AlgebraVector k2 = stage(t + 0.5 * h, u + 0.5 * h * k1);
    const AlgebraVector k3 = stage(t + 0.5 * h, u + 0.5 * h * k2);
    const AlgebraVector k4 = stage(t + h, u + h * k3);
    AlgebraVector next = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw NumericalBlowup("integrate: non-finite state", n);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double kinetic_energy(const AlgebraVector& u, const GeometrySpec& g)
{
  return 0.5 * inner(u, u, g);
}

void write_trajectory_csv(std::ostream& os, const ReducedTrajectory& traj, const GeometrySpec& g)
{
  os << "t";
  const std::size_t dim = g.dim();
  for (std::size_t a = 0; a < dim; ++a) os << ",u" << (a + 1);
  os << ",energy\n";
  for (std::size_t n = 0; n < traj.size(); ++n)
  {
    os << fmt_double(traj.times[n]);
    for (std::size_t a = 0; a < dim; ++a) os << ',' << fmt_double(traj.states[n][static_cast<Eigen::Index>(a)]);
    os << ',' << fmt_double(kinetic_energy(traj.states[n], g)) << '\n';
  }
}

}  // namespace stochep
