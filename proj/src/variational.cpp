#include "stochep/variational.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stochep {

namespace {

double uniform_step(const std::vector<double>& times)
{
  if (times.size() < 2) throw std::invalid_argument("quadrature: need at least two nodes");
  const double h = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t n = 1; n < times.size(); ++n)
    if (std::abs(times[n] - times[n - 1] - h) > 1e-9 * h)
      throw std::invalid_argument("quadrature: grid must be uniform");
  return h;
}

Eigen::Vector3d conjugate(const GroupElement& e, const Eigen::Vector3d& x, InvarianceSide side)
{
  // left: e^{-1} x e, right: e x e^{-1}
  const Eigen::Matrix3d inv = e.inverse();
  const Eigen::Matrix3d m = side == InvarianceSide::kLeft ? Eigen::Matrix3d(inv * hat(x) * e)
                                                          : Eigen::Matrix3d(e * hat(x) * inv);
  return vee(0.5 * (m - m.transpose()));
}

Eigen::Vector3d to3(const AlgebraVector& v)
{
  return {v[0], v[1], v[2]};
}

}  // namespace

PerturbedVelocity perturbed_velocity(const ReducedTrajectory& u, const NoiseBasis& noise, const GeometrySpec& g,
                                     const VariationCurve& v, double eps)
{
  validate(u);
  validate(v);
  if (g.dim() != 3) throw std::invalid_argument("perturbed velocity: SO(3) requires a 3-dimensional algebra");
  const auto flow = perturbation_flow(v, eps, u.times, g.side);
  const Eigen::Vector3d half_contraction = 0.5 * to3(contraction(noise, g));

  PerturbedVelocity w;
  w.times = u.times;
  w.values.reserve(u.size());
  NoiseBasis moved;
  moved.vectors.resize(noise.size());
  for (std::size_t n = 0; n < u.size(); ++n)
  {
    const GroupElement& e = flow[n];
    for (std::size_t i = 0; i < noise.size(); ++i) moved.vectors[i] = conjugate(e, to3(noise.vectors[i]), g.side);
    const Eigen::Vector3d correction =
        0.5 * to3(contraction(moved, g)) - conjugate(e, half_contraction, g.side);
    w.values.push_back(conjugate(e, to3(u.states[n]), g.side) + correction + eps * v.derivative(u.times[n]));
  }
  return w;
}

double simpson(const std::vector<double>& times, const std::vector<double>& values)
{
  const double h = uniform_step(times);
  const std::size_t intervals = times.size() - 1;
  if (intervals == 1) return 0.5 * h * (values[0] + values[1]);
  std::size_t even = intervals % 2 == 0 ? intervals : intervals - 3;
  double acc = 0.0;
  if (even > 0)
  {
    double s = values[0] + values[even];
    for (std::size_t n = 1; n < even; ++n) s += (n % 2 == 1 ? 4.0 : 2.0) * values[n];
    acc = s * h / 3.0;
  }
  if (even != intervals)
  {
    const std::size_t a = even;
    acc += 3.0 * h / 8.0 * (values[a] + 3.0 * values[a + 1] + 3.0 * values[a + 2] + values[a + 3]);
  }
  return acc;
}

double trapezoid(const std::vector<double>& times, const std::vector<double>& values)
{
  double acc = 0.0;
  for (std::size_t n = 0; n + 1 < times.size(); ++n)
    acc += 0.5 * (times[n + 1] - times[n]) * (values[n] + values[n + 1]);
  return acc;
}

namespace {

std::vector<double> energy_density(const PerturbedVelocity& w, const GeometrySpec& g)
{
  std::vector<double> density(w.values.size());
  for (std::size_t n = 0; n < w.values.size(); ++n) density[n] = 0.5 * w.values[n].dot(g.gram * w.values[n]);
  return density;
}

}  // namespace

double action(const PerturbedVelocity& w, const GeometrySpec& g)
{
  return simpson(w.times, energy_density(w, g));
}

double action_trapezoid(const PerturbedVelocity& w, const GeometrySpec& g)
{
  return trapezoid(w.times, energy_density(w, g));
}

GateauxEstimate gateaux_derivative(const ReducedTrajectory& u, const NoiseBasis& noise, const GeometrySpec& g,
                                   const VariationCurve& v, double eps)
{
  auto central = [&](double e) {
    const double plus = action(perturbed_velocity(u, noise, g, v, e), g);
    const double minus = action(perturbed_velocity(u, noise, g, v, -e), g);
    return (plus - minus) / (2.0 * e);
  };
  GateauxEstimate out;
  out.central = central(eps);
  out.richardson = (4.0 * central(0.5 * eps) - out.central) / 3.0;
  return out;
}

std::vector<AlgebraVector> time_derivative(const ReducedTrajectory& u)
{
  const double h = uniform_step(u.times);
  const std::size_t n = u.size();
  if (n < 5) throw std::invalid_argument("time derivative: need at least five nodes");
  const auto& x = u.states;
  std::vector<AlgebraVector> d(n);
  const double s = 1.0 / (12.0 * h);
  d[0] = s * (-25.0 * x[0] + 48.0 * x[1] - 36.0 * x[2] + 16.0 * x[3] - 3.0 * x[4]);
  d[1] = s * (-3.0 * x[0] - 10.0 * x[1] + 18.0 * x[2] - 6.0 * x[3] + x[4]);
  for (std::size_t i = 2; i + 2 < n; ++i) d[i] = s * (x[i - 2] - 8.0 * x[i - 1] + 8.0 * x[i + 1] - x[i + 2]);
  d[n - 2] = -s * (-3.0 * x[n - 1] - 10.0 * x[n - 2] + 18.0 * x[n - 3] - 6.0 * x[n - 4] + x[n - 5]);
  d[n - 1] = -s * (-25.0 * x[n - 1] + 48.0 * x[n - 2] - 36.0 * x[n - 3] + 16.0 * x[n - 4] - 3.0 * x[n - 5]);
  return d;
}

double ep_pairing(const ReducedTrajectory& u, const NoiseBasis& noise, const GeometrySpec& g,
                  const VariationCurve& v)
{
  validate(u);
  const auto du = time_derivative(u);
  std::vector<double> integrand(u.size());
  for (std::size_t n = 0; n < u.size(); ++n)
  {
    const AlgebraVector residual = -du[n] + ep_rhs(u.states[n], noise, g);
    const AlgebraVector vn = v.value(u.times[n]);
    integrand[n] = inner(residual, vn, g);
  }
  return simpson(u.times, integrand);
}

double sin_pi(double x)
{
  const double r = std::remainder(x, 2.0);  // in [-1, 1]
  if (r == 0.0 || std::abs(r) == 1.0) return 0.0;
  return std::sin(std::numbers::pi * r);
}

VariationCurve sine_variation(int n, const Eigen::Vector3d& coefficient)
{
  const double k = static_cast<double>(n);
  VariationCurve v;
  v.value = [k, coefficient](double t) -> Eigen::Vector3d { return sin_pi(k * t) * coefficient; };
  v.derivative = [k, coefficient](double t) -> Eigen::Vector3d {
    return std::numbers::pi * k * std::cos(std::numbers::pi * k * t) * coefficient;
  };
  return v;
}

std::vector<NamedVariation> variation_dictionary()
{
  const Eigen::Vector3d first(1.0, 0.5, -0.25);
  const Eigen::Vector3d second(-0.3, 1.0, 0.7);
  std::vector<NamedVariation> out;
  for (int set = 0; set < 2; ++set)
    for (int n = 1; n <= 5; ++n)
      out.push_back({"sin" + std::to_string(n) + (set == 0 ? "a" : "b"),
                     sine_variation(n, set == 0 ? first : second)});
  return out;
}

std::vector<VariationResult> check_dictionary(const ReducedTrajectory& u, const NoiseBasis& noise,
                                              const GeometrySpec& g)
{
  std::vector<VariationResult> out;
  for (const auto& [id, curve] : variation_dictionary())
  {
    VariationResult r;
    r.v_id = id;
    r.dj_fd = gateaux_derivative(u, noise, g, curve).richardson;
    r.dj_pairing = ep_pairing(u, noise, g, curve);
    r.diff = r.dj_fd - r.dj_pairing;
    out.push_back(r);
  }
  return out;
}

}  // namespace stochep
