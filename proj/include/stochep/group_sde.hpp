#pragma once

// SO(3)-valued semimartingales driven by the Stratonovich SDE
//   dg = g (sum_i H_i o dW^i - 1/2 sum_i nabla_{H_i} H_i dt + u(t) dt)   (left)
//   dg = (sum_i H_i o dW^i - 1/2 sum_i nabla_{H_i} H_i dt + u(t) dt) g   (right)
// with geometric stepping through the Rodrigues exponential, a Monte Carlo
// check of the generator, and the deterministic perturbation flows e_{eps,v}.

#include "stochep/algebra.hpp"
#include "stochep/reduced_dynamics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace stochep {

using GroupElement = Eigen::Matrix3d;

/// max |R^T R - Id| entrywise.
double orthogonality_defect(const GroupElement& r);

/// Orthogonality defect below `tol` and positive determinant.
bool is_rotation(const GroupElement& r, double tol = 1e-9);

/// exp(hat(w)) by the Rodrigues formula.
GroupElement so3_exp(const Eigen::Vector3d& w);

/// Principal logarithm, inverse of so3_exp for rotation angles below pi.
Eigen::Vector3d so3_log(const GroupElement& r);

/// Nearest rotation in the Frobenius norm (polar factor).
GroupElement polar_project(const GroupElement& m);

struct PathEnsemble
{
  std::uint64_t seed = 0;
  double step = 0.0;
  InvarianceSide side = InvarianceSide::kLeft;
  std::vector<double> times;
  /// paths[sample][node]
  std::vector<std::vector<GroupElement>> paths;
  /// Number of polar re-projections applied during simulation.
  std::size_t reprojections = 0;

  std::size_t samples() const { return paths.size(); }
};

/// Algebra increment of one Heun step in exponential coordinates:
///   Y0 = sum_i H_i dW_i + h b0,   Y1 = sum_i H_i dW_i + h b1,
///   xi = 1/2 (Y0 + Y1 -/+ 1/2 [Y0, Y1])   (- for left, + for right),
/// where b0, b1 are the drifts u(t) - 1/2 sum nabla_{H_i} H_i at the step ends.
Eigen::Vector3d step_increment(std::span<const double> dw, const NoiseBasis& noise,
                               const Eigen::Vector3d& drift_start, const Eigen::Vector3d& drift_end,
                               double h, InvarianceSide side);

struct SimulationOptions
{
  /// Worker threads; 0 selects std::thread::hardware_concurrency().
  unsigned threads = 0;
  /// Polar projection is applied when the orthogonality defect exceeds this.
  double reprojection_tolerance = 1e-9;
};

/// Simulates `n_samples` paths from g(0) = Id. States are recorded on the
/// grid of `drift`; the step h must divide every grid spacing. Sample s uses
/// its own generator seeded from (seed, s); increments are drawn time-major,
/// noise index minor, so the ensemble is bit-identical for identical inputs
/// regardless of the thread count.
PathEnsemble simulate(const ReducedTrajectory& drift, const NoiseBasis& noise, const GeometrySpec& g,
                      std::size_t n_samples, std::uint64_t seed, double h,
                      const SimulationOptions& options = {});

/// Linear test function f_M(g) = trace(M g).
struct LinearFunctional
{
  std::string name;
  Eigen::Matrix3d weight = Eigen::Matrix3d::Identity();

  double operator()(const GroupElement& g) const { return (weight * g).trace(); }
};

/// Analytic generator 1/2 sum_i (H_i H_i f)(g) + (b f)(g) for invariant
/// vector fields on the given side, b = u - 1/2 sum nabla_{H_i} H_i.
double analytic_generator(const LinearFunctional& f, const GroupElement& g, const NoiseBasis& noise,
                          const Eigen::Vector3d& drift, InvarianceSide side);

struct GeneratorReport
{
  std::string function;
  double step = 0.0;
  std::size_t samples = 0;
  double estimate = 0.0;
  double analytic = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
  /// z-score of every recorded interval taken separately.
  std::vector<double> node_z;
  bool deterministic = false;
  bool sufficient = true;

  bool passes(double z_threshold) const;
};

/// Minimum number of paths for which a standard error is reported as usable.
inline constexpr std::size_t kMinGeneratorSamples = 30;

/// Compares the ensemble mean of [f(g_{n+1}) - f(g_n)] / dt against the mean
/// analytic generator at g_n, for every recorded interval and averaged over
/// all intervals (each path contributes one averaged value, so the samples
/// stay independent). `drift` supplies u(t); the contraction term is taken
/// from `g`, so passing a different geometry than the one simulated is how a
/// mis-specified drift is expressed.
///
/// A degenerate ensemble (zero variance, e.g. no noise) gets z = 0 when the
/// discrepancy is within the O(dt) discretization allowance
/// 10 dt (1 + |analytic|), otherwise infinity.
GeneratorReport weak_generator_check(const PathEnsemble& ens, const LinearFunctional& f,
                                     const ReducedTrajectory& drift, const NoiseBasis& noise,
                                     const GeometrySpec& g);

/// Decay rate c in E[trace g(t)] = 3 exp(-c t) estimated at the last node,
/// with its delta-method standard error.
struct DecayEstimate
{
  double rate = 0.0;
  double stderr_ = 0.0;
};
DecayEstimate trace_decay_rate(const PathEnsemble& ens);

/// C^1 curve in the algebra with v(0) = v(1) = 0.
struct VariationCurve
{
  std::function<Eigen::Vector3d(double)> value;
  std::function<Eigen::Vector3d(double)> derivative;
};

/// Throws std::invalid_argument unless both endpoint values are exactly zero.
void validate(const VariationCurve& v);

/// RK4 solution of e' = eps e hat(v'(t)) (left) or e' = eps hat(v'(t)) e
/// (right), e(0) = Id, on the given grid. Requires |eps| <= 0.1 and a valid curve.
std::vector<GroupElement> perturbation_flow(const VariationCurve& v, double eps, const std::vector<double>& grid,
                                            InvarianceSide side = InvarianceSide::kLeft);

/// Pairwise (cascade) summation; order-independent of thread scheduling.
double pairwise_sum(std::span<const double> values);

/// CSV with columns t,r11,...,r33,sample.
void write_paths_csv(std::ostream& os, const PathEnsemble& ens);

}  // namespace stochep
