#include "oracles.hpp"

#include "stochep/group_sde.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace stochep;

namespace {

ReducedTrajectory constant_drift(const Eigen::Vector3d& u, double horizon, double spacing)
{
  ReducedTrajectory t;
  t.times = uniform_grid(horizon, spacing);
  t.states.assign(t.times.size(), u);
  return t;
}

double max_abs(const Eigen::MatrixXd& m)
{
  return m.cwiseAbs().maxCoeff();
}

NoiseBasis unit_noise()
{
  return NoiseBasis{{Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ()}};
}

VariationCurve quadratic_curve(const Eigen::Vector3d& c)
{
  // v(t) = t (1 - t) c
  return {[c](double t) -> Eigen::Vector3d { return t * (1.0 - t) * c; },
          [c](double t) -> Eigen::Vector3d { return (1.0 - 2.0 * t) * c; }};
}

}  // namespace

TEST(So3Exp, MatchesSeriesExponential)
{
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int n = 0; n < 50; ++n)
  {
    const Eigen::Vector3d w(d(gen), d(gen), d(gen));
    EXPECT_LT(max_abs(so3_exp(w) - oracle::expm(oracle::skew(w))), 1e-13);
    EXPECT_LT(max_abs(so3_exp(1e-8 * w) - oracle::expm(oracle::skew(1e-8 * w))), 1e-16);
    EXPECT_TRUE(is_rotation(so3_exp(w), 1e-14));
    if (w.norm() < 3.0) EXPECT_LT((so3_log(so3_exp(w)) - w).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PolarProject, NearestRotation)
{
  Eigen::Matrix3d m = so3_exp(Eigen::Vector3d(0.3, -0.2, 1.0));
  m(0, 1) += 1e-6;
  const auto r = polar_project(m);
  EXPECT_TRUE(is_rotation(r, 1e-14));
  EXPECT_LT(max_abs(r - m), 1e-6);
}

TEST(Simulate, DeterministicRotationAboutThirdAxis)
{
  for (auto side : {InvarianceSide::kLeft, InvarianceSide::kRight})
  {
    const auto g = so3_geometry({1, 2, 3}, side);
    const auto ens = simulate(constant_drift(Eigen::Vector3d::UnitZ(), 1.0, 0.1), NoiseBasis{}, g, 1, 0, 1e-3);
    const double c = std::cos(1.0), s = std::sin(1.0);
    Eigen::Matrix3d expected;
    expected << c, -s, 0, s, c, 0, 0, 0, 1;
    EXPECT_LT(max_abs(ens.paths[0].back() - expected), 1e-8);
  }
}

TEST(Simulate, TimeDependentDeterministicFlowIsSecondOrder)
{
  // u(t) = (cos t, sin t, 0.5) sampled on a grid matching each step size
  const auto g = so3_geometry({1, 2, 3});
  auto endpoint = [&](double h) {
    ReducedTrajectory u;
    u.times = uniform_grid(1.0, h);
    for (double t : u.times) u.states.push_back(Eigen::Vector3d(std::cos(t), std::sin(t), 0.5));
    return simulate(u, NoiseBasis{}, g, 1, 0, h).paths[0].back();
  };
  const auto g1 = endpoint(0.02), g2 = endpoint(0.01), g4 = endpoint(0.005);
  const double ratio = max_abs(g1 - g2) / max_abs(g2 - g4);
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Simulate, Reproducible)
{
  const auto g = so3_geometry({1, 2, 3});
  const auto drift = constant_drift(Eigen::Vector3d(0.1, 0.2, 0.3), 0.2, 0.05);
  const NoiseBasis h{{Eigen::Vector3d(1, 0.5, 0), Eigen::Vector3d(0, 0, 1)}};
  SimulationOptions one, many;
  one.threads = 1;
  many.threads = 4;
  const auto a = simulate(drift, h, g, 37, 99, 1e-3, one);
  const auto b = simulate(drift, h, g, 37, 99, 1e-3, many);
  const auto c = simulate(drift, h, g, 37, 100, 1e-3, one);
  ASSERT_EQ(a.samples(), b.samples());
  bool differs = false;
  for (std::size_t s = 0; s < a.samples(); ++s)
    for (std::size_t k = 0; k < a.times.size(); ++k)
    {
      EXPECT_EQ(a.paths[s][k], b.paths[s][k]);
      differs = differs || a.paths[s][k] != c.paths[s][k];
    }
  EXPECT_TRUE(differs);

  std::ostringstream csv_a, csv_b;
  write_paths_csv(csv_a, a);
  write_paths_csv(csv_b, b);
  EXPECT_EQ(csv_a.str(), csv_b.str());
}

TEST(Simulate, StaysOnTheGroupWithoutProjection)
{
  const auto g = so3_geometry({1, 1, 1});
  const auto ens = simulate(constant_drift(Eigen::Vector3d(0.5, 0, 0), 1.0, 0.1), unit_noise(), g, 20, 5, 1e-3);
  EXPECT_EQ(ens.reprojections, 0u);
  for (const auto& path : ens.paths)
    for (const auto& r : path) EXPECT_TRUE(is_rotation(r, 1e-9));
}

TEST(Simulate, RejectsIncompatibleStep)
{
  const auto g = so3_geometry({1, 2, 3});
  EXPECT_THROW(simulate(constant_drift(Eigen::Vector3d::Zero(), 0.1, 0.05), unit_noise(), g, 2, 0, 0.03),
               std::invalid_argument);
}

TEST(Simulate, BrownianTraceDecayConsistentAcrossSteps)
{
  // E[g_t] = exp(t/2 sum hat(E_i)^2) = exp(-t) Id, so E[trace g_t] = 3 exp(-t).
  const auto g = so3_geometry({1, 1, 1});
  const auto drift = constant_drift(Eigen::Vector3d::Zero(), 0.5, 0.1);
  const auto coarse = trace_decay_rate(simulate(drift, unit_noise(), g, 6000, 11, 2e-3));
  const auto fine = trace_decay_rate(simulate(drift, unit_noise(), g, 6000, 12, 1e-3));
  EXPECT_GT(coarse.rate, 0.0);
  EXPECT_LT(std::abs(coarse.rate - fine.rate), 4.0 * std::hypot(coarse.stderr_, fine.stderr_));
  EXPECT_LT(std::abs(fine.rate - 1.0), 4.0 * fine.stderr_);
}

TEST(AnalyticGenerator, MatchesDirectionalDerivatives)
{
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = d(gen);
  const LinearFunctional f{"random", m};
  const GroupElement at = so3_exp(Eigen::Vector3d(0.4, -0.3, 0.8));
  const NoiseBasis h{{Eigen::Vector3d(1, 0.5, 0), Eigen::Vector3d(0, -0.2, 1)}};
  const Eigen::Vector3d b(0.3, 0.1, -0.6);
  for (auto side : {InvarianceSide::kLeft, InvarianceSide::kRight})
  {
    auto along = [&](const Eigen::Vector3d& x, double s) {
      const Eigen::Matrix3d e = oracle::expm(s * oracle::skew(x));
      return (m * (side == InvarianceSide::kLeft ? Eigen::Matrix3d(at * e) : Eigen::Matrix3d(e * at))).trace();
    };
    const double s = 1e-4;
    double expected = (along(b, s) - along(b, -s)) / (2 * s);
    for (const auto& hi : h.vectors)
      expected += 0.5 * (along(hi, s) - 2 * along(hi, 0) + along(hi, -s)) / (s * s);
    EXPECT_NEAR(analytic_generator(f, at, h, b, side), expected, 1e-6);
  }
}

TEST(WeakGenerator, BrownianTraceWithinThreeStandardErrors)
{
  const auto g = so3_geometry({1, 1, 1});
  const auto drift = constant_drift(Eigen::Vector3d::Zero(), 0.1, 1e-3);
  const auto ens = simulate(drift, unit_noise(), g, 20000, 2024, 1e-3);
  const auto r = weak_generator_check(ens, {"trace", Eigen::Matrix3d::Identity()}, drift, unit_noise(), g);
  EXPECT_TRUE(r.sufficient);
  EXPECT_FALSE(r.deterministic);
  EXPECT_LT(std::abs(r.z), 3.0) << "estimate " << r.estimate << " analytic " << r.analytic << " se " << r.stderr_;
  EXPECT_EQ(r.node_z.size(), drift.size() - 1);
}

TEST(WeakGenerator, DroppedContractionIsDetected)
{
  const Eigen::Vector3d i(1, 2, 3);
  const auto g = so3_geometry(i);
  const NoiseBasis h{{Eigen::Vector3d(1, 1, 0)}};
  ASSERT_GT(contraction(h, g).norm(), 0.3);
  const auto drift = constant_drift(Eigen::Vector3d(0.3, -0.2, 0.5), 0.1, 1e-3);
  const auto ens = simulate(drift, h, g, 20000, 77, 1e-3);
  const LinearFunctional f{"e3", hat(Eigen::Vector3d::UnitZ()).transpose()};
  const auto good = weak_generator_check(ens, f, drift, h, g);
  EXPECT_LT(std::abs(good.z), 3.0);
  GeometrySpec flat = g;
  flat.christoffel = Tensor3(3);
  const auto bad = weak_generator_check(ens, f, drift, h, flat);
  EXPECT_GT(std::abs(bad.z), 5.0);
}

TEST(WeakGenerator, DeterministicCaseHasZeroVariance)
{
  const auto g = so3_geometry({1, 2, 3});
  const auto drift = constant_drift(Eigen::Vector3d(0.2, 0.4, -0.1), 0.1, 1e-3);
  const auto ens = simulate(drift, NoiseBasis{}, g, 40, 0, 1e-3);
  const auto r = weak_generator_check(ens, {"trace", Eigen::Matrix3d::Identity()}, drift, NoiseBasis{}, g);
  EXPECT_TRUE(r.deterministic);
  EXPECT_EQ(r.z, 0.0);
  EXPECT_EQ(r.stderr_, 0.0);
}

TEST(WeakGenerator, TooFewSamplesIsReported)
{
  const auto g = so3_geometry({1, 1, 1});
  const auto drift = constant_drift(Eigen::Vector3d::Zero(), 0.01, 1e-3);
  const auto ens = simulate(drift, unit_noise(), g, 5, 1, 1e-3);
  const auto r = weak_generator_check(ens, {"trace", Eigen::Matrix3d::Identity()}, drift, unit_noise(), g);
  EXPECT_FALSE(r.sufficient);
  EXPECT_FALSE(r.passes(1e9));
}

TEST(WeakGenerator, DiscrepancyShrinksLinearlyInStep)
{
  // Exact expectation of one step by tensor Gauss-Hermite quadrature over the
  // Brownian increments, compared with the analytic generator at the identity.
  const Eigen::Vector3d i(1, 2, 3);
  const auto g = so3_geometry(i);
  const NoiseBasis h{{Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 0.5, 0.3)}};
  const Eigen::Vector3d b = Eigen::Vector3d(0.3, -0.2, 0.5) - 0.5 * Eigen::Vector3d(contraction(h, g));
  Eigen::Matrix3d m;
  m << 0.3, -1.0, 0.2, 0.7, 0.1, -0.4, 0.5, 0.9, -0.6;
  const LinearFunctional f{"m", m};
  const auto rule = oracle::gauss_hermite(16);
  const double analytic = analytic_generator(f, Eigen::Matrix3d::Identity(), h, b, InvarianceSide::kLeft);

  auto discrepancy = [&](double step) {
    Eigen::Matrix3d mean = Eigen::Matrix3d::Zero();
    for (std::size_t p = 0; p < rule.nodes.size(); ++p)
      for (std::size_t q = 0; q < rule.nodes.size(); ++q)
      {
        const double dw[2] = {std::sqrt(step) * rule.nodes[p], std::sqrt(step) * rule.nodes[q]};
        const Eigen::Vector3d xi = step_increment(dw, h, b, b, step, InvarianceSide::kLeft);
        mean += rule.weights[p] * rule.weights[q] * oracle::expm(oracle::skew(xi));
      }
    return (m * (mean - Eigen::Matrix3d::Identity())).trace() / step - analytic;
  };
  const double d4 = discrepancy(4e-3), d2 = discrepancy(2e-3), d1 = discrepancy(1e-3);
  EXPECT_GT(std::abs(d1), 1e-8);
  EXPECT_NEAR(d4 / d2, 2.0, 0.1);
  EXPECT_NEAR(d2 / d1, 2.0, 0.1);
}

TEST(StepIncrement, BracketCorrectionSign)
{
  const NoiseBasis none;
  const Eigen::Vector3d b0(1, 0, 0), b1(0, 1, 0);
  const double dw[1] = {0.0};
  const auto left = step_increment(std::span<const double>(dw, 0), none, b0, b1, 0.1, InvarianceSide::kLeft);
  const auto right = step_increment(std::span<const double>(dw, 0), none, b0, b1, 0.1, InvarianceSide::kRight);
  EXPECT_NEAR(left.z(), -0.25 * 0.01, 1e-15);
  EXPECT_NEAR(right.z(), 0.25 * 0.01, 1e-15);
  EXPECT_NEAR(left.x(), 0.05, 1e-15);
}

TEST(PerturbationFlow, IdentityAtZero)
{
  const auto v = quadratic_curve({1, -0.5, 0.3});
  for (const auto& e : perturbation_flow(v, 0.0, uniform_grid(1.0, 0.01)))
    EXPECT_EQ(e, Eigen::Matrix3d::Identity());
}

TEST(PerturbationFlow, FirstOrderMatchesVariation)
{
  const Eigen::Vector3d c(1, -0.5, 0.3);
  const auto v = quadratic_curve(c);
  const auto grid = uniform_grid(1.0, 0.01);
  for (auto side : {InvarianceSide::kLeft, InvarianceSide::kRight})
  {
    double err[2], inv_err[2];
    const double eps[2] = {1e-2, 1e-3};
    for (int k = 0; k < 2; ++k)
    {
      const auto flow = perturbation_flow(v, eps[k], grid, side);
      err[k] = inv_err[k] = 0.0;
      for (std::size_t n = 0; n < grid.size(); ++n)
      {
        const Eigen::Matrix3d vh = oracle::skew(v.value(grid[n]));
        err[k] = std::max(err[k], max_abs((flow[n] - Eigen::Matrix3d::Identity()) / eps[k] - vh));
        inv_err[k] = std::max(inv_err[k], max_abs((flow[n].inverse() - Eigen::Matrix3d::Identity()) / eps[k] + vh));
        EXPECT_LT(orthogonality_defect(flow[n]), 1e-9);
      }
    }
    EXPECT_NEAR(err[0] / err[1], 10.0, 1.0);
    EXPECT_NEAR(inv_err[0] / inv_err[1], 10.0, 1.0);
    EXPECT_LT(err[1], 1e-3);
  }
}

TEST(PerturbationFlow, RejectsLargeEpsilonAndBadCurves)
{
  const auto v = quadratic_curve({1, 0, 0});
  EXPECT_THROW(perturbation_flow(v, 0.2, uniform_grid(1.0, 0.1)), std::invalid_argument);
  VariationCurve bad{[](double t) -> Eigen::Vector3d { return Eigen::Vector3d(t, 0, 0); },
                     [](double) -> Eigen::Vector3d { return Eigen::Vector3d(1, 0, 0); }};
  EXPECT_THROW(validate(bad), std::invalid_argument);
  EXPECT_THROW(perturbation_flow(bad, 0.01, uniform_grid(1.0, 0.1)), std::invalid_argument);
}

TEST(PairwiseSum, Basic)
{
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(pairwise_sum(v), 999.0 * 1000.0 / 2.0);
  EXPECT_EQ(pairwise_sum({}), 0.0);
}

TEST(PathsCsv, Columns)
{
  const auto g = so3_geometry({1, 2, 3});
  const auto ens = simulate(constant_drift(Eigen::Vector3d::Zero(), 0.1, 0.1), NoiseBasis{}, g, 2, 0, 0.1);
  std::ostringstream os;
  write_paths_csv(os, ens);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,r11,r12,r13,r21,r22,r23,r31,r32,r33,sample");
  std::getline(is, line);
  EXPECT_EQ(line, "0,1,0,0,0,1,0,0,0,1,0");
}
