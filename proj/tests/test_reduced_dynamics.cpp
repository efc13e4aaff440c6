#include "stochep/errors.hpp"
#include "stochep/reduced_dynamics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace stochep;

namespace {

double max_abs(const AlgebraVector& v)
{
  return v.cwiseAbs().maxCoeff();
}

Rhs ep(const GeometrySpec& g, const NoiseBasis& h)
{
  return [g, h](double, const AlgebraVector& u) { return ep_rhs(u, h, g); };
}

}  // namespace

TEST(EpRhs, RigidBodyComponent)
{
  const Eigen::Vector3d i(1, 2, 3);
  const auto du = ep_rhs(Eigen::Vector3d(1, 1, 1), so3_principal_noise(i), so3_geometry(i));
  EXPECT_NEAR(i[0] * du[0], -1.0 - 1.0 / 12.0, 1e-15);
}

TEST(EpRhs, IsotropicVanishes)
{
  const Eigen::Vector3d ones = Eigen::Vector3d::Ones();
  const AlgebraVector u = Eigen::Vector3d(0.3, -1.2, 2.0);
  EXPECT_LT(max_abs(ep_rhs(u, so3_principal_noise(ones), so3_geometry(ones))), 1e-15);
}

TEST(EpRhs, EmptyNoiseIsEulerTop)
{
  const Eigen::Vector3d i(1, 2, 3);
  const Eigen::Vector3d u(0.4, -0.7, 1.1);
  const Eigen::Vector3d euler((i[1] - i[2]) * u[1] * u[2] / i[0], (i[2] - i[0]) * u[2] * u[0] / i[1],
                              (i[0] - i[1]) * u[0] * u[1] / i[2]);
  EXPECT_LT(max_abs(ep_rhs(u, NoiseBasis{}, so3_geometry(i)) - AlgebraVector(euler)), 1e-15);
}

TEST(EpRhs, RightSideFlipsSign)
{
  const Eigen::Vector3d i(1, 2, 3);
  const Eigen::Vector3d u(0.4, -0.7, 1.1);
  const NoiseBasis h{{Eigen::Vector3d(1, 1, 0), Eigen::Vector3d(0, 0.5, 1)}};
  const AlgebraVector left = ep_rhs(u, h, so3_geometry(i, InvarianceSide::kLeft));
  const AlgebraVector right = ep_rhs(u, h, so3_geometry(i, InvarianceSide::kRight));
  // ad* is side independent; the contraction changes sign with the Christoffels and K is quadratic in them
  const auto gl = so3_geometry(i, InvarianceSide::kLeft);
  const auto gr = so3_geometry(i, InvarianceSide::kRight);
  EXPECT_LT(max_abs(contraction(h, gl) + contraction(h, gr)), 1e-15);
  EXPECT_LT(max_abs(left - (ad_star(u - 0.5 * contraction(h, gl), u, gl) + k_operator(u, h, gl))), 1e-14);
  EXPECT_LT(max_abs(right + (ad_star(u - 0.5 * contraction(h, gr), u, gr) + k_operator(u, h, gr))), 1e-14);
}

TEST(RigidBodyRhs, Examples)
{
  const Eigen::Vector3d i(1, 2, 3);
  EXPECT_EQ(rigid_body_rhs(Eigen::Vector3d::Zero(), i), Eigen::Vector3d::Zero());
  EXPECT_LT((rigid_body_rhs(Eigen::Vector3d(0, 1, 0), i) - Eigen::Vector3d(0, -1.0 / 3.0, 0)).cwiseAbs().maxCoeff(),
            1e-15);
  EXPECT_THROW(rigid_body_rhs(Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, 0, 3)), std::invalid_argument);
  EXPECT_THROW(rigid_body_rhs(Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, -2, 3)), std::invalid_argument);
}

TEST(RigidBodyRhs, OracleEquivalence)
{
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> moment(0.5, 3.0), coord(-2.0, 2.0);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n)
  {
    const Eigen::Vector3d i(moment(gen), moment(gen), moment(gen));
    const Eigen::Vector3d u(coord(gen), coord(gen), coord(gen));
    worst = std::max(worst, max_abs(ep_rhs(u, so3_principal_noise(i), so3_geometry(i)) -
                                    AlgebraVector(rigid_body_rhs(u, i))));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Integrate, ZeroRhsIsConstant)
{
  const auto traj = integrate([](double, const AlgebraVector& u) { return AlgebraVector::Zero(u.size()); },
                              Eigen::Vector3d::UnitX(), uniform_grid(1.0, 0.01));
  for (const auto& s : traj.states) EXPECT_EQ(s, AlgebraVector(Eigen::Vector3d::UnitX()));
}

TEST(Integrate, IsotropicBodyStaysPut)
{
  const Eigen::Vector3d ones = Eigen::Vector3d::Ones();
  const AlgebraVector u0 = Eigen::Vector3d(0.2, 0.5, -1.0);
  const auto traj = integrate(ep(so3_geometry(ones), so3_principal_noise(ones)), u0, uniform_grid(1.0, 1e-3));
  EXPECT_LT(max_abs(traj.states.back() - u0), 1e-15);
}

TEST(Integrate, FourthOrderSelfConvergence)
{
  const Eigen::Vector3d i(1, 2, 3);
  const auto rhs = ep(so3_geometry(i), so3_principal_noise(i));
  const AlgebraVector u0 = Eigen::Vector3d(1, 1, 1);
  // coarse steps so the error sits well above roundoff
  const auto reference = integrate(rhs, u0, uniform_grid(1.0, 1e-5)).states.back();
  const double e1 = max_abs(integrate(rhs, u0, uniform_grid(1.0, 0.1)).states.back() - reference);
  const double e2 = max_abs(integrate(rhs, u0, uniform_grid(1.0, 0.05)).states.back() - reference);
  EXPECT_GT(e1 / e2, 13.0);
  EXPECT_LT(e1 / e2, 19.0);
}

TEST(Integrate, EnergyDissipationAndConservation)
{
  const Eigen::Vector3d i(1, 2, 3);
  const auto g = so3_geometry(i);
  const AlgebraVector u0 = Eigen::Vector3d(1, 1, 1);
  const auto grid = uniform_grid(1.0, 1e-3);
  const auto dissipative = integrate(ep(g, so3_principal_noise(i)), u0, grid);
  for (std::size_t n = 0; n + 1 < dissipative.size(); ++n)
    EXPECT_LT(kinetic_energy(dissipative.states[n + 1], g), kinetic_energy(dissipative.states[n], g));

  const auto euler = integrate(ep(g, NoiseBasis{}), u0, grid);
  const double e0 = kinetic_energy(u0, g);
  double drift = 0.0;
  for (const auto& s : euler.states) drift = std::max(drift, std::abs(kinetic_energy(s, g) - e0));
  EXPECT_LT(drift, 1e-8);
}

TEST(Integrate, ReportsBlowupStep)
{
  const auto rhs = [](double, const AlgebraVector& u) -> AlgebraVector { return u.cwiseProduct(u) * 1e3; };
  try
  {
    integrate(rhs, Eigen::Vector3d(1, 1, 1), uniform_grid(1.0, 1e-2));
    FAIL() << "expected blow-up";
  }
  catch (const NumericalBlowup& e)
  {
    EXPECT_GT(e.step(), 0u);
    EXPECT_LT(e.step(), 100u);
  }
}

TEST(Integrate, RejectsBadGrid)
{
  const auto rhs = [](double, const AlgebraVector& u) { return u; };
  EXPECT_THROW(integrate(rhs, Eigen::Vector3d(1, 1, 1), {0.0, 0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(uniform_grid(1.0, 0.3), std::invalid_argument);
  EXPECT_THROW(uniform_grid(1.0, -0.1), std::invalid_argument);
}

TEST(KineticEnergy, Examples)
{
  EXPECT_DOUBLE_EQ(kinetic_energy(Eigen::Vector3d::UnitX(), so3_geometry(Eigen::Vector3d::Ones())), 0.5);
  const auto g = so3_geometry({1, 2, 3});
  EXPECT_DOUBLE_EQ(kinetic_energy(Eigen::Vector3d(1, 1, 1), g), 3.0);
  const AlgebraVector u = Eigen::Vector3d(0.3, -0.4, 0.9);
  EXPECT_DOUBLE_EQ(kinetic_energy(2.0 * u, g), 4.0 * kinetic_energy(u, g));
}

TEST(ReducedTrajectory, InterpolationAndValidation)
{
  ReducedTrajectory t;
  t.times = {0.0, 1.0};
  t.states = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2, 4, 6)};
  EXPECT_EQ(t.at(0.25), AlgebraVector(Eigen::Vector3d(0.5, 1, 1.5)));
  EXPECT_EQ(t.at(5.0), t.states.back());
  EXPECT_NO_THROW(validate(t));
  t.times = {0.0, 0.0};
  EXPECT_THROW(validate(t), std::invalid_argument);
}

TEST(TrajectoryCsv, Columns)
{
  const auto g = so3_geometry({1, 2, 3});
  const auto traj = integrate(ep(g, NoiseBasis{}), Eigen::Vector3d(1, 0, 0), uniform_grid(0.1, 0.05));
  std::ostringstream os;
  write_trajectory_csv(os, traj, g);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,u1,u2,u3,energy");
  std::getline(is, line);
  EXPECT_EQ(line, "0,1,0,0,0.5");
}
