#pragma once

// Independent reference computations used by the tests. None of these call
// the library routine they are compared against.

#include "stochep/torus_fluid.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

// Gauss-Hermite rule for the standard normal density (Golub-Welsch).
struct Quadrature
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Quadrature gauss_hermite(int n)
{
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  Quadrature q;
  for (int i = 0; i < n; ++i)
  {
    q.nodes.push_back(eig.eigenvalues()[i]);
    const double v = eig.eigenvectors()(0, i);
    q.weights.push_back(v * v);
  }
  return q;
}

// so(3) hat map written out by hand.
inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Matrix exponential by scaling and squaring of a Taylor series.
inline Eigen::Matrix3d expm(const Eigen::Matrix3d& a)
{
  int squarings = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.1)
  {
    norm /= 2.0;
    ++squarings;
  }
  const Eigen::Matrix3d s = a / std::pow(2.0, squarings);
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d sum = term;
  for (int k = 1; k < 20; ++k)
  {
    term = term * s / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// Pointwise value, gradient and Hessian of a truncated divergence-free field,
// evaluated from the trigonometric series directly.
struct Jet
{
  Eigen::Vector2d value = Eigen::Vector2d::Zero();
  // grad(i, j) = d_i F_j
  Eigen::Matrix2d grad = Eigen::Matrix2d::Zero();
  // hess[l](i, j) = d_l d_i F_j
  std::array<Eigen::Matrix2d, 2> hess{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
};

inline Jet jet(const stochep::torus::VelocityField& u, double t1, double t2)
{
  Jet out;
  for (std::size_t j = 0; j < u.size(); ++j)
  {
    const auto& k = u.reps[j];
    const double a = u.a[static_cast<Eigen::Index>(j)];
    const double b = u.b[static_cast<Eigen::Index>(j)];
    const double ph = k.k1 * t1 + k.k2 * t2;
    const double s0 = a * std::cos(ph) + b * std::sin(ph);
    const double s1 = -a * std::sin(ph) + b * std::cos(ph);
    const double s2 = -s0;
    const Eigen::Vector2d dir(k.k2, -k.k1);
    const Eigen::Vector2d kv(k.k1, k.k2);
    out.value += s0 * dir;
    out.grad += s1 * kv * dir.transpose();
    for (int l = 0; l < 2; ++l) out.hess[l] += s2 * kv[l] * kv * dir.transpose();
  }
  return out;
}

// (1 - Laplacian) u, coefficient-wise.
inline stochep::torus::VelocityField helmholtz(const stochep::torus::VelocityField& u)
{
  auto out = u;
  for (std::size_t j = 0; j < u.size(); ++j)
  {
    const double w = 1.0 + u.reps[j].norm_sq();
    out.a[static_cast<Eigen::Index>(j)] *= w;
    out.b[static_cast<Eigen::Index>(j)] *= w;
  }
  return out;
}

// Uniform N x N grid on [0, 2 pi)^2; the rectangle rule integrates
// trigonometric polynomials of degree < N exactly.
struct Grid
{
  int n;
  double theta(int i) const { return 2.0 * std::numbers::pi * i / n; }
  double cell() const { return std::pow(2.0 * std::numbers::pi / n, 2); }
};

// (x . grad) y from jets
inline Eigen::Vector2d advect(const Jet& x, const Jet& y)
{
  return y.grad.transpose() * x.value;
}

// Vector-field bracket [x, y] = (x . grad) y - (y . grad) x and its gradient.
inline Jet bracket(const Jet& x, const Jet& y)
{
  Jet out;
  out.value = advect(x, y) - advect(y, x);
  for (int l = 0; l < 2; ++l)
  {
    // d_l [(x . grad) y]_j = sum_i d_l x_i d_i y_j + x_i d_l d_i y_j
    const Eigen::Vector2d dl = y.grad.transpose() * x.grad.row(l).transpose() + y.hess[l].transpose() * x.value -
                               x.grad.transpose() * y.grad.row(l).transpose() - x.hess[l].transpose() * y.value;
    out.grad.row(l) = dl.transpose();
  }
  return out;
}

// <ad*_u u, z> = <u, -[u, z]> for the given metric, by grid quadrature.
inline double ad_star_pairing(const stochep::torus::VelocityField& u, const stochep::torus::VelocityField& z,
                              stochep::torus::Metric metric, int n)
{
  const auto w = metric == stochep::torus::Metric::kL2 ? u : helmholtz(u);
  Grid grid{n};
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
    {
      const double t1 = grid.theta(i), t2 = grid.theta(j);
      const Jet ju = jet(u, t1, t2);
      const Jet jz = jet(z, t1, t2);
      const Jet jw = jet(w, t1, t2);
      acc += -jw.value.dot(advect(ju, jz) - advect(jz, ju));
    }
  return acc * grid.cell();
}

// L2 or H1 inner product by quadrature (H1 through (1 - Laplacian) of one side).
inline double inner(const stochep::torus::VelocityField& x, const stochep::torus::VelocityField& y,
                    stochep::torus::Metric metric, int n)
{
  const auto w = metric == stochep::torus::Metric::kL2 ? x : helmholtz(x);
  Grid grid{n};
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
    {
      const double t1 = grid.theta(i), t2 = grid.theta(j);
      acc += jet(w, t1, t2).value.dot(jet(y, t1, t2).value);
    }
  return acc * grid.cell();
}

// Right side of the K pairing
//   -<u, 1/2 sum_k lambda^2 (nabla_{ad_v A} A + nabla_A ad_v A)>,  ad_v A = -[v, A],
// for A ranging over the cosine and sine fields of every representative; the
// Leray projection is dropped because u and (1 - Laplacian) u are divergence-free.
inline double k_pairing(const stochep::torus::VelocityField& u, const stochep::torus::VelocityField& v,
                        const stochep::torus::ModeSet& modes, stochep::torus::Metric metric, int n)
{
  const auto w = metric == stochep::torus::Metric::kL2 ? u : helmholtz(u);
  std::vector<std::pair<double, stochep::torus::VelocityField>> basis;
  for (const auto& k : modes.reps())
    for (int c = 0; c < 2; ++c)
    {
      stochep::torus::VelocityField f;
      f.reps = {k};
      f.a = Eigen::VectorXd::Constant(1, c == 0 ? 1.0 : 0.0);
      f.b = Eigen::VectorXd::Constant(1, c == 0 ? 0.0 : 1.0);
      basis.emplace_back(modes.lambda(k), f);
    }
  Grid grid{n};
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
    {
      const double t1 = grid.theta(i), t2 = grid.theta(j);
      const Jet jv = jet(v, t1, t2);
      const Eigen::Vector2d wv = jet(w, t1, t2).value;
      Eigen::Vector2d s = Eigen::Vector2d::Zero();
      for (const auto& [lambda, field] : basis)
      {
        if (lambda == 0.0) continue;
        const Jet ja = jet(field, t1, t2);
        Jet ad = bracket(jv, ja);
        ad.value = -ad.value;
        ad.grad = -ad.grad;
        s += lambda * lambda * (advect(ad, ja) + advect(ja, ad));
      }
      acc += wv.dot(s);
    }
  return -0.5 * acc * grid.cell();
}

}  // namespace oracle
