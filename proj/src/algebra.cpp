#include "stochep/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochep {

AlgebraVector Tensor3::contract(const AlgebraVector& x, const AlgebraVector& y) const
{
  AlgebraVector out = AlgebraVector::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t c = 0; c < dim_; ++c)
  {
    double acc = 0.0;
    for (std::size_t a = 0; a < dim_; ++a)
    {
      if (x[a] == 0.0) continue;
      for (std::size_t b = 0; b < dim_; ++b) acc += (*this)(c, a, b) * x[a] * y[b];
    }
    out[c] = acc;
  }
  return out;
}

Tensor3 Tensor3::operator-() const
{
  Tensor3 out = *this;
  for (double& v : out.data_) v = -v;
  return out;
}

namespace {

void require_dim(const AlgebraVector& v, const GeometrySpec& g, const char* what)
{
  if (static_cast<std::size_t>(v.size()) != g.dim())
  {
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(v.size()) +
                                " does not match algebra dimension " + std::to_string(g.dim()));
  }
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite coordinates");
}

AlgebraVector basis_vector(std::size_t dim, std::size_t a)
{
  AlgebraVector e = AlgebraVector::Zero(static_cast<Eigen::Index>(dim));
  e[static_cast<Eigen::Index>(a)] = 1.0;
  return e;
}

Eigen::LLT<Eigen::MatrixXd> factor_gram(const Eigen::MatrixXd& gram)
{
  if (gram.rows() != gram.cols() || gram.rows() == 0)
  {
    throw std::invalid_argument("gram matrix must be square and non-empty");
  }
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
  {
    throw std::invalid_argument("gram matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
  {
    throw std::invalid_argument("gram matrix is not positive definite");
  }
  return llt;
}

}  // namespace

void validate(const GeometrySpec& g)
{
  factor_gram(g.gram);
  const std::size_t n = g.dim();
  if (g.structure.dim() != n || g.christoffel.dim() != n)
  {
    throw std::invalid_argument("structure/christoffel tables do not match gram dimension");
  }
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (std::abs(g.structure(c, a, b) + g.structure(c, b, a)) > 1e-12)
          throw std::invalid_argument("structure constants are not antisymmetric");
}

double metric_compatibility_defect(const GeometrySpec& g)
{
  const std::size_t n = g.dim();
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t z = 0; z < n; ++z)
      {
        const auto ex = basis_vector(n, x), ey = basis_vector(n, y), ez = basis_vector(n, z);
        const double d = inner(covariant(ex, ey, g), ez, g) + inner(ey, covariant(ex, ez, g), g);
        worst = std::max(worst, std::abs(d));
      }
  return worst;
}

double torsion_defect(const GeometrySpec& g)
{
  const std::size_t n = g.dim();
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
    {
      const auto ex = basis_vector(n, x), ey = basis_vector(n, y);
      const AlgebraVector t = covariant(ex, ey, g) - covariant(ey, ex, g) - bracket(ex, ey, g);
      worst = std::max(worst, t.cwiseAbs().maxCoeff());
    }
  return worst;
}

double jacobi_defect(const Tensor3& structure)
{
  const std::size_t n = structure.dim();
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
      {
        const auto ea = basis_vector(n, a), eb = basis_vector(n, b), ec = basis_vector(n, c);
        const AlgebraVector j = structure.contract(ea, structure.contract(eb, ec)) +
                                structure.contract(eb, structure.contract(ec, ea)) +
                                structure.contract(ec, structure.contract(ea, eb));
        worst = std::max(worst, j.cwiseAbs().maxCoeff());
      }
  return worst;
}

AlgebraVector bracket(const AlgebraVector& a, const AlgebraVector& b, const GeometrySpec& g)
{
  require_dim(a, g, "bracket");
  require_dim(b, g, "bracket");
  return g.structure.contract(a, b);
}

AlgebraVector ad(const AlgebraVector& a, const AlgebraVector& b, const GeometrySpec& g)
{
  return g.side_sign() * bracket(a, b, g);
}

Eigen::MatrixXd ad_matrix(const AlgebraVector& a, const GeometrySpec& g)
{
  const std::size_t n = g.dim();
  Eigen::MatrixXd m(n, n);
  for (std::size_t b = 0; b < n; ++b) m.col(static_cast<Eigen::Index>(b)) = ad(a, basis_vector(n, b), g);
  return m;
}

AlgebraVector ad_star(const AlgebraVector& u, const AlgebraVector& v, const GeometrySpec& g)
{
  require_dim(v, g, "ad_star");
  const auto llt = factor_gram(g.gram);
  return llt.solve(ad_matrix(u, g).transpose() * (g.gram * v));
}

double inner(const AlgebraVector& a, const AlgebraVector& b, const GeometrySpec& g)
{
  return a.dot(g.gram * b);
}

AlgebraVector covariant(const AlgebraVector& x, const AlgebraVector& y, const GeometrySpec& g)
{
  require_dim(x, g, "covariant");
  require_dim(y, g, "covariant");
  return g.christoffel.contract(x, y);
}

GeometrySpec levi_civita(const Eigen::MatrixXd& gram, const Tensor3& structure, InvarianceSide side)
{
  const auto llt = factor_gram(gram);
  const std::size_t n = static_cast<std::size_t>(gram.rows());
  if (structure.dim() != n) throw std::invalid_argument("structure table does not match gram dimension");

  // s(a, b, c) = <[E_a, E_b], E_c>
  std::vector<double> s(n * n * n);
  auto at = [n](std::size_t a, std::size_t b, std::size_t c) { return (a * n + b) * n + c; };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
      {
        double acc = 0.0;
        for (std::size_t d = 0; d < n; ++d) acc += structure(d, a, b) * gram(d, c);
        s[at(a, b, c)] = acc;
      }

  GeometrySpec g;
  g.gram = gram;
  g.structure = structure;
  g.side = side;
  g.christoffel = Tensor3(n);
  Eigen::VectorXd rhs(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
    {
      for (std::size_t c = 0; c < n; ++c)
        rhs[c] = 0.5 * (s[at(a, b, c)] - s[at(b, c, a)] + s[at(c, a, b)]);
      const Eigen::VectorXd gamma = llt.solve(rhs);
      for (std::size_t c = 0; c < n; ++c) g.christoffel(c, a, b) = gamma[c];
    }
  return g;
}

AlgebraVector contraction(const NoiseBasis& noise, const GeometrySpec& g)
{
  AlgebraVector out = AlgebraVector::Zero(static_cast<Eigen::Index>(g.dim()));
  for (const auto& h : noise.vectors) out += covariant(h, h, g);
  return out;
}

double k_pairing(const AlgebraVector& u, const AlgebraVector& v, const NoiseBasis& noise,
                 const GeometrySpec& g)
{
  AlgebraVector sum = AlgebraVector::Zero(static_cast<Eigen::Index>(g.dim()));
  for (const auto& h : noise.vectors)
  {
    const AlgebraVector adh = ad(v, h, g);
    sum += covariant(adh, h, g) + covariant(h, adh, g);
  }
  return -0.5 * inner(u, sum, g);
}

AlgebraVector k_operator(const AlgebraVector& u, const NoiseBasis& noise, const GeometrySpec& g)
{
  require_dim(u, g, "k_operator");
  const auto llt = factor_gram(g.gram);
  const std::size_t n = g.dim();
  Eigen::VectorXd rhs(n);
  for (std::size_t a = 0; a < n; ++a) rhs[a] = k_pairing(u, basis_vector(n, a), noise, g);
  return llt.solve(rhs);
}

AlgebraVector curvature(const AlgebraVector& x, const AlgebraVector& y, const AlgebraVector& z,
                        const GeometrySpec& g)
{
  return covariant(x, covariant(y, z, g), g) - covariant(y, covariant(x, z, g), g) -
         covariant(bracket(x, y, g), z, g);
}

NoiseBasis orthonormal_basis(const GeometrySpec& g)
{
  const auto llt = factor_gram(g.gram);
  const std::size_t n = g.dim();
  const Eigen::MatrixXd lower = llt.matrixL();
  const Eigen::MatrixXd frame = lower.transpose().triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(n, n));
  NoiseBasis basis;
  for (std::size_t i = 0; i < n; ++i) basis.vectors.push_back(frame.col(static_cast<Eigen::Index>(i)));
  return basis;
}

AlgebraVector ricci(const AlgebraVector& u, const GeometrySpec& g)
{
  AlgebraVector out = AlgebraVector::Zero(static_cast<Eigen::Index>(g.dim()));
  for (const auto& e : orthonormal_basis(g).vectors) out += curvature(u, e, e, g);
  return out;
}

AlgebraVector rough_laplacian(const AlgebraVector& u, const GeometrySpec& g)
{
  AlgebraVector out = AlgebraVector::Zero(static_cast<Eigen::Index>(g.dim()));
  for (const auto& e : orthonormal_basis(g).vectors)
    out += covariant(e, covariant(e, u, g), g) - covariant(covariant(e, e, g), u, g);
  return out;
}

AlgebraVector k_from_curvature(const AlgebraVector& u, const NoiseBasis& noise, const GeometrySpec& g)
{
  AlgebraVector sum = AlgebraVector::Zero(static_cast<Eigen::Index>(g.dim()));
  for (const auto& h : noise.vectors) sum += covariant(h, covariant(h, u, g), g) + curvature(u, h, h, g);
  return 0.5 * g.side_sign() * sum;
}

AlgebraVector k_from_laplacian(const AlgebraVector& u, const GeometrySpec& g)
{
  return 0.5 * g.side_sign() * (rough_laplacian(u, g) + ricci(u, g));
}

Tensor3 so3_structure()
{
  Tensor3 c(3);
  // [E_a, E_b] = eps_abc E_c
  c(2, 0, 1) = 1.0;
  c(2, 1, 0) = -1.0;
  c(0, 1, 2) = 1.0;
  c(0, 2, 1) = -1.0;
  c(1, 2, 0) = 1.0;
  c(1, 0, 2) = -1.0;
  return c;
}

GeometrySpec so3_geometry(const Eigen::Vector3d& inertia, const Eigen::Vector3d& connection_inertia,
                          InvarianceSide side)
{
  if ((inertia.array() <= 0.0).any() || (connection_inertia.array() <= 0.0).any())
  {
    throw std::invalid_argument("moments of inertia must be positive");
  }
  const Tensor3 structure = side == InvarianceSide::kLeft ? so3_structure() : -so3_structure();
  GeometrySpec g = levi_civita(connection_inertia.asDiagonal().toDenseMatrix(), structure, side);
  g.gram = inertia.asDiagonal().toDenseMatrix();
  return g;
}

NoiseBasis so3_principal_noise(const Eigen::Vector3d& inertia)
{
  NoiseBasis h;
  for (int i = 0; i < 3; ++i)
  {
    AlgebraVector e = AlgebraVector::Zero(3);
    e[i] = 1.0 / std::sqrt(inertia[i]);
    h.vectors.push_back(e);
  }
  return h;
}

Eigen::Matrix3d hat(const Eigen::Vector3d& v)
{
  Eigen::Matrix3d m;
  m << 0.0, -v[2], v[1],
       v[2], 0.0, -v[0],
       -v[1], v[0], 0.0;
  return m;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m)
{
  return {m(2, 1), m(0, 2), m(1, 0)};
}

}  // namespace stochep
