#pragma once

// Finite-dimensional Lie algebra machinery on a fixed basis {E_a}: brackets,
// invariant metrics, invariant connections given by Christoffel tables, ad*,
// the Ito/Stratonovich contraction term, the noise-induced operator K and
// curvature. Everything is written against (gram, christoffel, structure);
// so(3) is provided as a concrete instance.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <vector>

namespace stochep {

using AlgebraVector = Eigen::VectorXd;

/// Dense rank-3 table T(c, a, b), used both for structure constants
/// [E_a, E_b] = sum_c c^c_ab E_c and for Christoffel symbols
/// nabla_{E_a} E_b = sum_c Gamma^c_ab E_c.
class Tensor3
{
 public:
  Tensor3() = default;
  explicit Tensor3(std::size_t dim) : dim_(dim), data_(dim * dim * dim, 0.0) {}

  std::size_t dim() const { return dim_; }

  double& operator()(std::size_t c, std::size_t a, std::size_t b)
  {
    return data_[(c * dim_ + a) * dim_ + b];
  }
  double operator()(std::size_t c, std::size_t a, std::size_t b) const
  {
    return data_[(c * dim_ + a) * dim_ + b];
  }

  /// sum_{a,b} T(., a, b) x_a y_b
  AlgebraVector contract(const AlgebraVector& x, const AlgebraVector& y) const;

  Tensor3 operator-() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Which translation the metric and connection are invariant under. Selects
/// the sign of ad relative to the bracket of invariant vector fields and the
/// sign of the reduced Euler-Poincare right-hand side.
enum class InvarianceSide { kLeft, kRight };

/// Metric + connection + bracket on the algebra basis.
///
/// `structure` holds the bracket of the invariant vector fields generated by
/// the basis. For left-invariant fields this is the Lie algebra bracket
/// itself; for right-invariant fields it is its negative. Accordingly
/// ad_u w = [u, w] on the left side and ad_u w = -[u, w] on the right side,
/// so ad is always the Lie algebra adjoint.
struct GeometrySpec
{
  Eigen::MatrixXd gram;
  Tensor3 christoffel;
  Tensor3 structure;
  InvarianceSide side = InvarianceSide::kLeft;

  std::size_t dim() const { return static_cast<std::size_t>(gram.rows()); }

  /// +1 on the left side, -1 on the right side.
  double side_sign() const { return side == InvarianceSide::kLeft ? 1.0 : -1.0; }
};

/// Finite family {H_i} driving the group SDE. May be empty.
struct NoiseBasis
{
  std::vector<AlgebraVector> vectors;

  bool empty() const { return vectors.empty(); }
  std::size_t size() const { return vectors.size(); }
};

// ---------------------------------------------------------------------------
// Validation

/// Throws std::invalid_argument unless gram is symmetric positive definite,
/// the tables have matching dimension and the structure is antisymmetric.
void validate(const GeometrySpec& g);

/// Largest violation of <nabla_X Y, Z> + <Y, nabla_X Z> = 0 over basis triples.
double metric_compatibility_defect(const GeometrySpec& g);

/// Largest violation of nabla_X Y - nabla_Y X = [X, Y] over basis pairs.
double torsion_defect(const GeometrySpec& g);

/// Largest violation of the Jacobi identity over basis triples.
double jacobi_defect(const Tensor3& structure);

// ---------------------------------------------------------------------------
// Operations

/// Bracket of the invariant vector fields generated by a and b.
AlgebraVector bracket(const AlgebraVector& a, const AlgebraVector& b, const GeometrySpec& g);

/// Lie algebra adjoint ad_a b.
AlgebraVector ad(const AlgebraVector& a, const AlgebraVector& b, const GeometrySpec& g);

/// Matrix of w -> ad_a w in basis coordinates.
Eigen::MatrixXd ad_matrix(const AlgebraVector& a, const GeometrySpec& g);

/// Metric adjoint of ad: <ad*_u v, w> = <v, ad_u w> for all w.
AlgebraVector ad_star(const AlgebraVector& u, const AlgebraVector& v, const GeometrySpec& g);

/// <a, b> under the gram matrix.
double inner(const AlgebraVector& a, const AlgebraVector& b, const GeometrySpec& g);

/// nabla_X Y for constant (invariant) X, Y.
AlgebraVector covariant(const AlgebraVector& x, const AlgebraVector& y, const GeometrySpec& g);

/// Levi-Civita connection of an invariant metric via the Koszul formula
/// 2<nabla_X Y, Z> = <[X,Y],Z> - <[Y,Z],X> + <[Z,X],Y> on basis triples.
/// `structure` is the invariant-field bracket (see GeometrySpec).
GeometrySpec levi_civita(const Eigen::MatrixXd& gram, const Tensor3& structure, InvarianceSide side);

/// sum_i nabla_{H_i} H_i.
AlgebraVector contraction(const NoiseBasis& noise, const GeometrySpec& g);

/// The operator K defined by
///   <K(u), v> = -<u, 1/2 sum_i (nabla_{ad_v H_i} H_i + nabla_{H_i}(ad_v H_i))>
/// evaluated for v over the basis and solved against the gram matrix.
AlgebraVector k_operator(const AlgebraVector& u, const NoiseBasis& noise, const GeometrySpec& g);

/// Right-hand side of the K pairing for a single v:
/// -<u, 1/2 sum_i (nabla_{ad_v H_i} H_i + nabla_{H_i}(ad_v H_i))>.
double k_pairing(const AlgebraVector& u, const AlgebraVector& v, const NoiseBasis& noise,
                 const GeometrySpec& g);

/// R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_{[X,Y]} Z.
AlgebraVector curvature(const AlgebraVector& x, const AlgebraVector& y, const AlgebraVector& z,
                        const GeometrySpec& g);

/// A gram-orthonormal basis of the algebra.
NoiseBasis orthonormal_basis(const GeometrySpec& g);

/// Ric(u) = sum_i R(u, e_i) e_i over a gram-orthonormal basis.
AlgebraVector ricci(const AlgebraVector& u, const GeometrySpec& g);

/// Rough Laplacian of an invariant field at the identity:
/// sum_i (nabla_{e_i} nabla_{e_i} u - nabla_{nabla_{e_i} e_i} u), e_i orthonormal.
AlgebraVector rough_laplacian(const AlgebraVector& u, const GeometrySpec& g);

/// K through the curvature identity
///   K(u) = -s/2 sum_i (nabla_{H_i} nabla_{H_i} u + R(u, H_i) H_i),
/// with s = +1 for right-invariant and s = -1 for left-invariant data.
/// Valid for a Levi-Civita connection with nabla_{H_i} H_i = 0.
AlgebraVector k_from_curvature(const AlgebraVector& u, const NoiseBasis& noise, const GeometrySpec& g);

/// K = -s/2 (Delta u + Ric(u)); valid when additionally {H_i} is orthonormal.
AlgebraVector k_from_laplacian(const AlgebraVector& u, const GeometrySpec& g);

// ---------------------------------------------------------------------------
// so(3)

/// Structure constants of so(3) in the basis with [E1,E2]=E3, [E2,E3]=E1,
/// [E3,E1]=E2.
Tensor3 so3_structure();

/// Metric <v,v>^I = sum_j I_j v_j^2 with the Levi-Civita connection of the
/// metric with moments `connection_inertia`. Pass the same vector twice for
/// the Levi-Civita pair (<>^I, nabla^I).
GeometrySpec so3_geometry(const Eigen::Vector3d& inertia, const Eigen::Vector3d& connection_inertia,
                          InvarianceSide side = InvarianceSide::kLeft);

inline GeometrySpec so3_geometry(const Eigen::Vector3d& inertia,
                                 InvarianceSide side = InvarianceSide::kLeft)
{
  return so3_geometry(inertia, inertia, side);
}

/// H_i = E_i / sqrt(I_i), an orthonormal basis for <>^I.
NoiseBasis so3_principal_noise(const Eigen::Vector3d& inertia);

/// Skew matrix v with v eta = v_hat x eta.
Eigen::Matrix3d hat(const Eigen::Vector3d& v);
Eigen::Vector3d vee(const Eigen::Matrix3d& m);

}  // namespace stochep
