#pragma once

// Dense small-matrix kernels: cyclic Jacobi symmetric eigensolver, SPD square
// root, scaling-and-squaring exponential, inverse with determinant.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polarflow/error.hpp"

namespace polarflow {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

template <typename Scalar>
struct Tolerance {
  static constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  /// Relative symmetry tolerance for SPD validation.
  static constexpr Scalar symmetry = std::max(Scalar(1e-12), Scalar(64) * eps);
  /// Jacobi stops once the off-diagonal Frobenius mass is below this fraction of ||S||_F.
  static constexpr Scalar jacobi = std::max(Scalar(1e-14), Scalar(8) * eps);
  /// Singularity threshold on |det| relative to (||M||_F / sqrt(n))^n.
  static constexpr Scalar singular = Scalar(1e-12);
};

inline constexpr int kJacobiMaxSweeps = 100;

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " must be a non-empty square matrix, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " has non-finite entries");
  }
}

template <typename DerivedA, typename DerivedB>
void require_same_size(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                       const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
}

/// ||S - S^T||_F / ||S||_F, zero for the zero matrix.
template <typename Derived>
typename Derived::Scalar relative_asymmetry(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = s.norm();
  if (norm == Scalar(0)) return Scalar(0);
  return (s - s.transpose()).norm() / norm;
}

template <typename Derived>
Matrix<typename Derived::Scalar> symmetric_part(const Eigen::MatrixBase<Derived>& s) {
  return (s + s.transpose()) / typename Derived::Scalar(2);
}

template <typename Scalar>
struct SymEig {
  Vector<Scalar> eigenvalues;  // descending
  Matrix<Scalar> basis;        // orthonormal columns

  Scalar min_eigenvalue() const { return eigenvalues(eigenvalues.size() - 1); }
  Scalar max_eigenvalue() const { return eigenvalues(0); }
  Vector<Scalar> min_eigenvector() const { return basis.col(basis.cols() - 1); }

  Matrix<Scalar> reconstruct() const {
    return basis * eigenvalues.asDiagonal() * basis.transpose();
  }
};

namespace detail {

template <typename Scalar>
Scalar off_diagonal_norm(const Matrix<Scalar>& a) {
  Scalar sum(0);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

// A <- J^T A J, V <- V J for the rotation annihilating a(p, q).
template <typename Scalar>
void jacobi_rotate(Matrix<Scalar>& a, Matrix<Scalar>& v, Eigen::Index p, Eigen::Index q) {
  const Scalar apq = a(p, q);
  const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
  const Scalar t = (theta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                   (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
  const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
  const Scalar s = t * c;

  const Eigen::Index n = a.rows();
  for (Eigen::Index r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const Scalar arp = a(r, p);
    const Scalar arq = a(r, q);
    a(r, p) = a(p, r) = c * arp - s * arq;
    a(r, q) = a(q, r) = s * arp + c * arq;
  }
  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = a(q, p) = Scalar(0);

  for (Eigen::Index r = 0; r < n; ++r) {
    const Scalar vrp = v(r, p);
    const Scalar vrq = v(r, q);
    v(r, p) = c * vrp - s * vrq;
    v(r, q) = s * vrp + c * vrq;
  }
}

}  // namespace detail

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back sorted descending. Each basis column is signed so
/// that its largest-magnitude entry is positive (first such entry on ties),
/// which makes the output deterministic for golden tests.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  require_square(s, "sym_eig input");
  if (relative_asymmetry(s) > Tolerance<Scalar>::symmetry) {
    throw Error(ErrorCode::NotSymmetric, "sym_eig input is not symmetric");
  }

  const Eigen::Index n = s.rows();
  Matrix<Scalar> a = symmetric_part(s);
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar target = Tolerance<Scalar>::jacobi * a.norm();

  int sweep = 0;
  while (detail::off_diagonal_norm(a) > target) {
    if (sweep == kJacobiMaxSweeps) {
      throw Error(ErrorCode::NoConvergence,
                  "Jacobi eigensolver hit the cap of " + std::to_string(kJacobiMaxSweeps) +
                      " sweeps");
    }
    for (Eigen::Index p = 0; p + 1 < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q)
        if (a(p, q) != Scalar(0)) detail::jacobi_rotate(a, v, p, q);
    ++sweep;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymEig<Scalar> out{Vector<Scalar>(n), Matrix<Scalar>(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    auto col = v.col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < n; ++r)
      if (std::abs(col(r)) > std::abs(col(arg))) arg = r;
    out.basis.col(k) = col(arg) < Scalar(0) ? Vector<Scalar>(-col) : Vector<Scalar>(col);
  }
  return out;
}

/// Validated symmetric positive-definite matrix. The eigendecomposition is
/// computed once at construction and kept alongside the entries.
template <typename Scalar>
class SpdMatrix {
 public:
  /// Validates `s` as is: throws NotSymmetric or NotSpd.
  static SpdMatrix validated(const Matrix<Scalar>& s) {
    require_square(s, "SPD matrix");
    if (relative_asymmetry(s) > Tolerance<Scalar>::symmetry) {
      throw Error(ErrorCode::NotSymmetric, "matrix is not symmetric to relative tolerance");
    }
    return SpdMatrix(symmetric_part(s));
  }

  /// Replaces `s` by (S + S^T)/2 before validating positivity.
  static SpdMatrix symmetrized(const Matrix<Scalar>& s) {
    require_square(s, "SPD matrix");
    return SpdMatrix(symmetric_part(s));
  }

  static SpdMatrix identity(Eigen::Index n) {
    return SpdMatrix(Matrix<Scalar>::Identity(n, n));
  }

  const Matrix<Scalar>& matrix() const noexcept { return matrix_; }
  const SymEig<Scalar>& eig() const noexcept { return eig_; }
  Eigen::Index size() const noexcept { return matrix_.rows(); }
  Scalar min_eigenvalue() const { return eig_.min_eigenvalue(); }
  Scalar max_eigenvalue() const { return eig_.max_eigenvalue(); }
  Scalar condition() const { return max_eigenvalue() / min_eigenvalue(); }
  bool is_identity() const { return matrix_.isIdentity(Scalar(0)); }

 private:
  explicit SpdMatrix(Matrix<Scalar> s) : matrix_(std::move(s)), eig_(sym_eig(matrix_)) {
    if (!(eig_.min_eigenvalue() > Scalar(0))) {
      throw Error(ErrorCode::NotSpd, "smallest eigenvalue " +
                                         std::to_string(double(eig_.min_eigenvalue())) +
                                         " is not positive");
    }
  }

  Matrix<Scalar> matrix_;
  SymEig<Scalar> eig_;
};

using SpdMatrixXd = SpdMatrix<double>;

/// Principal square root of an SPD matrix.
template <typename Scalar>
SpdMatrix<Scalar> spd_sqrt(const SpdMatrix<Scalar>& s) {
  const auto& e = s.eig();
  const Matrix<Scalar> r =
      e.basis * e.eigenvalues.cwiseSqrt().asDiagonal() * e.basis.transpose();
  return SpdMatrix<Scalar>::symmetrized(r);
}

/// S^{-1/2} as a plain matrix.
template <typename Scalar>
Matrix<Scalar> spd_inv_sqrt(const SpdMatrix<Scalar>& s) {
  const auto& e = s.eig();
  return symmetric_part(Matrix<Scalar>(e.basis * e.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() *
                                       e.basis.transpose()));
}

/// Matrix exponential by scaling and squaring: scale by 2^-s until
/// ||M||_F / 2^s <= 0.5, sum the degree-13 Taylor polynomial, square s times.
template <typename Derived>
Matrix<typename Derived::Scalar> mat_exp(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  require_square(m, "mat_exp input");
  const Eigen::Index n = m.rows();

  int squarings = 0;
  Scalar scaled_norm = m.norm();
  while (scaled_norm > Scalar(0.5)) {
    scaled_norm /= Scalar(2);
    ++squarings;
  }
  const Matrix<Scalar> x = m / std::ldexp(Scalar(1), squarings);
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(n, n);

  constexpr int kDegree = 13;
  Matrix<Scalar> e = id + x / Scalar(kDegree);
  for (int k = kDegree - 1; k >= 1; --k) e = id + (x * e) / Scalar(k);

  for (int i = 0; i < squarings; ++i) e = (e * e).eval();
  return e;
}

/// exp(M) - I without cancellation for small M: the same scaling, the Taylor
/// series without its constant term, and squaring through D <- 2D + D^2.
template <typename Derived>
Matrix<typename Derived::Scalar> mat_expm1(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  require_square(m, "mat_expm1 input");
  const Eigen::Index n = m.rows();

  int squarings = 0;
  Scalar scaled_norm = m.norm();
  while (scaled_norm > Scalar(0.5)) {
    scaled_norm /= Scalar(2);
    ++squarings;
  }
  const Matrix<Scalar> x = m / std::ldexp(Scalar(1), squarings);
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(n, n);

  constexpr int kDegree = 13;
  Matrix<Scalar> e = id + x / Scalar(kDegree);
  for (int k = kDegree - 1; k >= 2; --k) e = id + (x * e) / Scalar(k);
  Matrix<Scalar> d = x * e;

  for (int i = 0; i < squarings; ++i) d = (Scalar(2) * d + d * d).eval();
  return d;
}

template <typename Scalar>
struct InverseDet {
  Matrix<Scalar> inverse;
  Scalar det;
};

/// Inverse and determinant via partial-pivoting LU. Singular when
/// |det| <= 1e-12 * (||M||_F / sqrt(n))^n.
template <typename Derived>
InverseDet<typename Derived::Scalar> inverse_det(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  require_square(m, "inverse_det input");
  const Eigen::PartialPivLU<Matrix<Scalar>> lu(m);
  const Scalar det = lu.determinant();
  const Scalar n = Scalar(m.rows());
  const Scalar scale = std::pow(m.norm() / std::sqrt(n), n);
  if (!(std::abs(det) > Tolerance<Scalar>::singular * scale)) {
    throw Error(ErrorCode::Singular, "matrix is singular to working precision (det = " +
                                         std::to_string(double(det)) + ")");
  }
  return {lu.inverse(), det};
}

}  // namespace polarflow
