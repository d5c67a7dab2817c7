#include <cmath>
#include <numbers>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "polarflow/matcore.hpp"
#include "test_support.hpp"

namespace polarflow {
namespace {

using testing::diag;
using testing::mat2;
using testing::rel_err;

// Independent exponential: the plain power series summed in 50-digit
// arithmetic, so cancellation for large negative spectra stays harmless.
MatrixXd series_exp(const MatrixXd& m, int terms) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<Big> x(n * n), term(n * n, Big(0)), sum(n * n, Big(0)), next(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) x[i * n + j] = m(Eigen::Index(i), Eigen::Index(j));
    term[i * n + i] = 1;
    sum[i * n + i] = 1;
  }
  for (int k = 1; k < terms; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Big acc = 0;
        for (std::size_t l = 0; l < n; ++l) acc += term[i * n + l] * x[l * n + j];
        next[i * n + j] = acc / k;
      }
    term.swap(next);
    for (std::size_t i = 0; i < n * n; ++i) sum[i] += term[i];
  }
  MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(Eigen::Index(i), Eigen::Index(j)) = static_cast<double>(sum[i * n + j]);
  return out;
}

TEST(SymEig, DiagonalInput) {
  const auto e = sym_eig(diag({2, 1}));
  EXPECT_DOUBLE_EQ(e.eigenvalues(0), 2.0);
  EXPECT_DOUBLE_EQ(e.eigenvalues(1), 1.0);
  EXPECT_TRUE(e.basis.isIdentity(0.0));
}

TEST(SymEig, ZeroMatrix) {
  const auto e = sym_eig(MatrixXd::Zero(2, 2));
  EXPECT_EQ(e.eigenvalues(0), 0.0);
  EXPECT_EQ(e.eigenvalues(1), 0.0);
  EXPECT_TRUE(e.basis.isIdentity(0.0));
}

TEST(SymEig, TwoByTwoMatchesCharacteristicRoots) {
  const MatrixXd s = mat2(2, 1, 1, 2);
  // Roots of lambda^2 - tr lambda + det.
  const double tr = s.trace();
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  const double disc = std::sqrt(tr * tr - 4 * det);
  const double hi = (tr + disc) / 2;
  const double lo = (tr - disc) / 2;
  ASSERT_DOUBLE_EQ(hi, 3.0);
  ASSERT_DOUBLE_EQ(lo, 1.0);

  const auto e = sym_eig(s);
  EXPECT_NEAR(e.eigenvalues(0), hi, 1e-14);
  EXPECT_NEAR(e.eigenvalues(1), lo, 1e-14);
  const double r = 1 / std::sqrt(2.0);
  Eigen::Vector2d v0(r, r), v1(r, -r);
  EXPECT_NEAR(std::abs(e.basis.col(0).dot(v0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.basis.col(1).dot(v1)), 1.0, 1e-14);
}

TEST(SymEig, LargestEntryOfEachColumnIsPositive) {
  NormalStream normal(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = sym_eig(testing::random_symmetric(normal, 5));
    for (Eigen::Index c = 0; c < 5; ++c) {
      Eigen::Index arg;
      e.basis.col(c).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(e.basis(arg, c), 0.0);
    }
  }
}

TEST(SymEig, RandomReconstructionAndOrthonormality) {
  NormalStream normal(1);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      const MatrixXd s = testing::random_symmetric(normal, n);
      const auto e = sym_eig(s);
      EXPECT_LE((e.reconstruct() - s).norm(), 1e-10 * s.norm());
      EXPECT_LE((e.basis.transpose() * e.basis - MatrixXd::Identity(n, n)).norm(), 1e-12);
      for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(e.eigenvalues(i - 1), e.eigenvalues(i));
    }
  }
}

TEST(SymEig, RejectsAsymmetricInput) {
  try {
    sym_eig(mat2(1, 2, 0, 1));
    FAIL() << "expected NotSymmetric";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSymmetric);
  }
}

TEST(SymEig, RejectsNonSquare) {
  try {
    sym_eig(MatrixXd::Zero(2, 3));
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(SpdMatrix, ValidatesPositivity) {
  try {
    SpdMatrixXd::validated(diag({1, -1}));
    FAIL() << "expected NotSpd";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSpd);
  }
  try {
    SpdMatrixXd::validated(diag({1, 0}));
    FAIL() << "expected NotSpd";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSpd);
  }
}

TEST(SpdMatrix, RejectsNonFinite) {
  EXPECT_THROW(SpdMatrixXd::validated(diag({1, std::nan("")})), Error);
}

TEST(SpdSqrt, Examples) {
  EXPECT_TRUE(spd_sqrt(SpdMatrixXd::identity(3)).matrix().isIdentity(1e-15));
  EXPECT_LE(rel_err(spd_sqrt(SpdMatrixXd::validated(diag({4, 9}))).matrix(), diag({2, 3})), 1e-15);

  const MatrixXd candidate = mat2(2, 1, 1, 2);
  const MatrixXd input = mat2(5, 4, 4, 5);
  ASSERT_TRUE((candidate * candidate).isApprox(input, 0.0));
  EXPECT_LE(rel_err(spd_sqrt(SpdMatrixXd::validated(input)).matrix(), candidate), 1e-14);
}

TEST(SpdSqrt, RandomSquaresBack) {
  NormalStream normal(2);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto s = SpdMatrixXd::validated(testing::random_spd(normal, n));
      const MatrixXd r = spd_sqrt(s).matrix();
      EXPECT_LE((r * r - s.matrix()).norm(), 1e-10 * s.matrix().norm());
      EXPECT_LE(relative_asymmetry(r), 1e-12);
    }
  }
}

TEST(MatExp, Examples) {
  EXPECT_TRUE(mat_exp(MatrixXd::Zero(3, 3)).isIdentity(0.0));
  EXPECT_LE(rel_err(mat_exp(diag({std::log(2.0), 0})), diag({2, 1})), 1e-15);

  const double q = std::numbers::pi / 2;
  const MatrixXd m = mat2(0, -q, q, 0);
  const MatrixXd oracle = series_exp(m, 30);
  const MatrixXd want = mat2(0, -1, 1, 0);
  ASSERT_LE((oracle - want).norm(), 1e-15);
  EXPECT_LE((mat_exp(m) - want).norm(), 1e-14);
}

TEST(MatExp, AgreesWithSeriesUpToNormTen) {
  NormalStream normal(3);
  for (int n = 1; n <= 5; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      MatrixXd m = testing::random_matrix(normal, n);
      const double target = 10.0 * (trial + 1) / 20.0;
      m *= target / m.norm();
      const MatrixXd want = series_exp(m, 150);
      EXPECT_LE(rel_err(mat_exp(m), want), 1e-12) << "n=" << n << " norm=" << target;
    }
  }
}

TEST(MatExp, InverseIsExpOfNegative) {
  NormalStream normal(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 5;
    MatrixXd m = testing::random_matrix(normal, n);
    m *= 5.0 * (trial % 10 + 1) / 10.0 / m.norm();
    const MatrixXd prod = mat_exp(m) * mat_exp(MatrixXd(-m));
    EXPECT_LE((prod - MatrixXd::Identity(n, n)).norm(), 1e-10);
  }
}

TEST(MatExp, SkewGivesOrthogonal) {
  NormalStream normal(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + trial % 4;
    const MatrixXd w = 3.0 * testing::random_skew(normal, n);
    const MatrixXd q = mat_exp(w);
    EXPECT_LE((q.transpose() * q - MatrixXd::Identity(n, n)).norm(), 1e-10);
  }
}

TEST(MatExpm1, AgreesWithSeriesWithoutConstantTerm) {
  NormalStream normal(7);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      MatrixXd m = testing::random_matrix(normal, n);
      m *= 4.0 * (trial + 1) / 10.0 / m.norm();
      const MatrixXd want = series_exp(m, 100) - MatrixXd::Identity(n, n);
      EXPECT_LE(rel_err(mat_expm1(m), want), 1e-12);
    }
  }
}

TEST(MatExpm1, RelativelyAccurateForTinyInput) {
  NormalStream normal(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial % 4;
    MatrixXd m = testing::random_matrix(normal, n);
    m *= 1e-12 / m.norm();
    // exp(M) - I = M + M^2/2 + O(1e-36).
    const MatrixXd want = m + m * m / 2.0;
    EXPECT_LE(rel_err(mat_expm1(m), want), 1e-14);
  }
  EXPECT_TRUE(mat_expm1(MatrixXd::Zero(2, 2)).isZero(0.0));
}

TEST(InverseDet, Examples) {
  const auto id = inverse_det(MatrixXd::Identity(2, 2));
  EXPECT_TRUE(id.inverse.isIdentity(0.0));
  EXPECT_DOUBLE_EQ(id.det, 1.0);

  const auto d = inverse_det(diag({2, 4}));
  EXPECT_LE(rel_err(d.inverse, diag({0.5, 0.25})), 1e-16);
  EXPECT_DOUBLE_EQ(d.det, 8.0);

  const MatrixXd m = mat2(1, 1, 0, 1);
  const auto u = inverse_det(m);
  EXPECT_LE((m * u.inverse - MatrixXd::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LE(rel_err(u.inverse, mat2(1, -1, 0, 1)), 1e-16);
  EXPECT_DOUBLE_EQ(u.det, 1.0);
}

TEST(InverseDet, SingularThresholdIsScaleAware) {
  try {
    inverse_det(mat2(1, 2, 2, 4));
    FAIL() << "expected Singular";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Singular);
  }
  EXPECT_THROW(inverse_det(MatrixXd::Zero(3, 3)), Error);
  // Tiny but well-conditioned: det = 1e-30, well above 1e-12 (||M||/sqrt n)^n.
  EXPECT_NO_THROW(inverse_det(diag({1e-15, 1e-15})));
}

TEST(InverseDet, DeterminantIsMultiplicative) {
  NormalStream normal(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 5;
    const MatrixXd m = testing::random_matrix(normal, n);
    const MatrixXd k = testing::random_matrix(normal, n);
    const double lhs = inverse_det(MatrixXd(m * k)).det;
    const double rhs = inverse_det(m).det * inverse_det(k).det;
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::abs(rhs));
    EXPECT_LE((m * inverse_det(m).inverse - MatrixXd::Identity(n, n)).norm(),
              1e-10 * std::max(1.0, m.norm() * inverse_det(m).inverse.norm()));
  }
}

}  // namespace
}  // namespace polarflow
