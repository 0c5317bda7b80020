#include "mmgks/operators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mmgks;
using Op = LinearOperator;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(Index(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double max_rel(const Vector& a, const Vector& b) {
  const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace

TEST(Diff, ConstantInNullSpace) {
  EXPECT_EQ(build_diff(3).apply(vec({1, 1, 1})), vec({0, 0}));
}

TEST(Diff, Stencil) {
  EXPECT_EQ(build_diff(3).apply(vec({3, 1, 0})), vec({2, 1}));
  EXPECT_EQ(build_diff(3, 1.0, true).apply(vec({3, 1, 0})), vec({2, 1, 0}));
  EXPECT_EQ(build_diff(3, 2.5).apply(vec({3, 1, 0})), vec({5, 2.5}));
}

TEST(Diff, Shapes) {
  EXPECT_EQ(build_diff(5).shape(), (Shape{4, 5}));
  EXPECT_EQ(build_diff(5, 1.0, true).shape(), (Shape{5, 5}));
}

TEST(Diff, RejectsTooSmall) {
  EXPECT_THROW(build_diff(1), DimensionError);
  EXPECT_THROW(build_diff(0), DimensionError);
  EXPECT_THROW(build_diff(4, 0.0), DimensionError);
}

TEST(Diff, RankIsOneLessThanSize) {
  for (Index n : {2, 3, 7, 12}) {
    const Matrix l = build_diff(n).to_dense();
    Eigen::FullPivLU<Matrix> lu(l);
    EXPECT_EQ(lu.rank(), n - 1);
    EXPECT_LT(l.rowwise().sum().norm(), 1e-15);
    EXPECT_TRUE(l.isApprox(oracle::diff(n)));
    EXPECT_TRUE(build_diff(n, 1.0, true).to_dense().isApprox(oracle::diff(n, true)));
  }
}

TEST(Apply, IdentityReturnsInput) {
  EXPECT_EQ(Op::identity(4).apply(vec({1, 2, 3, 4})), vec({1, 2, 3, 4}));
}

TEST(Apply, KronOfIdentityAndDiff) {
  const Op k = Op::kron(Op::identity(2), build_diff(2));
  const Vector x = vec({3, 1, 5, 2});
  const Vector expected = oracle::kron(oracle::eye(2), oracle::diff(2)) * x;
  EXPECT_EQ(k.apply(x), expected);
  EXPECT_EQ(k.apply(x), vec({2, 3}));
}

TEST(Apply, BlockDiagonal) {
  const Op b = Op::blockdiag({Op::identity(2), 2.0 * Op::identity(2)});
  Matrix dense = Matrix::Zero(4, 4);
  dense.topLeftCorner(2, 2) = oracle::eye(2);
  dense.bottomRightCorner(2, 2) = 2.0 * oracle::eye(2);
  EXPECT_EQ(b.apply(Vector::Ones(4)), dense * Vector::Ones(4));
  EXPECT_EQ(b.apply(Vector::Ones(4)), vec({1, 1, 2, 2}));
}

TEST(Apply, ShapeMismatchThrows) {
  EXPECT_THROW(Op::identity(3).apply(Vector::Ones(4)), ShapeError);
  EXPECT_THROW(build_diff(4).apply_adjoint(Vector::Ones(4)), ShapeError);
  EXPECT_THROW(Op::vstack({Op::identity(2), Op::identity(3)}), ShapeError);
  EXPECT_THROW(Op::compose(Op::identity(2), Op::identity(3)), ShapeError);
}

TEST(Apply, ShapesOfCompositions) {
  const Op a = Op::dense(Matrix::Ones(3, 2));
  const Op b = build_diff(4);
  EXPECT_EQ(Op::kron(a, b).shape(), (Shape{9, 8}));
  EXPECT_EQ(Op::vstack({b, Op::identity(4)}).shape(), (Shape{7, 4}));
  EXPECT_EQ(Op::blockdiag({a, b}).shape(), (Shape{6, 6}));
}

TEST(Apply, ToDenseRefusesLargeOperators) {
  EXPECT_THROW(Op::identity(kMaxDenseCols + 1).to_dense(), ShapeError);
  EXPECT_NO_THROW(Op::identity(16).to_dense());
}

TEST(Apply, CustomOperatorMatchesKernels) {
  const Matrix m = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const Op c = Op::custom(
      {2, 3},
      [&](std::span<const double> x, std::span<double> y) {
        Eigen::Map<Vector>(y.data(), 2) = m * Eigen::Map<const Vector>(x.data(), 3);
      },
      [&](std::span<const double> y, std::span<double> x) {
        Eigen::Map<Vector>(x.data(), 3) = m.transpose() * Eigen::Map<const Vector>(y.data(), 2);
      },
      "test");
  EXPECT_EQ(c.to_dense(), m);
  EXPECT_EQ(c.kind(), Op::Kind::custom);
}

TEST(Kron, MatchesDenseOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<Index> sz(1, 5);
    const Matrix a = oracle::random_matrix(sz(rng), sz(rng), rng);
    const Matrix b = oracle::random_matrix(sz(rng), sz(rng), rng);
    const Op k = Op::kron(Op::dense(a), Op::dense(b));
    const Matrix expected = oracle::kron(a, b);
    const Vector x = oracle::random_vector(expected.cols(), rng);
    const Vector y = oracle::random_vector(expected.rows(), rng);
    EXPECT_LT(max_rel(k.apply(x), expected * x), 1e-12);
    EXPECT_LT(max_rel(k.apply_adjoint(y), expected.transpose() * y), 1e-12);
  }
}

TEST(Kron, NestedMatchesDenseOracle) {
  const Op k = Op::kron(build_diff(3), Op::kron(build_diff(4, 1.0, true), build_diff(2)));
  const Matrix expected = oracle::kron(oracle::diff(3), oracle::kron(oracle::diff(4, true), oracle::diff(2)));
  EXPECT_TRUE(k.to_dense().isApprox(expected, 1e-14));
}

TEST(Adjoint, RandomCompositions) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Index> cols(1, 12);
  std::uniform_int_distribution<int> depth(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const Op a = oracle::random_operator(rng, depth(rng), cols(rng));
    const Vector x = oracle::random_vector(a.cols(), rng);
    const Vector y = oracle::random_vector(a.rows(), rng);
    const double lhs = a.apply(x).dot(y);
    const double rhs = x.dot(a.apply_adjoint(y));
    const double scale = a.apply(x).norm() * y.norm() + x.norm() * a.apply_adjoint(y).norm();
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(scale, 1e-300)) << a.describe();
  }
}

TEST(Adjoint, ApplyColumnsMatchesDense) {
  std::mt19937_64 rng(3);
  const Op a = oracle::random_operator(rng, 3, 12);
  const Matrix x = oracle::random_matrix(12, 4, rng);
  EXPECT_TRUE(a.apply_columns(x).isApprox(a.to_dense() * x, 1e-12));
}

TEST(Ls, ShapeAndValues) {
  const Op ls = build_Ls(2, 2);
  EXPECT_EQ(ls.shape(), (Shape{4, 4}));
  // U = [[1, 0], [1, 0]] column-major
  const Vector u = vec({1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(ls.apply(u).lpNorm<1>(), 2.0);
  EXPECT_EQ(ls.apply(Vector::Constant(4, 3.0)), Vector::Zero(4));
  EXPECT_EQ(build_Ls(3, 5).shape(), (Shape{2 * 5 + 4 * 3, 15}));
  EXPECT_THROW(build_Ls(1, 4), ShapeError);
}

TEST(Tensor, VecRoundTrip) {
  std::mt19937_64 rng(5);
  for (auto [a, b, c] : std::vector<std::array<Index, 3>>{{1, 1, 1}, {3, 4, 2}, {5, 2, 3}}) {
    const Vector v = oracle::random_vector(a * b * c, rng);
    const Tensor3 t(a, b, c, v);
    EXPECT_EQ(t.vec(), v);
    for (Index k = 0; k < c; ++k) {
      const Matrix slice = t.frontal_slice(k);
      EXPECT_EQ(Eigen::Map<const Vector>(slice.data(), a * b), v.segment(k * a * b, a * b));
    }
    for (Index k = 0; k < c; ++k) {
      for (Index j = 0; j < b; ++j) {
        for (Index i = 0; i < a; ++i) EXPECT_EQ(t(i, j, k), v[i + a * (j + b * k)]);
      }
    }
  }
}

TEST(Tensor, ModeThreeUnfoldingTransposedIsSequenceMatrix) {
  std::mt19937_64 rng(2);
  const Tensor3 t(3, 2, 4, oracle::random_vector(24, rng));
  const Matrix u = Eigen::Map<const Matrix>(t.vec().data(), 6, 4);
  EXPECT_EQ(t.unfold(3).transpose(), u);
}

TEST(ModeProduct, IdentityLeavesTensor) {
  std::mt19937_64 rng(9);
  const Tensor3 t(3, 4, 2, oracle::random_vector(24, rng));
  EXPECT_EQ(mode_product(t, Op::identity(3), 1).vec(), t.vec());
}

TEST(ModeProduct, AllModesMatchKronecker) {
  std::mt19937_64 rng(1);
  const Tensor3 t(3, 3, 2, oracle::random_vector(18, rng));
  Tensor3 y = mode_product(t, build_diff(3), 1);
  y = mode_product(y, build_diff(3), 2);
  y = mode_product(y, build_diff(2), 3);
  const Matrix k = oracle::kron(oracle::diff(2), oracle::kron(oracle::diff(3), oracle::diff(3)));
  EXPECT_LT(max_rel(y.vec(), k * t.vec()), 1e-12);
  EXPECT_EQ(y.extents(), (std::array<Index, 3>{2, 2, 1}));
}

TEST(ModeProduct, DistinctModesCommute) {
  std::mt19937_64 rng(4);
  const Tensor3 t(4, 3, 2, oracle::random_vector(24, rng));
  const Op a = Op::dense(oracle::random_matrix(5, 4, rng));
  const Op b = Op::dense(oracle::random_matrix(2, 3, rng));
  const Tensor3 ab = mode_product(mode_product(t, a, 1), b, 2);
  const Tensor3 ba = mode_product(mode_product(t, b, 2), a, 1);
  EXPECT_LT(max_rel(ab.vec(), ba.vec()), 1e-14);
}

TEST(ModeProduct, UnfoldingIdentity) {
  std::mt19937_64 rng(8);
  const Tensor3 t(3, 4, 2, oracle::random_vector(24, rng));
  for (int mode = 1; mode <= 3; ++mode) {
    const Matrix m = oracle::random_matrix(3, t.extent(mode), rng);
    const Tensor3 y = mode_product(t, Op::dense(m), mode);
    EXPECT_TRUE(y.unfold(mode).isApprox(m * t.unfold(mode), 1e-13));
  }
}

TEST(ModeProduct, Errors) {
  const Tensor3 t(3, 4, 2);
  EXPECT_THROW(mode_product(t, Op::identity(3), 4), ShapeError);
  EXPECT_THROW(mode_product(t, Op::identity(3), 2), ShapeError);
  EXPECT_THROW(Tensor3(2, 2, 2, Vector::Zero(7)), ShapeError);
}
