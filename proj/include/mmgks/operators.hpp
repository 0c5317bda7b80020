#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmgks {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when operand extents do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a size parameter is outside the operator's domain (e.g. n < 2).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  Index rows = 0;
  Index cols = 0;

  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {
class OperatorNode;
}

/// Largest column count for which to_dense() will materialize an operator.
inline constexpr Index kMaxDenseCols = 4096;

/*
 * Immutable, matrix-free linear operator.
 *
 * A LinearOperator is a cheap handle onto a shared, immutable expression
 * node. Kronecker products, stacks and block-diagonal compositions never
 * materialize their factors; apply() walks the expression. Vectors are
 * column-major vectorizations (first index fastest) throughout.
 */
class LinearOperator {
 public:
  enum class Kind {
    dense,
    diff,
    identity,
    kron,
    blockdiag,
    vstack,
    diagonal,
    composed,
    scaled,
    custom
  };

  using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

  LinearOperator();  // 0x0 identity

  static LinearOperator dense(Matrix m);
  static LinearOperator identity(Index n);
  /// First-difference stencil alpha*[1, -1]; `padded` appends a zero row.
  static LinearOperator diff(Index n, double alpha = 1.0, bool padded = false);
  static LinearOperator kron(const LinearOperator& left, const LinearOperator& right);
  static LinearOperator blockdiag(std::vector<LinearOperator> blocks);
  static LinearOperator vstack(std::vector<LinearOperator> blocks);
  static LinearOperator diagonal(Vector weights);
  /// outer * inner
  static LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner);
  static LinearOperator scaled(double factor, const LinearOperator& op);
  /// Wraps externally supplied forward/adjoint kernels. Both must write every
  /// entry of their output span.
  static LinearOperator custom(Shape shape, ApplyFn forward, ApplyFn adjoint, std::string label);

  Shape shape() const;
  Index rows() const { return shape().rows; }
  Index cols() const { return shape().cols; }
  Kind kind() const;
  std::string describe() const;

  Vector apply(const Vector& x) const;
  Vector apply_adjoint(const Vector& y) const;

  /// Span versions; output spans must not alias the input.
  void apply(std::span<const double> x, std::span<double> y) const;
  void apply_adjoint(std::span<const double> y, std::span<double> x) const;

  /// Applies the operator to every column of `x`.
  Matrix apply_columns(const Matrix& x) const;

  /// Explicit matrix; only for cols() <= kMaxDenseCols.
  Matrix to_dense() const;

  /// Blocks of a vstack/blockdiag operator, factors of kron/composed, empty otherwise.
  std::vector<LinearOperator> children() const;

 private:
  explicit LinearOperator(std::shared_ptr<const detail::OperatorNode> node);
  std::shared_ptr<const detail::OperatorNode> node_;
};

inline LinearOperator operator*(double c, const LinearOperator& op) {
  return LinearOperator::scaled(c, op);
}

/// Rescaled first-difference matrix L_d (n-1 x n) or its zero-row augmented
/// variant (n x n). Throws DimensionError for n < 2 or alpha <= 0.
LinearOperator build_diff(Index n, double alpha = 1.0, bool padded = false);

/// Spatial gradient [I_{nh} (x) L_v ; L_h (x) I_{nv}].
LinearOperator build_Ls(Index n_v, Index n_h, double alpha_v = 1.0, double alpha_h = 1.0);

/// Third-order tensor stored as vec(U): index (i, j, t) lives at i + n1*(j + n2*t).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Index n1, Index n2, Index n3);
  Tensor3(Index n1, Index n2, Index n3, Vector data);

  Index extent(int mode) const;
  std::array<Index, 3> extents() const { return ext_; }
  Index size() const { return ext_[0] * ext_[1] * ext_[2]; }

  double& operator()(Index i, Index j, Index k) { return data_[i + ext_[0] * (j + ext_[1] * k)]; }
  double operator()(Index i, Index j, Index k) const {
    return data_[i + ext_[0] * (j + ext_[1] * k)];
  }

  const Vector& vec() const { return data_; }
  Vector& vec() { return data_; }

  /// Mode-j unfolding X_(j) (columns are mode-j fibers).
  Matrix unfold(int mode) const;
  /// Frontal slice k as an n1 x n2 matrix.
  Matrix frontal_slice(Index k) const;

 private:
  std::array<Index, 3> ext_{0, 0, 0};
  Vector data_;
};

/// Y = X x_mode M, i.e. Y_(mode) = M X_(mode). `mode` is 1, 2 or 3.
Tensor3 mode_product(const Tensor3& t, const LinearOperator& m, int mode);

}  // namespace mmgks
