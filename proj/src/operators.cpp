#include "mmgks/operators.hpp"

#include <numeric>
#include <sstream>
#include <utility>

namespace mmgks {

namespace detail {

using ConstMap = Eigen::Map<const Vector>;
using MutMap = Eigen::Map<Vector>;

inline ConstMap view(std::span<const double> s) { return {s.data(), Index(s.size())}; }
inline MutMap view(std::span<double> s) { return {s.data(), Index(s.size())}; }

class OperatorNode {
 public:
  explicit OperatorNode(Shape shape) : shape_(shape) {}
  virtual ~OperatorNode() = default;

  Shape shape() const { return shape_; }
  virtual LinearOperator::Kind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual void forward(std::span<const double> x, std::span<double> y) const = 0;
  virtual void adjoint(std::span<const double> y, std::span<double> x) const = 0;
  virtual std::vector<LinearOperator> children() const { return {}; }

 private:
  Shape shape_;
};

namespace {

using Kind = LinearOperator::Kind;

class DenseNode final : public OperatorNode {
 public:
  explicit DenseNode(Matrix m) : OperatorNode({m.rows(), m.cols()}), m_(std::move(m)) {}
  Kind kind() const override { return Kind::dense; }
  std::string describe() const override {
    return "dense(" + std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()) + ")";
  }
  void forward(std::span<const double> x, std::span<double> y) const override {
    view(y).noalias() = m_ * view(x);
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    view(x).noalias() = m_.transpose() * view(y);
  }

 private:
  Matrix m_;
};

class IdentityNode final : public OperatorNode {
 public:
  explicit IdentityNode(Index n) : OperatorNode({n, n}) {}
  Kind kind() const override { return Kind::identity; }
  std::string describe() const override { return "I(" + std::to_string(shape().rows) + ")"; }
  void forward(std::span<const double> x, std::span<double> y) const override {
    std::copy(x.begin(), x.end(), y.begin());
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    std::copy(y.begin(), y.end(), x.begin());
  }
};

class DiffNode final : public OperatorNode {
 public:
  DiffNode(Index n, double alpha, bool padded)
      : OperatorNode({padded ? n : n - 1, n}), n_(n), alpha_(alpha), padded_(padded) {}
  Kind kind() const override { return Kind::diff; }
  std::string describe() const override {
    std::ostringstream os;
    os << (padded_ ? "L0(" : "L(") << n_;
    if (alpha_ != 1.0) os << ", alpha=" << alpha_;
    os << ")";
    return os.str();
  }
  void forward(std::span<const double> x, std::span<double> y) const override {
    for (Index i = 0; i + 1 < n_; ++i) y[i] = alpha_ * (x[i] - x[i + 1]);
    if (padded_) y[n_ - 1] = 0.0;
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    // rows n-1 (the padding row, if any) never contribute
    const Index m = n_ - 1;
    x[0] = alpha_ * y[0];
    for (Index j = 1; j < m; ++j) x[j] = alpha_ * (y[j] - y[j - 1]);
    x[m] = -alpha_ * y[m - 1];
  }

 private:
  Index n_;
  double alpha_;
  bool padded_;
};

class KronNode final : public OperatorNode {
 public:
  KronNode(LinearOperator left, LinearOperator right)
      : OperatorNode({left.rows() * right.rows(), left.cols() * right.cols()}),
        left_(std::move(left)),
        right_(std::move(right)) {}
  Kind kind() const override { return Kind::kron; }
  std::string describe() const override {
    return "kron(" + left_.describe() + ", " + right_.describe() + ")";
  }
  std::vector<LinearOperator> children() const override { return {left_, right_}; }

  // (L (x) R) vec(X) = vec(R X L^T) with X of size R.cols x L.cols.
  void forward(std::span<const double> x, std::span<double> y) const override {
    apply_impl(x, y, false);
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    apply_impl(y, x, true);
  }

 private:
  void apply_impl(std::span<const double> in, std::span<double> out, bool transposed) const {
    const Index r_in = transposed ? right_.rows() : right_.cols();
    const Index r_out = transposed ? right_.cols() : right_.rows();
    const Index l_in = transposed ? left_.rows() : left_.cols();
    const Index l_out = transposed ? left_.cols() : left_.rows();
    const bool left_identity = left_.kind() == Kind::identity;
    const bool right_identity = right_.kind() == Kind::identity;

    auto apply_right = [&](std::span<const double> a, std::span<double> b) {
      transposed ? right_.apply_adjoint(a, b) : right_.apply(a, b);
    };
    auto apply_left = [&](std::span<const double> a, std::span<double> b) {
      transposed ? left_.apply_adjoint(a, b) : left_.apply(a, b);
    };

    if (left_identity) {
      for (Index c = 0; c < l_in; ++c) {
        apply_right(in.subspan(c * r_in, r_in), out.subspan(c * r_out, r_out));
      }
      return;
    }

    // Stage 1: Z = R X, size r_out x l_in.
    std::vector<double> z_storage;
    std::span<const double> z;
    if (right_identity) {
      z = in;
    } else {
      z_storage.resize(std::size_t(r_out * l_in));
      for (Index c = 0; c < l_in; ++c) {
        apply_right(in.subspan(c * r_in, r_in),
                    std::span<double>(z_storage).subspan(c * r_out, r_out));
      }
      z = z_storage;
    }

    // Stage 2: Y = Z L^T, one row of Z at a time.
    std::vector<double> row_in(std::size_t(l_in), 0.0);
    std::vector<double> row_out(std::size_t(l_out), 0.0);
    for (Index i = 0; i < r_out; ++i) {
      for (Index c = 0; c < l_in; ++c) row_in[c] = z[i + c * r_out];
      apply_left(row_in, row_out);
      for (Index c = 0; c < l_out; ++c) out[i + c * r_out] = row_out[c];
    }
  }

  LinearOperator left_;
  LinearOperator right_;
};

Shape blockdiag_shape(const std::vector<LinearOperator>& blocks) {
  Shape s;
  for (const auto& b : blocks) {
    s.rows += b.rows();
    s.cols += b.cols();
  }
  return s;
}

class BlockDiagNode final : public OperatorNode {
 public:
  explicit BlockDiagNode(std::vector<LinearOperator> blocks)
      : OperatorNode(blockdiag_shape(blocks)), blocks_(std::move(blocks)) {}
  Kind kind() const override { return Kind::blockdiag; }
  std::string describe() const override {
    return "blockdiag[" + std::to_string(blocks_.size()) + "]";
  }
  std::vector<LinearOperator> children() const override { return blocks_; }
  void forward(std::span<const double> x, std::span<double> y) const override {
    Index ro = 0, co = 0;
    for (const auto& b : blocks_) {
      b.apply(x.subspan(co, b.cols()), y.subspan(ro, b.rows()));
      ro += b.rows();
      co += b.cols();
    }
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    Index ro = 0, co = 0;
    for (const auto& b : blocks_) {
      b.apply_adjoint(y.subspan(ro, b.rows()), x.subspan(co, b.cols()));
      ro += b.rows();
      co += b.cols();
    }
  }

 private:
  std::vector<LinearOperator> blocks_;
};

class VStackNode final : public OperatorNode {
 public:
  VStackNode(std::vector<LinearOperator> blocks, Shape shape)
      : OperatorNode(shape), blocks_(std::move(blocks)) {}
  Kind kind() const override { return Kind::vstack; }
  std::string describe() const override {
    std::string s = "vstack[";
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (i) s += "; ";
      s += blocks_[i].describe();
    }
    return s + "]";
  }
  std::vector<LinearOperator> children() const override { return blocks_; }
  void forward(std::span<const double> x, std::span<double> y) const override {
    Index ro = 0;
    for (const auto& b : blocks_) {
      b.apply(x, y.subspan(ro, b.rows()));
      ro += b.rows();
    }
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    auto acc = view(x);
    acc.setZero();
    Vector tmp(acc.size());
    Index ro = 0;
    for (const auto& b : blocks_) {
      b.apply_adjoint(y.subspan(ro, b.rows()), std::span<double>(tmp.data(), tmp.size()));
      acc += tmp;
      ro += b.rows();
    }
  }

 private:
  std::vector<LinearOperator> blocks_;
};

class DiagonalNode final : public OperatorNode {
 public:
  explicit DiagonalNode(Vector w) : OperatorNode({w.size(), w.size()}), w_(std::move(w)) {}
  Kind kind() const override { return Kind::diagonal; }
  std::string describe() const override { return "diag(" + std::to_string(w_.size()) + ")"; }
  void forward(std::span<const double> x, std::span<double> y) const override {
    view(y) = w_.cwiseProduct(view(x));
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    view(x) = w_.cwiseProduct(view(y));
  }

 private:
  Vector w_;
};

class ComposedNode final : public OperatorNode {
 public:
  ComposedNode(LinearOperator outer, LinearOperator inner)
      : OperatorNode({outer.rows(), inner.cols()}),
        outer_(std::move(outer)),
        inner_(std::move(inner)) {}
  Kind kind() const override { return Kind::composed; }
  std::string describe() const override {
    return outer_.describe() + " * " + inner_.describe();
  }
  std::vector<LinearOperator> children() const override { return {outer_, inner_}; }
  void forward(std::span<const double> x, std::span<double> y) const override {
    std::vector<double> tmp(std::size_t(inner_.rows()));
    inner_.apply(x, tmp);
    outer_.apply(tmp, y);
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    std::vector<double> tmp(std::size_t(outer_.cols()));
    outer_.apply_adjoint(y, tmp);
    inner_.apply_adjoint(tmp, x);
  }

 private:
  LinearOperator outer_;
  LinearOperator inner_;
};

class ScaledNode final : public OperatorNode {
 public:
  ScaledNode(double c, LinearOperator op) : OperatorNode(op.shape()), c_(c), op_(std::move(op)) {}
  Kind kind() const override { return Kind::scaled; }
  std::string describe() const override {
    std::ostringstream os;
    os << c_ << "*" << op_.describe();
    return os.str();
  }
  std::vector<LinearOperator> children() const override { return {op_}; }
  void forward(std::span<const double> x, std::span<double> y) const override {
    op_.apply(x, y);
    view(y) *= c_;
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    op_.apply_adjoint(y, x);
    view(x) *= c_;
  }

 private:
  double c_;
  LinearOperator op_;
};

class CustomNode final : public OperatorNode {
 public:
  CustomNode(Shape shape, LinearOperator::ApplyFn fwd, LinearOperator::ApplyFn adj,
             std::string label)
      : OperatorNode(shape), fwd_(std::move(fwd)), adj_(std::move(adj)), label_(std::move(label)) {}
  Kind kind() const override { return Kind::custom; }
  std::string describe() const override { return label_; }
  void forward(std::span<const double> x, std::span<double> y) const override { fwd_(x, y); }
  void adjoint(std::span<const double> y, std::span<double> x) const override { adj_(y, x); }

 private:
  LinearOperator::ApplyFn fwd_;
  LinearOperator::ApplyFn adj_;
  std::string label_;
};

}  // namespace
}  // namespace detail

LinearOperator::LinearOperator() : LinearOperator(std::make_shared<detail::IdentityNode>(0)) {}

LinearOperator::LinearOperator(std::shared_ptr<const detail::OperatorNode> node)
    : node_(std::move(node)) {}

LinearOperator LinearOperator::dense(Matrix m) {
  return LinearOperator(std::make_shared<detail::DenseNode>(std::move(m)));
}

LinearOperator LinearOperator::identity(Index n) {
  if (n < 0) throw DimensionError("identity: negative size");
  return LinearOperator(std::make_shared<detail::IdentityNode>(n));
}

LinearOperator LinearOperator::diff(Index n, double alpha, bool padded) {
  if (n < 2) throw DimensionError("diff: need n >= 2, got " + std::to_string(n));
  if (!(alpha > 0.0)) throw DimensionError("diff: alpha must be positive");
  return LinearOperator(std::make_shared<detail::DiffNode>(n, alpha, padded));
}

LinearOperator LinearOperator::kron(const LinearOperator& left, const LinearOperator& right) {
  return LinearOperator(std::make_shared<detail::KronNode>(left, right));
}

LinearOperator LinearOperator::blockdiag(std::vector<LinearOperator> blocks) {
  if (blocks.size() == 1) return blocks.front();
  return LinearOperator(std::make_shared<detail::BlockDiagNode>(std::move(blocks)));
}

LinearOperator LinearOperator::vstack(std::vector<LinearOperator> blocks) {
  if (blocks.empty()) throw ShapeError("vstack: no blocks");
  Shape s{0, blocks.front().cols()};
  for (const auto& b : blocks) {
    if (b.cols() != s.cols) {
      throw ShapeError("vstack: column mismatch (" + std::to_string(b.cols()) + " vs " +
                       std::to_string(s.cols) + ")");
    }
    s.rows += b.rows();
  }
  return LinearOperator(std::make_shared<detail::VStackNode>(std::move(blocks), s));
}

LinearOperator LinearOperator::diagonal(Vector weights) {
  return LinearOperator(std::make_shared<detail::DiagonalNode>(std::move(weights)));
}

LinearOperator LinearOperator::compose(const LinearOperator& outer, const LinearOperator& inner) {
  if (outer.cols() != inner.rows()) {
    throw ShapeError("compose: outer has " + std::to_string(outer.cols()) +
                     " columns but inner has " + std::to_string(inner.rows()) + " rows");
  }
  return LinearOperator(std::make_shared<detail::ComposedNode>(outer, inner));
}

LinearOperator LinearOperator::scaled(double factor, const LinearOperator& op) {
  return LinearOperator(std::make_shared<detail::ScaledNode>(factor, op));
}

LinearOperator LinearOperator::custom(Shape shape, ApplyFn forward, ApplyFn adjoint,
                                      std::string label) {
  if (!forward || !adjoint) throw std::invalid_argument("custom operator needs both kernels");
  return LinearOperator(std::make_shared<detail::CustomNode>(shape, std::move(forward),
                                                             std::move(adjoint), std::move(label)));
}

Shape LinearOperator::shape() const { return node_->shape(); }
LinearOperator::Kind LinearOperator::kind() const { return node_->kind(); }
std::string LinearOperator::describe() const { return node_->describe(); }
std::vector<LinearOperator> LinearOperator::children() const { return node_->children(); }

void LinearOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (Index(x.size()) != cols() || Index(y.size()) != rows()) {
    throw ShapeError("apply: " + describe() + " is " + std::to_string(rows()) + "x" +
                     std::to_string(cols()) + ", got input " + std::to_string(x.size()) +
                     " / output " + std::to_string(y.size()));
  }
  node_->forward(x, y);
}

void LinearOperator::apply_adjoint(std::span<const double> y, std::span<double> x) const {
  if (Index(y.size()) != rows() || Index(x.size()) != cols()) {
    throw ShapeError("apply_adjoint: " + describe() + " is " + std::to_string(rows()) + "x" +
                     std::to_string(cols()) + ", got input " + std::to_string(y.size()) +
                     " / output " + std::to_string(x.size()));
  }
  node_->adjoint(y, x);
}

Vector LinearOperator::apply(const Vector& x) const {
  Vector y(rows());
  apply(std::span<const double>(x.data(), std::size_t(x.size())),
        std::span<double>(y.data(), std::size_t(y.size())));
  return y;
}

Vector LinearOperator::apply_adjoint(const Vector& y) const {
  Vector x(cols());
  apply_adjoint(std::span<const double>(y.data(), std::size_t(y.size())),
                std::span<double>(x.data(), std::size_t(x.size())));
  return x;
}

Matrix LinearOperator::apply_columns(const Matrix& x) const {
  if (x.rows() != cols()) throw ShapeError("apply_columns: row count mismatch");
  Matrix y(rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    apply(std::span<const double>(x.col(c).data(), std::size_t(x.rows())),
          std::span<double>(y.col(c).data(), std::size_t(y.rows())));
  }
  return y;
}

Matrix LinearOperator::to_dense() const {
  if (cols() > kMaxDenseCols) {
    throw ShapeError("to_dense: " + std::to_string(cols()) + " columns exceeds limit of " +
                     std::to_string(kMaxDenseCols));
  }
  return apply_columns(Matrix::Identity(cols(), cols()));
}

LinearOperator build_diff(Index n, double alpha, bool padded) {
  return LinearOperator::diff(n, alpha, padded);
}

LinearOperator build_Ls(Index n_v, Index n_h, double alpha_v, double alpha_h) {
  if (n_v < 2 || n_h < 2) {
    throw ShapeError("build_Ls: image must be at least 2x2, got " + std::to_string(n_v) + "x" +
                     std::to_string(n_h));
  }
  using Op = LinearOperator;
  return Op::vstack({Op::kron(Op::identity(n_h), build_diff(n_v, alpha_v)),
                     Op::kron(build_diff(n_h, alpha_h), Op::identity(n_v))});
}

// ---------------------------------------------------------------------------

Tensor3::Tensor3(Index n1, Index n2, Index n3) : ext_{n1, n2, n3}, data_(Vector::Zero(n1 * n2 * n3)) {}

Tensor3::Tensor3(Index n1, Index n2, Index n3, Vector data)
    : ext_{n1, n2, n3}, data_(std::move(data)) {
  if (data_.size() != n1 * n2 * n3) throw ShapeError("Tensor3: data length does not match extents");
}

Index Tensor3::extent(int mode) const {
  if (mode < 1 || mode > 3) throw ShapeError("Tensor3: mode must be 1, 2 or 3");
  return ext_[std::size_t(mode - 1)];
}

Matrix Tensor3::unfold(int mode) const {
  const auto [n1, n2, n3] = ext_;
  switch (mode) {
    case 1: {
      Matrix m(n1, n2 * n3);
      for (Index k = 0; k < n3; ++k)
        for (Index j = 0; j < n2; ++j)
          for (Index i = 0; i < n1; ++i) m(i, j + n2 * k) = (*this)(i, j, k);
      return m;
    }
    case 2: {
      Matrix m(n2, n1 * n3);
      for (Index k = 0; k < n3; ++k)
        for (Index j = 0; j < n2; ++j)
          for (Index i = 0; i < n1; ++i) m(j, i + n1 * k) = (*this)(i, j, k);
      return m;
    }
    case 3: {
      Matrix m(n3, n1 * n2);
      for (Index k = 0; k < n3; ++k)
        for (Index j = 0; j < n2; ++j)
          for (Index i = 0; i < n1; ++i) m(k, i + n1 * j) = (*this)(i, j, k);
      return m;
    }
    default:
      throw ShapeError("unfold: mode must be 1, 2 or 3");
  }
}

Matrix Tensor3::frontal_slice(Index k) const {
  const Index n1 = ext_[0], n2 = ext_[1];
  return Eigen::Map<const Matrix>(data_.data() + k * n1 * n2, n1, n2);
}

Tensor3 mode_product(const Tensor3& t, const LinearOperator& m, int mode) {
  if (mode < 1 || mode > 3) throw ShapeError("mode_product: mode must be 1, 2 or 3");
  auto ext = t.extents();
  const auto axis = std::size_t(mode - 1);
  if (m.cols() != ext[axis]) {
    throw ShapeError("mode_product: operator has " + std::to_string(m.cols()) +
                     " columns but mode " + std::to_string(mode) + " has extent " +
                     std::to_string(ext[axis]));
  }
  auto out_ext = ext;
  out_ext[axis] = m.rows();
  Tensor3 out(out_ext[0], out_ext[1], out_ext[2]);

  // Strides of the chosen axis in the input and output layouts.
  const std::array<Index, 3> in_stride{1, ext[0], ext[0] * ext[1]};
  const std::array<Index, 3> out_stride{1, out_ext[0], out_ext[0] * out_ext[1]};
  const std::size_t a = (axis + 1) % 3, b = (axis + 2) % 3;

  std::vector<double> fiber_in(std::size_t(ext[axis]));
  std::vector<double> fiber_out(std::size_t(m.rows()));
  const double* src = t.vec().data();
  double* dst = out.vec().data();
  for (Index p = 0; p < ext[a]; ++p) {
    for (Index q = 0; q < ext[b]; ++q) {
      const Index in_base = p * in_stride[a] + q * in_stride[b];
      const Index out_base = p * out_stride[a] + q * out_stride[b];
      for (Index r = 0; r < ext[axis]; ++r) fiber_in[r] = src[in_base + r * in_stride[axis]];
      m.apply(fiber_in, fiber_out);
      for (Index r = 0; r < m.rows(); ++r) dst[out_base + r * out_stride[axis]] = fiber_out[r];
    }
  }
  return out;
}

}  // namespace mmgks
