#include "mmgks/forward.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mmgks {

BlurModel BlurModel::medium(Index image_side) {
  const double scale = double(image_side) / 128.0;
  return {2.0 * scale, std::max(1, int(std::lround(6.0 * scale)))};
}

Matrix gaussian_blur_matrix(Index n, const BlurModel& model) {
  if (n < 1) throw DimensionError("blur: empty dimension");
  if (model.bandwidth < 0) throw std::invalid_argument("blur: negative bandwidth");
  if (model.bandwidth == 0) return Matrix::Identity(n, n);
  if (!(model.sigma_psf > 0.0)) throw std::invalid_argument("blur: sigma_psf must be positive");

  const int hw = model.bandwidth;
  std::vector<double> kernel(std::size_t(2 * hw + 1));
  double total = 0.0;
  for (int k = -hw; k <= hw; ++k) {
    const double v = std::exp(-0.5 * k * k / (model.sigma_psf * model.sigma_psf));
    kernel[std::size_t(k + hw)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;

  // Symmetric kernel, so the circulant is symmetric too.
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (int k = -hw; k <= hw; ++k) {
      const Index j = ((i + k) % n + n) % n;
      a(i, j) += kernel[std::size_t(k + hw)];
    }
  }
  return a;
}

LinearOperator build_blur_operator(const BlurModel& model, Index n_v, Index n_h) {
  return LinearOperator::kron(LinearOperator::dense(gaussian_blur_matrix(n_h, model)),
                              LinearOperator::dense(gaussian_blur_matrix(n_v, model)));
}

// ---------------------------------------------------------------------------

Index RadonModel::detectors() const {
  if (n_detectors > 0) return n_detectors;
  return Index(std::ceil(std::sqrt(2.0) * double(image_side)));
}

double RadonModel::stride() const {
  return angle_stride_deg > 0.0 ? angle_stride_deg : double(n_t);
}

std::vector<double> RadonModel::angles(Index t) const {
  if (t < 1 || t > n_t) {
    throw std::out_of_range("radon: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(n_t) + "]");
  }
  std::vector<double> out;
  for (int k = 0; k < n_angles_per_step; ++k) {
    out.push_back(start_angle_deg + double(t) * step_offset_deg + double(k) * stride());
  }
  return out;
}

namespace {

// Length of the line {p : p.n = s} inside the axis-aligned square
// [cx - 1/2, cx + 1/2] x [cy - 1/2, cy + 1/2], with n = (cos, sin).
double chord_length(double cx, double cy, double cos_t, double sin_t, double s) {
  // Parametrize p(tau) = s*n + tau*dir, dir = (-sin, cos).
  const double px = s * cos_t, py = s * sin_t;
  const double dx = -sin_t, dy = cos_t;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d, double c) {
    const double a = c - 0.5, b = c + 0.5;
    if (std::abs(d) < 1e-15) {
      if (p < a || p > b) hi = lo - 1.0;
      return;
    }
    double t0 = (a - p) / d, t1 = (b - p) / d;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  };
  clip(px, dx, cx);
  clip(py, dy, cy);
  return hi > lo ? hi - lo : 0.0;
}

using SparseRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

}  // namespace

LinearOperator build_radon_for_angles(Index image_side, Index n_detectors,
                                      const std::vector<double>& angles_deg) {
  if (image_side < 1 || n_detectors < 1 || angles_deg.empty()) {
    throw DimensionError("radon: need a positive image side, detector count and angle list");
  }
  const Index n = image_side;
  const Index n_angles = Index(angles_deg.size());
  const double center = 0.5 * double(n - 1);
  const double det_center = 0.5 * double(n_detectors - 1);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(std::size_t(n * n * n_angles * 3));
  for (Index a = 0; a < n_angles; ++a) {
    const double theta = angles_deg[std::size_t(a)] * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double reach = 0.5 * (std::abs(c) + std::abs(s));
    for (Index col = 0; col < n; ++col) {
      for (Index row = 0; row < n; ++row) {
        const double x = double(col) - center;
        const double y = center - double(row);
        const double proj = x * c + y * s;
        const Index j_lo = std::max<Index>(0, Index(std::ceil(proj - reach + det_center)));
        const Index j_hi =
            std::min<Index>(n_detectors - 1, Index(std::floor(proj + reach + det_center)));
        for (Index j = j_lo; j <= j_hi; ++j) {
          const double len = chord_length(x, y, c, s, double(j) - det_center);
          if (len > 1e-14) triplets.emplace_back(a * n_detectors + j, row + n * col, len);
        }
      }
    }
  }
  auto mat = std::make_shared<SparseRow>(n_angles * n_detectors, n * n);
  mat->setFromTriplets(triplets.begin(), triplets.end());
  mat->makeCompressed();

  using CMap = Eigen::Map<const Vector>;
  using MMap = Eigen::Map<Vector>;
  const Shape shape{mat->rows(), mat->cols()};
  return LinearOperator::custom(
      shape,
      [mat](std::span<const double> x, std::span<double> y) {
        MMap(y.data(), Index(y.size())).noalias() = (*mat) * CMap(x.data(), Index(x.size()));
      },
      [mat](std::span<const double> y, std::span<double> x) {
        MMap(x.data(), Index(x.size())).noalias() =
            mat->transpose() * CMap(y.data(), Index(y.size()));
      },
      "radon(" + std::to_string(n_angles) + " angles, " + std::to_string(n_detectors) + " det)");
}

LinearOperator build_radon_operator(const RadonModel& model, Index t) {
  return build_radon_for_angles(model.image_side, model.detectors(), model.angles(t));
}

LinearOperator assemble_dynamic_forward(std::vector<LinearOperator> per_step) {
  if (per_step.empty()) throw ShapeError("assemble_dynamic_forward: no steps");
  const Index cols = per_step.front().cols();
  for (const auto& op : per_step) {
    if (op.cols() != cols) throw ShapeError("assemble_dynamic_forward: inconsistent frame sizes");
  }
  return LinearOperator::blockdiag(std::move(per_step));
}

LinearOperator assemble_dynamic_forward(const LinearOperator& shared, Index n_t) {
  if (n_t < 1) throw ShapeError("assemble_dynamic_forward: n_t must be >= 1");
  if (n_t == 1) return shared;
  return LinearOperator::kron(LinearOperator::identity(n_t), shared);
}

}  // namespace mmgks
