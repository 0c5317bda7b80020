#include "mmgks/metrics.hpp"

#include <cmath>

namespace mmgks {

double rre(const Vector& u, const Vector& u_true) {
  if (u.size() != u_true.size()) throw ShapeError("rre: length mismatch");
  const double denom = u_true.norm();
  if (denom == 0.0) throw std::invalid_argument("rre: true solution is zero");
  return (u - u_true).norm() / denom;
}

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;

Vector gaussian_window_1d(int size) {
  Vector w(size);
  const double c = 0.5 * (size - 1);
  for (int i = 0; i < size; ++i) {
    const double d = i - c;
    w[i] = std::exp(-0.5 * d * d / (kWindowSigma * kWindowSigma));
  }
  return w / w.sum();
}

// Separable "valid" correlation with window w along both axes.
Matrix filter_valid(const Matrix& img, const Vector& wv, const Vector& wh) {
  const Index rv = img.rows() - wv.size() + 1;
  const Index rh = img.cols() - wh.size() + 1;
  Matrix tmp(rv, img.cols());
  for (Index j = 0; j < img.cols(); ++j) {
    for (Index i = 0; i < rv; ++i) tmp(i, j) = img.col(j).segment(i, wv.size()).dot(wv);
  }
  Matrix out(rv, rh);
  for (Index j = 0; j < rh; ++j) out.col(j) = tmp.middleCols(j, wh.size()) * wh;
  return out;
}

}  // namespace

double ssim(const Matrix& a, const Matrix& b, double dynamic_range) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("ssim: image size mismatch");
  if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");
  if (a.size() == 0) throw ShapeError("ssim: empty image");

  const Vector wv = gaussian_window_1d(int(std::min<Index>(kWindow, a.rows())));
  const Vector wh = gaussian_window_1d(int(std::min<Index>(kWindow, a.cols())));
  const double c1 = std::pow(0.01 * dynamic_range, 2);
  const double c2 = std::pow(0.03 * dynamic_range, 2);

  const Matrix mu_a = filter_valid(a, wv, wh);
  const Matrix mu_b = filter_valid(b, wv, wh);
  const Matrix aa = filter_valid(a.cwiseProduct(a), wv, wh);
  const Matrix bb = filter_valid(b.cwiseProduct(b), wv, wh);
  const Matrix ab = filter_valid(a.cwiseProduct(b), wv, wh);

  double total = 0.0;
  for (Index j = 0; j < mu_a.cols(); ++j) {
    for (Index i = 0; i < mu_a.rows(); ++i) {
      const double ma = mu_a(i, j), mb = mu_b(i, j);
      const double var_a = aa(i, j) - ma * ma;
      const double var_b = bb(i, j) - mb * mb;
      const double cov = ab(i, j) - ma * mb;
      const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
      total += num / den;
    }
  }
  return total / double(mu_a.size());
}

QualityReport quality_report(const Vector& u, const Vector& truth, const Dims& dims) {
  if (u.size() != dims.n() || truth.size() != dims.n()) {
    throw ShapeError("quality_report: vector length does not match dims");
  }
  QualityReport q;
  q.rre_total = rre(u, truth);
  double range = truth.maxCoeff() - truth.minCoeff();
  if (!(range > 0.0)) range = std::max(1.0, std::abs(truth.maxCoeff()));
  const Index ns = dims.n_s();
  for (Index t = 0; t < dims.n_t; ++t) {
    const Vector ut = u.segment(t * ns, ns);
    const Vector tt = truth.segment(t * ns, ns);
    q.rre_per_frame.push_back(tt.norm() > 0.0 ? rre(ut, tt) : ut.norm());
    q.ssim_per_frame.push_back(ssim(Eigen::Map<const Matrix>(ut.data(), dims.n_v, dims.n_h),
                                    Eigen::Map<const Matrix>(tt.data(), dims.n_v, dims.n_h),
                                    range));
  }
  return q;
}

}  // namespace mmgks
