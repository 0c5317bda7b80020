#pragma once

#include "mmgks/operators.hpp"
#include "mmgks/regularization.hpp"

#include <optional>
#include <vector>

namespace mmgks {

/// ||u - u_true|| / ||u_true||. Throws std::invalid_argument for a zero truth.
double rre(const Vector& u, const Vector& u_true);

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5),
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2. Images smaller than the window use a
/// single window covering the whole image.
double ssim(const Matrix& a, const Matrix& b, double dynamic_range);

struct QualityReport {
  double rre_total = 0.0;
  std::vector<double> rre_per_frame;
  std::vector<double> ssim_per_frame;
  std::optional<int> iters_at_dp;
  std::optional<double> lambda_at_dp;
};

/// Per-frame RRE and SSIM of `u` against `truth`. The SSIM dynamic range of
/// every frame is the value range of the whole true sequence.
QualityReport quality_report(const Vector& u, const Vector& truth, const Dims& dims);

}  // namespace mmgks
