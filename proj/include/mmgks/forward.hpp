#pragma once

#include "mmgks/operators.hpp"

#include <vector>

namespace mmgks {

/// Separable Gaussian blur with periodic boundary conditions.
struct BlurModel {
  double sigma_psf = 2.0;  // pixels
  int bandwidth = 6;       // kernel half-width

  /// "Medium" blur: sigma 2, half-width 6 at 128 pixels, scaled with image size.
  static BlurModel medium(Index image_side);
};

/// 1-D periodic Gaussian convolution matrix of order n; columns sum to one.
Matrix gaussian_blur_matrix(Index n, const BlurModel& model);

/// A = A_h (x) A_v acting on one vectorized n_v x n_h frame.
LinearOperator build_blur_operator(const BlurModel& model, Index n_v, Index n_h);

/*
 * Parallel-beam geometry with a per-step angle schedule.
 *
 * Step t (1-based) sees the angles
 *   start + t*step_offset + k*stride,   k = 0 .. n_angles_per_step-1  (degrees).
 * With start 0, step_offset 1 and stride n_t this is {t, t+n_t, t+2n_t, ...}.
 */
struct RadonModel {
  Index image_side = 32;
  Index n_t = 1;
  int n_angles_per_step = 1;
  Index n_detectors = 0;          // 0: ceil(sqrt(2) * image_side)
  double start_angle_deg = 0.0;
  double step_offset_deg = 1.0;
  double angle_stride_deg = 0.0;  // 0: n_t degrees

  Index detectors() const;
  double stride() const;
  std::vector<double> angles(Index t) const;
  Index rows_per_step() const { return Index(n_angles_per_step) * detectors(); }
};

/// Ray-driven line-integral operator A^(t) for step t in [1, n_t]. Entries are
/// ray/pixel intersection lengths, detector spacing and pixel size are 1.
/// Sinogram rows are ordered angle-major.
LinearOperator build_radon_operator(const RadonModel& model, Index t);

/// Same geometry for an explicit list of angles (degrees).
LinearOperator build_radon_for_angles(Index image_side, Index n_detectors,
                                      const std::vector<double>& angles_deg);

/// Block-diagonal F = blkdiag(A^(1), ..., A^(n_t)).
LinearOperator assemble_dynamic_forward(std::vector<LinearOperator> per_step);
/// Time-invariant F = I_{n_t} (x) A.
LinearOperator assemble_dynamic_forward(const LinearOperator& shared, Index n_t);

}  // namespace mmgks
