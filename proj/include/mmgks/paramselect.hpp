#pragma once

#include "mmgks/operators.hpp"

#include <stdexcept>
#include <vector>

namespace mmgks {

/// The stacked pair [R_F; R_M] has a shared null space, so the projected
/// regularized problem has no unique solution.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Projected regularized least-squares problem
///   min_y ||R_F y - rhs||^2 + lambda ||R_M y||^2
/// with square d x d factors.
///
/// When the pair comes from an m-row data space (R_F from a thin QR of an
/// m x d matrix), `data_dim` = m and `outside_residual` = ||(I - Q_F Q_F^T) b||^2
/// let GCV measure the residual and its trace in the full data space. The
/// defaults (0 and 0) treat the d-dimensional problem on its own.
struct ProjectedPair {
  Matrix r_f;
  Matrix r_m;
  Vector rhs;
  Index data_dim = 0;
  double outside_residual = 0.0;

  Index dim() const { return r_f.cols(); }
  void validate() const;
};

/// Generalized singular values of (R_F, R_M) in CS form: R_F = U diag(c) X,
/// R_M = V diag(s) X with c_i^2 + s_i^2 = 1. Only what GCV needs is kept.
struct PairGsvd {
  Vector c;     // cosines
  Vector s;     // sines
  Vector beta;  // U^T rhs
  Index data_dim = 0;
  double outside_residual = 0.0;
};

/// Throws SingularSystemError when the stacked pair is rank deficient.
PairGsvd gsvd(const ProjectedPair& pair);

/// G(lambda) = d ||(I - R_F T_lambda) rhs||^2 / trace(I - R_F T_lambda)^2,
/// T_lambda = (R_F^T R_F + lambda R_M^T R_M)^{-1} R_F^T.
/// With data_dim m > d this becomes
///   m (outside_residual + ||(I - R_F T_lambda) rhs||^2) / (m - d + trace(I - R_F T_lambda))^2,
/// the GCV function of min ||A V y - b||^2 + lambda ||M V y||^2 over the subspace.
double gcv_value(const PairGsvd& g, double lambda);
std::vector<double> gcv_curve(const ProjectedPair& pair, const std::vector<double>& lambdas);

/// `count` log-spaced points in [lo, hi].
std::vector<double> log_grid(double lo, double hi, int count);

/// Default search grid: 40 points in [1e-6, 1e2].
std::vector<double> default_lambda_grid();

struct LambdaSelection {
  double lambda = 0.0;
  double gcv = 0.0;
  std::vector<double> curve;  // G on the grid
};

/// Grid minimizer of G (ties toward larger lambda), refined by golden-section
/// search in log(lambda) over the neighbouring grid cells. The refined point
/// replaces the grid point only if it strictly lowers G.
LambdaSelection select_lambda(const ProjectedPair& pair, const std::vector<double>& grid);

}  // namespace mmgks
