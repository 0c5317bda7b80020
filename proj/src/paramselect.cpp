#include "mmgks/paramselect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmgks {

namespace {

constexpr double kRankTolerance = 1e-12;
constexpr double kTieTolerance = 1e-12;
constexpr double kGoldenRelWidth = 1e-3;

}  // namespace

void ProjectedPair::validate() const {
  const Index d = r_f.cols();
  if (r_f.rows() != d || r_m.rows() != d || r_m.cols() != d || rhs.size() != d) {
    throw ShapeError("projected pair: R_F, R_M must be square with matching size and rhs length");
  }
  if (data_dim != 0 && data_dim < d) throw ShapeError("projected pair: data_dim smaller than d");
  if (!(outside_residual >= 0.0)) {
    throw std::invalid_argument("projected pair: outside residual must be nonnegative");
  }
}

PairGsvd gsvd(const ProjectedPair& pair) {
  pair.validate();
  const Index d = pair.dim();
  PairGsvd g;
  g.data_dim = pair.data_dim == 0 ? d : pair.data_dim;
  g.outside_residual = pair.outside_residual;
  if (d == 0) return g;

  Matrix stacked(2 * d, d);
  stacked << pair.r_f, pair.r_m;
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < d) {
    throw SingularSystemError("projected pair is rank deficient (rank " +
                              std::to_string(qr.rank()) + " < " + std::to_string(d) +
                              "): forward and regularization operators share a null space");
  }
  const Matrix q = qr.householderQ() * Matrix::Identity(2 * d, d);

  // CS decomposition: Q1 = U C Z^T, Q2 Z = V S.
  Eigen::JacobiSVD<Matrix> svd(q.topRows(d), Eigen::ComputeFullU | Eigen::ComputeFullV);
  g.c = svd.singularValues();
  const Matrix q2z = q.bottomRows(d) * svd.matrixV();
  g.s = q2z.colwise().norm().transpose();
  g.beta = svd.matrixU().transpose() * pair.rhs;
  return g;
}

double gcv_value(const PairGsvd& g, double lambda) {
  const Index d = g.c.size();
  const Index m = std::max(g.data_dim, d);
  double residual = g.outside_residual;
  double trace = double(m - d);
  for (Index i = 0; i < d; ++i) {
    const double c2 = g.c[i] * g.c[i];
    const double ls2 = lambda * g.s[i] * g.s[i];
    // 1 - f_i, written without cancellation
    const double one_minus_f = ls2 / (c2 + ls2);
    residual += one_minus_f * one_minus_f * g.beta[i] * g.beta[i];
    trace += one_minus_f;
  }
  return double(m) * residual / (trace * trace);
}

std::vector<double> gcv_curve(const ProjectedPair& pair, const std::vector<double>& lambdas) {
  for (double l : lambdas) {
    if (!(l > 0.0)) throw std::invalid_argument("gcv_curve: lambda values must be positive");
  }
  const PairGsvd g = gsvd(pair);
  std::vector<double> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.push_back(gcv_value(g, l));
  return out;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw std::invalid_argument("log_grid: need 0 < lo <= hi and count >= 1");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < count; ++i) grid[std::size_t(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
  grid.back() = hi;
  return grid;
}

std::vector<double> default_lambda_grid() { return log_grid(1e-6, 1e2, 40); }

LambdaSelection select_lambda(const ProjectedPair& pair, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw std::invalid_argument("select_lambda: grid must be sorted ascending");
  }
  const PairGsvd g = gsvd(pair);
  LambdaSelection sel;
  sel.curve.reserve(grid.size());
  for (double l : grid) {
    if (!(l > 0.0)) throw std::invalid_argument("select_lambda: lambda values must be positive");
    sel.curve.push_back(gcv_value(g, l));
  }

  double best = std::numeric_limits<double>::infinity();
  for (double v : sel.curve) {
    if (std::isfinite(v)) best = std::min(best, v);
  }
  if (!std::isfinite(best)) throw std::runtime_error("select_lambda: GCV curve has no finite value");

  std::size_t idx = 0;
  for (std::size_t i = 0; i < sel.curve.size(); ++i) {
    const double v = sel.curve[i];
    if (std::isfinite(v) && v <= best + kTieTolerance * std::abs(best)) idx = i;
  }
  sel.lambda = grid[idx];
  sel.gcv = sel.curve[idx];
  if (grid.size() == 1) return sel;

  // Golden-section search in log(lambda) across the bracketing cells.
  double a = std::log(grid[idx == 0 ? 0 : idx - 1]);
  double b = std::log(grid[std::min(idx + 1, grid.size() - 1)]);
  const double tol = std::log1p(kGoldenRelWidth);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&g](double x) { return gcv_value(g, std::exp(x)); };
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  const double x = 0.5 * (a + b);
  const double fx = f(x);
  if (std::isfinite(fx) && fx < sel.gcv) {
    sel.lambda = std::exp(x);
    sel.gcv = fx;
  }
  return sel;
}

}  // namespace mmgks
