#include "mmgks/solver.hpp"

#include "mmgks/metrics.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmgks {

namespace {

// Relative size below which a continuation or residual vector is treated as zero.
constexpr double kBreakdownTol = 1e-12;
constexpr double kSaturationTol = 1e-10;
constexpr double kConvergenceTol = 1e-14;
constexpr double kRankTol = 1e-12;

// Two classical Gram-Schmidt passes of v against the columns of q.
void orthogonalize(const Matrix& q, Vector& v) {
  if (q.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) v.noalias() -= q * (q.transpose() * v);
}

// Appends column a to the thin QR factorization (q, r).
void append_qr_column(Matrix& q, Matrix& r, const Vector& a) {
  const Index d = r.cols();
  Vector coef = Vector::Zero(d);
  Vector rem = a;
  if (d > 0) {
    for (int pass = 0; pass < 2; ++pass) {
      const Vector c = q.transpose() * rem;
      rem.noalias() -= q * c;
      coef += c;
    }
  }
  const double norm = rem.norm();
  q.conservativeResize(a.size(), d + 1);
  r.conservativeResize(d + 1, d + 1);
  r.row(d).setZero();
  r.col(d).head(d) = coef;
  if (norm <= kBreakdownTol * a.norm()) {
    // a is (numerically) in span(Q); a zero column of Q keeps Q^T Q a projector.
    q.col(d).setZero();
    r(d, d) = 0.0;
  } else {
    q.col(d) = rem / norm;
    r(d, d) = norm;
  }
}

void append_basis_column(SolverState& s, const LinearOperator& fw, const LinearOperator& d_op,
                         const Vector& v) {
  const Index d = s.basis.cols();
  s.basis.conservativeResize(v.size(), d + 1);
  s.basis.col(d) = v;
  append_qr_column(s.q_f, s.r_f, fw.apply(v));
  const Vector dv = d_op.apply(v);
  s.d_v.conservativeResize(dv.size(), d + 1);
  s.d_v.col(d) = dv;
  s.rhs = s.q_f.transpose() * s.b;
  s.outside_residual = (s.b - s.q_f * s.rhs).squaredNorm();
}

}  // namespace

void ReconstructionProblem::validate() const {
  if (data.size() != forward.rows()) {
    throw ShapeError("problem: data length " + std::to_string(data.size()) +
                     " does not match forward rows " + std::to_string(forward.rows()));
  }
  if (noise_cov_diag.size() != data.size()) {
    throw ShapeError("problem: noise covariance length does not match data");
  }
  if (!(noise_cov_diag.array() > 0.0).all()) {
    throw std::invalid_argument("problem: noise covariance must be strictly positive");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("problem: delta must be finite and nonnegative");
  }
  if (!data.allFinite()) throw std::invalid_argument("problem: data contains NaN or Inf");
  if (truth && truth->size() != forward.cols()) {
    throw ShapeError("problem: truth length does not match forward columns");
  }
}

LinearOperator ReconstructionProblem::whitened_forward() const {
  if ((noise_cov_diag.array() == 1.0).all()) return forward;
  return LinearOperator::compose(LinearOperator::diagonal(noise_cov_diag.cwiseSqrt().cwiseInverse()),
                                 forward);
}

Vector ReconstructionProblem::whitened_data() const {
  return data.cwiseQuotient(noise_cov_diag.cwiseSqrt());
}

double ReconstructionProblem::misfit_norm(const Vector& u) const {
  return (forward.apply(u) - data).cwiseQuotient(noise_cov_diag.cwiseSqrt()).norm();
}

ReconstructionProblem make_problem(LinearOperator forward, Vector data) {
  ReconstructionProblem p;
  p.noise_cov_diag = Vector::Ones(data.size());
  p.forward = std::move(forward);
  p.data = std::move(data);
  return p;
}

void SolverConfig::validate() const {
  regularizer.validate();
  if (!(eta > 1.0)) throw std::invalid_argument("solver: eta must exceed 1");
  if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be at least 1");
  if (gk_seed_steps < 1) throw std::invalid_argument("solver: gk_seed_steps must be at least 1");
  if (!(rel_change_tol > 0.0)) throw std::invalid_argument("solver: rel_change_tol must be positive");
  if (fixed_lambda) {
    if (!(*fixed_lambda > 0.0) || !std::isfinite(*fixed_lambda)) {
      throw std::invalid_argument("solver: fixed lambda must be positive");
    }
  } else {
    if (lambda_grid.empty()) throw std::invalid_argument("solver: lambda grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      if (!(lambda_grid[i] > 0.0)) throw std::invalid_argument("solver: lambda grid must be positive");
      if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) {
        throw std::invalid_argument("solver: lambda grid must be strictly increasing");
      }
    }
  }
}

std::string_view exit_reason_name(ExitReason r) {
  switch (r) {
    case ExitReason::discrepancy: return "discrepancy";
    case ExitReason::relative_change: return "relative_change";
    case ExitReason::max_iterations: return "max_iterations";
    case ExitReason::singular_system: return "singular_system";
    case ExitReason::non_finite: return "non_finite";
  }
  return "unknown";
}

SeedResult seed_subspace(const ReconstructionProblem& problem, int steps) {
  problem.validate();
  const Index n = problem.forward.cols();
  if (steps < 1) throw std::invalid_argument("seed_subspace: steps must be at least 1");
  if (steps > n) throw std::invalid_argument("seed_subspace: steps exceed the number of unknowns");

  const LinearOperator a = problem.whitened_forward();
  SeedResult out;
  out.basis.resize(n, 0);

  Vector b = problem.whitened_data();
  const double beta = b.norm();
  if (beta == 0.0) {
    out.breakdown = true;
    return out;
  }
  Matrix us(b.size(), 1);
  us.col(0) = b / beta;

  Vector v = a.apply_adjoint(Vector(us.col(0)));
  double alpha = v.norm();
  if (alpha == 0.0) {
    out.breakdown = true;
    return out;
  }
  out.basis.resize(n, 1);
  out.basis.col(0) = v / alpha;

  for (int k = 1; k < steps; ++k) {
    const Vector av = a.apply(Vector(out.basis.col(k - 1)));
    Vector u = av - alpha * us.col(k - 1);
    orthogonalize(us, u);
    const double beta_k = u.norm();
    if (beta_k <= kBreakdownTol * av.norm()) {
      out.breakdown = true;
      return out;
    }
    us.conservativeResize(Eigen::NoChange, k + 1);
    us.col(k) = u / beta_k;

    const Vector atu = a.apply_adjoint(Vector(us.col(k)));
    Vector w = atu - beta_k * out.basis.col(k - 1);
    orthogonalize(out.basis, w);
    alpha = w.norm();
    if (alpha <= kBreakdownTol * atu.norm()) {
      out.breakdown = true;
      return out;
    }
    out.basis.conservativeResize(Eigen::NoChange, k + 1);
    out.basis.col(k) = w / alpha;
  }
  return out;
}

SolverState init_state(const ReconstructionProblem& problem, const LinearOperator& d_op,
                       const Matrix& basis) {
  problem.validate();
  if (basis.rows() != problem.forward.cols()) {
    throw ShapeError("init_state: basis rows do not match forward columns");
  }
  if (d_op.cols() != problem.forward.cols()) {
    throw ShapeError("init_state: sparsifying operator does not match forward columns");
  }
  const LinearOperator fw = problem.whitened_forward();
  SolverState s;
  s.b = problem.whitened_data();
  s.gradient_scale = fw.apply_adjoint(s.b).norm();
  s.basis.resize(basis.rows(), 0);
  s.q_f.resize(fw.rows(), 0);
  s.r_f.resize(0, 0);
  s.d_v.resize(d_op.rows(), 0);
  s.rhs.resize(0);
  s.outside_residual = s.b.squaredNorm();
  for (Index j = 0; j < basis.cols(); ++j) append_basis_column(s, fw, d_op, basis.col(j));
  s.r_m = Matrix::Zero(s.dim(), s.dim());
  s.y = Vector::Zero(s.dim());
  s.u = Vector::Zero(basis.rows());
  return s;
}

void refresh_weights(SolverState& state, const WeightOperator& weights) {
  if (weights.diagonal.size() != state.d_v.rows()) {
    throw ShapeError("refresh_weights: weight length does not match D rows");
  }
  const Index d = state.dim();
  const Matrix mv = weights.diagonal.asDiagonal() * state.d_v;
  Eigen::HouseholderQR<Matrix> qr(mv);
  const Index p = std::min(mv.rows(), d);
  state.r_m = Matrix::Zero(d, d);
  state.r_m.topRows(p) = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
}

Vector solve_projected(const ProjectedPair& pair, double lambda) {
  pair.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("solve_projected: lambda must be positive");
  const Index d = pair.dim();
  if (d == 0) return Vector(0);
  Matrix stacked(2 * d, d);
  stacked.topRows(d) = pair.r_f;
  stacked.bottomRows(d) = std::sqrt(lambda) * pair.r_m;
  Vector rhs = Vector::Zero(2 * d);
  rhs.head(d) = pair.rhs;

  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  qr.setThreshold(kRankTol);
  if (qr.rank() < d) {
    throw SingularSystemError("projected system is rank deficient (rank " +
                              std::to_string(qr.rank()) + " of " + std::to_string(d) +
                              "): F and M share a null-space direction in the search space");
  }
  return qr.solve(rhs);
}

Vector solve_projected(const SolverState& state, double lambda) {
  return solve_projected(state.pair(), lambda);
}

ExpandStatus expand_subspace(SolverState& state, const ReconstructionProblem& problem,
                             const LinearOperator& d_op, const WeightOperator& weights,
                             double lambda) {
  const Index n = state.basis.rows();
  if (state.y.size() != state.dim()) {
    throw ShapeError("expand_subspace: no projected solution for the current basis");
  }
  if (weights.diagonal.size() != d_op.rows()) {
    throw ShapeError("expand_subspace: weight length does not match D rows");
  }
  const LinearOperator fw = problem.whitened_forward();

  const Vector fit = state.q_f * (state.r_f * state.y) - state.b;
  const Vector w2 = weights.diagonal.cwiseAbs2();
  Vector r = fw.apply_adjoint(fit) + lambda * d_op.apply_adjoint(w2.cwiseProduct(state.d_v * state.y));
  const double r_norm = r.norm();
  if (r_norm <= kConvergenceTol * std::max(state.gradient_scale, std::numeric_limits<double>::min())) {
    return ExpandStatus::converged;
  }
  if (state.dim() >= n) return ExpandStatus::saturated;
  orthogonalize(state.basis, r);
  const double orth_norm = r.norm();
  if (orth_norm <= kSaturationTol * r_norm) return ExpandStatus::saturated;
  append_basis_column(state, fw, d_op, r / orth_norm);
  return ExpandStatus::expanded;
}

bool check_dp(const ReconstructionProblem& problem, const Vector& u, double eta) {
  return problem.misfit_norm(u) <= eta * problem.delta;
}

SolveResult mm_gks_solve(const ReconstructionProblem& problem, const SolverConfig& config) {
  problem.validate();
  config.validate();
  const RegularizerSpec& spec = config.regularizer;
  const Index n = problem.forward.cols();
  if (spec.dims.n() != n) {
    throw ShapeError("mm_gks_solve: regularizer dims give " + std::to_string(spec.dims.n()) +
                     " unknowns, forward operator has " + std::to_string(n));
  }

  const LinearOperator d_op = build_D(spec);
  const LinearOperator fw = problem.whitened_forward();
  const Vector b = problem.whitened_data();

  SolveResult result;
  result.u = Vector::Zero(n);

  Matrix basis;
  if (config.subspace == SubspaceMode::full) {
    if (n > kMaxDenseCols) throw std::invalid_argument("mm_gks_solve: full subspace mode is for small problems");
    basis = Matrix::Identity(n, n);
  } else {
    SeedResult seed = seed_subspace(problem, std::min<int>(config.gk_seed_steps, int(n)));
    result.seed_breakdown = seed.breakdown;
    basis = std::move(seed.basis);
  }
  if (basis.cols() == 0) {
    result.reason = ExitReason::relative_change;
    result.message = "F^T Gamma^-1 d vanishes; the zero image is the solution";
    return result;
  }

  SolverState state = init_state(problem, d_op, basis);
  const auto misfit = [&](const Vector& u) { return 0.5 * (fw.apply(u) - b).squaredNorm(); };
  Vector u_prev = Vector::Zero(n);

  for (int k = 1; k <= config.max_iters; ++k) {
    const WeightOperator w = update_weights(spec, u_prev);
    refresh_weights(state, w);

    double lambda = 0.0;
    Vector y;
    try {
      lambda = config.fixed_lambda ? *config.fixed_lambda
                                   : select_lambda(state.pair(), config.lambda_grid).lambda;
      y = solve_projected(state, lambda);
    } catch (const SingularSystemError& e) {
      result.reason = ExitReason::singular_system;
      result.message = "iteration " + std::to_string(k) + ": " + e.what();
      break;
    } catch (const std::runtime_error& e) {
      result.reason = ExitReason::non_finite;
      result.message = "iteration " + std::to_string(k) + ": " + e.what();
      break;
    }

    Vector u = state.basis * y;
    if (config.nonneg) u = u.cwiseMax(0.0);
    if (!u.allFinite() || !std::isfinite(lambda)) {
      result.reason = ExitReason::non_finite;
      result.message = "iteration " + std::to_string(k) + ": iterate contains NaN or Inf";
      break;
    }
    state.y = y;
    state.u = u;

    IterationRecord rec;
    rec.iter = k;
    rec.lambda = lambda;
    const double half_misfit = misfit(u);
    rec.dp_residual = std::sqrt(2.0 * half_misfit);
    rec.objective = half_misfit + lambda * regularizer_value(spec, u, true);
    rec.rre = problem.truth ? rre(u, *problem.truth) : std::numeric_limits<double>::quiet_NaN();
    rec.subspace_dim = state.dim();
    rec.min_value = u.minCoeff();
    result.history.push_back(rec);
    if (config.record_iterates) result.iterates.push_back(u);
    if (config.on_iteration) config.on_iteration(rec);
    result.u = u;

    if (problem.delta > 0.0 && rec.dp_residual <= config.eta * problem.delta) {
      result.reason = ExitReason::discrepancy;
      result.iters_at_dp = k;
      result.lambda_at_dp = lambda;
      break;
    }
    const double un = u.norm();
    const double change = un > 0.0 ? (u - u_prev).norm() / un : (u - u_prev).norm();
    u_prev = u;
    if (change < config.rel_change_tol) {
      result.reason = ExitReason::relative_change;
      break;
    }
    if (k == config.max_iters) {
      result.reason = ExitReason::max_iterations;
      break;
    }
    expand_subspace(state, problem, d_op, w, lambda);
  }
  result.basis = std::move(state.basis);
  return result;
}

}  // namespace mmgks
