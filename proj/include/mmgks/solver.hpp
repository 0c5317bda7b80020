#pragma once

#include "mmgks/operators.hpp"
#include "mmgks/paramselect.hpp"
#include "mmgks/regularization.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mmgks {

/// Data model d = F u + e with e ~ N(0, diag(noise_cov_diag)).
struct ReconstructionProblem {
  LinearOperator forward;
  Vector data;
  Vector noise_cov_diag;
  double delta = 0.0;  // estimate of ||e||_{Gamma^-1}
  std::optional<Vector> truth;

  void validate() const;
  /// Gamma^{-1/2} F
  LinearOperator whitened_forward() const;
  /// Gamma^{-1/2} d
  Vector whitened_data() const;
  /// ||F u - d||_{Gamma^-1}
  double misfit_norm(const Vector& u) const;
};

/// Problem with unit covariance and delta = 0.
ReconstructionProblem make_problem(LinearOperator forward, Vector data);

enum class SubspaceMode {
  krylov,  // Golub-Kahan seed plus residual expansion
  full     // V = I_n; projected solves are exact (small problems and oracles only)
};

struct IterationRecord {
  int iter = 0;
  double lambda = 0.0;
  double objective = 0.0;    // J_eps(u) with the iteration's lambda
  double dp_residual = 0.0;  // ||F u - d||_{Gamma^-1}
  double rre = 0.0;          // NaN without ground truth
  Index subspace_dim = 0;
  double min_value = 0.0;
};

struct SolverConfig {
  RegularizerSpec regularizer;
  double eta = 1.01;
  int max_iters = 150;
  int gk_seed_steps = 5;
  double rel_change_tol = 1e-6;
  bool nonneg = false;
  std::vector<double> lambda_grid = default_lambda_grid();
  /// Skip GCV and use this value at every iteration.
  std::optional<double> fixed_lambda;
  SubspaceMode subspace = SubspaceMode::krylov;
  bool record_iterates = false;
  /// Called after every outer iteration, e.g. to stream history to disk.
  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const;
};

enum class ExitReason { discrepancy, relative_change, max_iterations, singular_system, non_finite };

std::string_view exit_reason_name(ExitReason r);

struct SolveResult {
  Vector u;
  std::vector<IterationRecord> history;
  ExitReason reason = ExitReason::max_iterations;
  std::optional<int> iters_at_dp;
  std::optional<double> lambda_at_dp;
  bool seed_breakdown = false;
  std::string message;
  std::vector<Vector> iterates;  // only with record_iterates
  Matrix basis;                  // final search space V_d

  bool ok() const {
    return reason != ExitReason::singular_system && reason != ExitReason::non_finite;
  }
};

struct SeedResult {
  Matrix basis;  // n x l, orthonormal columns
  bool breakdown = false;
};

/// l steps of Golub-Kahan bidiagonalization of Gamma^{-1/2} F started from
/// Gamma^{-1/2} d, with full reorthogonalization. On breakdown the basis built
/// so far is returned and `breakdown` is set.
SeedResult seed_subspace(const ReconstructionProblem& problem, int steps);

/// Search space V_d together with the thin QR factorization of Gamma^{-1/2} F V_d
/// and the sparsified images D V_d that feed M^(k) V_d = W^(k) D V_d.
struct SolverState {
  Matrix basis;  // V_d
  Matrix q_f;    // Q_F
  Matrix r_f;    // R_F
  Matrix d_v;    // D V_d
  Matrix r_m;    // R_M of the current weights
  Vector rhs;    // Q_F^T Gamma^{-1/2} d
  Vector b;      // Gamma^{-1/2} d
  double outside_residual = 0.0;  // ||(I - Q_F Q_F^T) b||^2
  double gradient_scale = 0.0;  // ||F^T Gamma^{-1} d||, reference for convergence
  Vector y;
  Vector u;

  Index dim() const { return basis.cols(); }
  ProjectedPair pair() const { return {r_f, r_m, rhs, dim() + 1, outside_residual}; }
};

/// Builds the factorizations for an initial orthonormal basis.
SolverState init_state(const ReconstructionProblem& problem, const LinearOperator& d_op,
                       const Matrix& basis);

/// Recomputes R_M from scratch for new weights.
void refresh_weights(SolverState& state, const WeightOperator& weights);

/// argmin_y ||R_F y - rhs||^2 + lambda ||R_M y||^2 via the stacked
/// least-squares system. Throws SingularSystemError if [R_F; R_M] is rank deficient.
Vector solve_projected(const ProjectedPair& pair, double lambda);
Vector solve_projected(const SolverState& state, double lambda);

enum class ExpandStatus {
  expanded,
  converged,  // residual of the normal equations vanished
  saturated   // residual already lies in span(V_d)
};

/// Appends the normalized residual of the reweighted normal equations at
/// u = V_d y (two Gram-Schmidt passes) and updates Q_F, R_F and D V_d.
ExpandStatus expand_subspace(SolverState& state, const ReconstructionProblem& problem,
                             const LinearOperator& d_op, const WeightOperator& weights,
                             double lambda);

/// ||F u - d||_{Gamma^-1} <= eta * delta.
bool check_dp(const ReconstructionProblem& problem, const Vector& u, double eta);

/// Majorization-minimization on generalized Krylov subspaces with per-iteration
/// GCV. Stops on the discrepancy principle (delta > 0), a small relative change,
/// or max_iters. Solver failures are reported through SolveResult::reason.
SolveResult mm_gks_solve(const ReconstructionProblem& problem, const SolverConfig& config);

}  // namespace mmgks
