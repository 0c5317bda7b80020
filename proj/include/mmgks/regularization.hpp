#pragma once

#include "mmgks/operators.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace mmgks {

/// The six edge-preserving space-time regularizers.
enum class Method { AnisoTV, TVplusTikhonov, Aniso3DTV, Iso3DTV, IsoTV, GS };

inline constexpr std::array<Method, 6> kAllMethods{Method::AnisoTV,  Method::TVplusTikhonov,
                                                   Method::Aniso3DTV, Method::Iso3DTV,
                                                   Method::IsoTV,    Method::GS};

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
/// "AnisoTV, TVplusTikhonov, ..." for error messages.
std::string method_list();

/// Image sequence extents: n_v x n_h pixels per frame, n_t frames.
struct Dims {
  Index n_v = 0;
  Index n_h = 0;
  Index n_t = 0;

  Index n_s() const { return n_v * n_h; }
  Index n() const { return n_v * n_h * n_t; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct RegularizerSpec {
  Method method = Method::AnisoTV;
  Dims dims;
  double epsilon = 1e-3;
  // Per-direction difference scalings; only 1 is exercised.
  double alpha_v = 1.0;
  double alpha_h = 1.0;
  double alpha_t = 1.0;

  /// Throws DimensionError / std::invalid_argument on bad extents or epsilon.
  void validate() const;
};

/// Sparsifying operator D_j of the method. n_t == 1 is accepted for every
/// method except Aniso3DTV; temporal blocks are then dropped.
LinearOperator build_D(const RegularizerSpec& spec);

/// R_j(u), or its smoothed version R_{j,eps}(u) when `smoothed` is set.
///
/// For TVplusTikhonov the temporal term is 0.5*||(L_t (x) I) u||^2, which is the
/// quadratic the identity block of its MM weight operator reproduces exactly.
double regularizer_value(const RegularizerSpec& spec, const Vector& u, bool smoothed);

/// Diagonal IRLS weight operator W_j^(k).
///
/// Entries are the -1/4 powers of the local smoothed magnitudes, so that
/// 0.5*||W D u||^2 carries the -1/2 power factor of the majorizing quadratic.
struct WeightOperator {
  enum class Structure {
    plain,                         // one weight per row of D
    block_identity_augmented,      // [W ; I]: spatial weights, unit temporal block
    replicated_by_3,               // I_3 (x) diag(w)
    replicated_by_2_plus_temporal, // blkdiag(I_2 (x) diag(w_s), diag(w_t))
    group_replicated               // I_{n_t} (x) diag(w_group)
  };

  Structure structure = Structure::plain;
  Vector compact;   // the distinct weights before replication
  Vector diagonal;  // expanded diagonal, length D.rows()

  LinearOperator as_operator() const { return LinearOperator::diagonal(diagonal); }
};

WeightOperator update_weights(const RegularizerSpec& spec, const Vector& u_k);

/// M_j^(k) = W_j^(k) D_j.
LinearOperator reweighted_operator(const WeightOperator& w, const LinearOperator& d);

using MisfitFn = std::function<double(const Vector&)>;

/// J_eps(u) = misfit(u) + lambda * R_eps(u).
double smoothed_objective(const RegularizerSpec& spec, const Vector& u, double lambda,
                          const MisfitFn& misfit);

/// Quadratic tangent majorant Q(u; u_k) = misfit(u) + lambda/2 ||M u||^2 + c, with
/// c chosen so that Q(u_k; u_k) = J_eps(u_k).
double majorant_value(const RegularizerSpec& spec, const Vector& u, const Vector& u_k,
                      double lambda, const MisfitFn& misfit);

}  // namespace mmgks
