#include "mmgks/regularization.hpp"

#include <cmath>

namespace mmgks {

namespace {

using Op = LinearOperator;

constexpr std::array<std::string_view, 6> kNames{"AnisoTV", "TVplusTikhonov", "Aniso3DTV",
                                                 "Iso3DTV", "IsoTV",          "GS"};

bool has_time(const Dims& d) { return d.n_t >= 2; }

// I_{nt} (x) I_{nh} (x) L_v
Op vertical_block(const RegularizerSpec& s, bool padded) {
  const auto& d = s.dims;
  Op inner = Op::kron(Op::identity(d.n_h), build_diff(d.n_v, s.alpha_v, padded));
  return d.n_t == 1 ? inner : Op::kron(Op::identity(d.n_t), inner);
}

// I_{nt} (x) L_h (x) I_{nv}
Op horizontal_block(const RegularizerSpec& s, bool padded) {
  const auto& d = s.dims;
  Op inner = Op::kron(build_diff(d.n_h, s.alpha_h, padded), Op::identity(d.n_v));
  return d.n_t == 1 ? inner : Op::kron(Op::identity(d.n_t), inner);
}

// L_t (x) I_{ns}
Op temporal_block(const RegularizerSpec& s, bool padded) {
  const auto& d = s.dims;
  return Op::kron(build_diff(d.n_t, s.alpha_t, padded), Op::identity(d.n_s()));
}

// Number of rows of I_{nt} (x) L_s.
Index spatial_rows(const Dims& d) {
  return d.n_t * ((d.n_v - 1) * d.n_h + (d.n_h - 1) * d.n_v);
}

double smooth_abs(double z, double eps2, bool smoothed) {
  return smoothed ? std::sqrt(z * z + eps2) : std::abs(z);
}

// (x + eps^2)^(-1/4)
double quarter_weight(double sq, double eps2) { return 1.0 / std::sqrt(std::sqrt(sq + eps2)); }

}  // namespace

std::string_view method_name(Method m) { return kNames[std::size_t(m)]; }

std::optional<Method> parse_method(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return kAllMethods[i];
  }
  return std::nullopt;
}

std::string method_list() {
  std::string s;
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (i) s += ", ";
    s += kNames[i];
  }
  return s;
}

void RegularizerSpec::validate() const {
  if (dims.n_v < 2 || dims.n_h < 2) {
    throw DimensionError("regularizer: spatial extents must be >= 2, got " +
                         std::to_string(dims.n_v) + "x" + std::to_string(dims.n_h));
  }
  if (dims.n_t < 1 || (method == Method::Aniso3DTV && dims.n_t < 2)) {
    throw DimensionError("regularizer: " + std::string(method_name(method)) +
                         " needs more frames, got n_t=" + std::to_string(dims.n_t));
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("regularizer: epsilon must be positive");
  if (!(alpha_v > 0.0 && alpha_h > 0.0 && alpha_t > 0.0)) {
    throw std::invalid_argument("regularizer: alpha scalings must be positive");
  }
}

LinearOperator build_D(const RegularizerSpec& spec) {
  spec.validate();
  const auto& d = spec.dims;
  switch (spec.method) {
    case Method::AnisoTV:
    case Method::TVplusTikhonov:
    case Method::GS: {
      // GS uses I_{nt} (x) L_s, which differs from the spatial part of D_1 only
      // in row order: groups must be contiguous per frame.
      if (spec.method == Method::GS) {
        Op ls = build_Ls(d.n_v, d.n_h, spec.alpha_v, spec.alpha_h);
        return d.n_t == 1 ? ls : Op::kron(Op::identity(d.n_t), ls);
      }
      std::vector<Op> blocks{vertical_block(spec, false), horizontal_block(spec, false)};
      if (has_time(d)) blocks.push_back(temporal_block(spec, false));
      return Op::vstack(std::move(blocks));
    }
    case Method::Aniso3DTV:
      return Op::kron(build_diff(d.n_t, spec.alpha_t),
                      Op::kron(build_diff(d.n_h, spec.alpha_h), build_diff(d.n_v, spec.alpha_v)));
    case Method::Iso3DTV:
    case Method::IsoTV: {
      std::vector<Op> blocks{vertical_block(spec, true), horizontal_block(spec, true)};
      if (has_time(d)) blocks.push_back(temporal_block(spec, spec.method == Method::Iso3DTV));
      return Op::vstack(std::move(blocks));
    }
  }
  throw std::logic_error("build_D: unknown method");
}

double regularizer_value(const RegularizerSpec& spec, const Vector& u, bool smoothed) {
  const auto& d = spec.dims;
  if (u.size() != d.n()) {
    throw ShapeError("regularizer_value: expected length " + std::to_string(d.n()) + ", got " +
                     std::to_string(u.size()));
  }
  const Vector z = build_D(spec).apply(u);
  const double eps2 = spec.epsilon * spec.epsilon;
  const Index n = d.n();

  double value = 0.0;
  switch (spec.method) {
    case Method::AnisoTV:
    case Method::Aniso3DTV:
      for (Index i = 0; i < z.size(); ++i) value += smooth_abs(z[i], eps2, smoothed);
      break;
    case Method::TVplusTikhonov: {
      const Index ns = spatial_rows(d);
      for (Index i = 0; i < ns; ++i) value += smooth_abs(z[i], eps2, smoothed);
      value += 0.5 * z.tail(z.size() - ns).squaredNorm();
      break;
    }
    case Method::Iso3DTV: {
      const bool time = has_time(d);
      for (Index l = 0; l < n; ++l) {
        double sq = z[l] * z[l] + z[n + l] * z[n + l];
        if (time) sq += z[2 * n + l] * z[2 * n + l];
        value += std::sqrt(smoothed ? sq + eps2 : sq);
      }
      break;
    }
    case Method::IsoTV: {
      for (Index l = 0; l < n; ++l) {
        const double sq = z[l] * z[l] + z[n + l] * z[n + l];
        value += std::sqrt(smoothed ? sq + eps2 : sq);
      }
      for (Index i = 2 * n; i < z.size(); ++i) value += smooth_abs(z[i], eps2, smoothed);
      break;
    }
    case Method::GS: {
      const Index groups = z.size() / d.n_t;
      for (Index l = 0; l < groups; ++l) {
        double sq = 0.0;
        for (Index t = 0; t < d.n_t; ++t) sq += z[l + t * groups] * z[l + t * groups];
        value += std::sqrt(smoothed ? sq + eps2 : sq);
      }
      break;
    }
  }
  return value;
}

WeightOperator update_weights(const RegularizerSpec& spec, const Vector& u_k) {
  const auto& d = spec.dims;
  if (u_k.size() != d.n()) {
    throw ShapeError("update_weights: expected length " + std::to_string(d.n()) + ", got " +
                     std::to_string(u_k.size()));
  }
  const Vector z = build_D(spec).apply(u_k);
  const double eps2 = spec.epsilon * spec.epsilon;
  const Index n = d.n();
  using S = WeightOperator::Structure;

  WeightOperator w;
  switch (spec.method) {
    case Method::AnisoTV:
    case Method::Aniso3DTV:
      w.structure = S::plain;
      w.compact = z.unaryExpr([eps2](double v) { return quarter_weight(v * v, eps2); });
      w.diagonal = w.compact;
      break;
    case Method::TVplusTikhonov: {
      const Index ns = spatial_rows(d);
      w.structure = S::block_identity_augmented;
      w.compact = z.head(ns).unaryExpr([eps2](double v) { return quarter_weight(v * v, eps2); });
      w.diagonal = Vector::Ones(z.size());
      w.diagonal.head(ns) = w.compact;
      break;
    }
    case Method::Iso3DTV: {
      const Index blocks = has_time(d) ? 3 : 2;
      w.structure = S::replicated_by_3;
      w.compact.resize(n);
      for (Index l = 0; l < n; ++l) {
        double sq = 0.0;
        for (Index b = 0; b < blocks; ++b) sq += z[b * n + l] * z[b * n + l];
        w.compact[l] = quarter_weight(sq, eps2);
      }
      w.diagonal = w.compact.replicate(blocks, 1);
      break;
    }
    case Method::IsoTV: {
      w.structure = S::replicated_by_2_plus_temporal;
      const Index nt_rows = z.size() - 2 * n;
      w.compact.resize(n + nt_rows);
      for (Index l = 0; l < n; ++l) {
        w.compact[l] = quarter_weight(z[l] * z[l] + z[n + l] * z[n + l], eps2);
      }
      for (Index i = 0; i < nt_rows; ++i) {
        w.compact[n + i] = quarter_weight(z[2 * n + i] * z[2 * n + i], eps2);
      }
      w.diagonal.resize(z.size());
      w.diagonal.head(n) = w.compact.head(n);
      w.diagonal.segment(n, n) = w.compact.head(n);
      w.diagonal.tail(nt_rows) = w.compact.tail(nt_rows);
      break;
    }
    case Method::GS: {
      w.structure = S::group_replicated;
      const Index groups = z.size() / d.n_t;
      w.compact.resize(groups);
      for (Index l = 0; l < groups; ++l) {
        double sq = 0.0;
        for (Index t = 0; t < d.n_t; ++t) sq += z[l + t * groups] * z[l + t * groups];
        w.compact[l] = quarter_weight(sq, eps2);
      }
      // group index fastest within each time block
      w.diagonal = w.compact.replicate(d.n_t, 1);
      break;
    }
  }
  return w;
}

LinearOperator reweighted_operator(const WeightOperator& w, const LinearOperator& d) {
  return LinearOperator::compose(w.as_operator(), d);
}

double smoothed_objective(const RegularizerSpec& spec, const Vector& u, double lambda,
                          const MisfitFn& misfit) {
  return misfit(u) + lambda * regularizer_value(spec, u, true);
}

double majorant_value(const RegularizerSpec& spec, const Vector& u, const Vector& u_k,
                      double lambda, const MisfitFn& misfit) {
  const LinearOperator m = reweighted_operator(update_weights(spec, u_k), build_D(spec));
  const double at_k = 0.5 * m.apply(u_k).squaredNorm();
  const double c = lambda * (regularizer_value(spec, u_k, true) - at_k);
  return misfit(u) + 0.5 * lambda * m.apply(u).squaredNorm() + c;
}

}  // namespace mmgks
