#include "mmgks/phantom.hpp"

#include <cmath>
#include <random>

namespace mmgks {

void SceneSpec::validate() const {
  if (n_v < 1 || n_h < 1 || n_t < 1) throw DimensionError("scene: extents must be positive");
  for (const auto& obj : objects) {
    if (!std::isfinite(obj.intensity)) throw std::invalid_argument("scene: non-finite intensity");
    if (Index(obj.trajectory.size()) != n_t) {
      throw std::invalid_argument("scene: every object needs one pose per time step (" +
                                  std::to_string(n_t) + "), got " +
                                  std::to_string(obj.trajectory.size()));
    }
  }
}

std::vector<ObjectPose> linear_trajectory(ObjectPose start, double d_row, double d_col, Index n_t) {
  std::vector<ObjectPose> poses;
  poses.reserve(std::size_t(n_t));
  for (Index t = 0; t < n_t; ++t) {
    ObjectPose p = start;
    p.row += d_row * double(t);
    p.col += d_col * double(t);
    poses.push_back(p);
  }
  return poses;
}

ImageSequence render_scene(const SceneSpec& spec) {
  spec.validate();
  ImageSequence u(spec.n_v, spec.n_h, spec.n_t);
  for (const auto& obj : spec.objects) {
    for (Index t = 0; t < spec.n_t; ++t) {
      const ObjectPose& p = obj.trajectory[std::size_t(t)];
      for (Index j = 0; j < spec.n_h; ++j) {
        for (Index i = 0; i < spec.n_v; ++i) {
          const double dr = double(i) - p.row;
          const double dc = double(j) - p.col;
          const bool inside = obj.kind == SceneObject::Kind::disk
                                  ? dr * dr + dc * dc <= p.radius * p.radius
                                  : std::abs(dr) <= p.half_height && std::abs(dc) <= p.half_width;
          if (inside) u(i, j, t) += obj.intensity;
        }
      }
    }
  }
  return u;
}

SceneSpec moving_disks_scene(Index n_v, Index n_h, Index n_t) {
  SceneSpec spec{n_v, n_h, n_t, {}};
  const double sv = double(n_v) / 32.0, sh = double(n_h) / 32.0;
  const double sr = std::min(sv, sh);
  auto disk = [&](double row, double col, double radius, double intensity, double d_row,
                  double d_col) {
    SceneObject o;
    o.kind = SceneObject::Kind::disk;
    o.intensity = intensity;
    o.trajectory = linear_trajectory({row * sv, col * sh, radius * sr, 0.0, 0.0}, d_row * sv,
                                     d_col * sh, n_t);
    spec.objects.push_back(std::move(o));
  };
  disk(16.0, 16.0, 12.5, 0.3, 0.0, 0.0);  // static background disk
  disk(9.0, 10.0, 3.5, 0.7, 1.0, 0.0);
  disk(10.0, 22.0, 2.5, 0.5, 0.0, -1.0);
  disk(22.0, 11.0, 3.0, 0.6, -1.0, 1.0);
  disk(21.0, 21.0, 4.0, 0.4, 0.0, 0.0);
  disk(16.0, 16.0, 1.5, 0.9, 1.0, 1.0);
  return spec;
}

NoisyData add_noise(const Vector& clean, const NoiseSpec& spec, const Vector& gamma_diag) {
  if (!(spec.level >= 0.0)) throw std::invalid_argument("noise: level must be nonnegative");
  if (gamma_diag.size() != clean.size()) throw ShapeError("noise: covariance length mismatch");
  if ((gamma_diag.array() <= 0.0).any()) {
    throw std::invalid_argument("noise: covariance diagonal must be positive");
  }
  NoisyData out{clean, 0.0};
  const double signal = clean.cwiseQuotient(gamma_diag.cwiseSqrt()).norm();
  if (spec.level == 0.0 || signal == 0.0) return out;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector white(clean.size());
  for (Index i = 0; i < white.size(); ++i) white[i] = normal(rng);
  // e = Gamma^{1/2} w, so ||e||_{Gamma^-1} = ||w||.
  const double scale = spec.level * signal / white.norm();
  out.data += scale * gamma_diag.cwiseSqrt().cwiseProduct(white);
  out.delta = scale * white.norm();
  return out;
}

}  // namespace mmgks
