#pragma once

#include "mmgks/operators.hpp"

#include <cstdint>
#include <vector>

namespace mmgks {

/// The unknown image sequence: frames n_v x n_h, n_t of them, vec ordering.
using ImageSequence = Tensor3;

/// Position and size of an object at one time step, in pixel units.
/// Row/column coordinates refer to pixel centers (pixel (i, j) is at (i, j)).
struct ObjectPose {
  double row = 0.0;
  double col = 0.0;
  double radius = 0.0;       // disks
  double half_height = 0.0;  // rectangles
  double half_width = 0.0;
};

struct SceneObject {
  enum class Kind { disk, rectangle };
  Kind kind = Kind::disk;
  double intensity = 1.0;
  std::vector<ObjectPose> trajectory;  // one pose per time step
};

struct SceneSpec {
  Index n_v = 0;
  Index n_h = 0;
  Index n_t = 0;
  std::vector<SceneObject> objects;

  void validate() const;
};

/// Poses moving with constant velocity (pixels per step) over n_t steps.
std::vector<ObjectPose> linear_trajectory(ObjectPose start, double d_row, double d_col, Index n_t);

/// Rasterizes the scene: a pixel takes an object's intensity iff its center is
/// inside the object; overlapping objects add.
ImageSequence render_scene(const SceneSpec& spec);

/// Six disks of different intensities, four of them moving about one pixel per
/// step, scaled to the frame size.
SceneSpec moving_disks_scene(Index n_v, Index n_h, Index n_t);

struct NoiseSpec {
  double level = 0.0;  // ||e||_{Gamma^-1} / ||F u||_{Gamma^-1}
  std::uint64_t seed = 0;
};

struct NoisyData {
  Vector data;
  double delta = 0.0;  // ||e||_{Gamma^-1}
};

/// d = clean + e with e ~ N(0, Gamma) rescaled so that the achieved noise level
/// equals `spec.level` exactly.
NoisyData add_noise(const Vector& clean, const NoiseSpec& spec, const Vector& gamma_diag);

}  // namespace mmgks
