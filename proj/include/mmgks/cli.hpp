#pragma once

#include "mmgks/forward.hpp"
#include "mmgks/metrics.hpp"
#include "mmgks/phantom.hpp"
#include "mmgks/solver.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmgks {

/// Malformed or inconsistent run configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { deblur, radon_dynamic, radon_static_baseline };

std::string_view experiment_name(Experiment e);

struct RunConfig {
  Experiment experiment = Experiment::deblur;
  SceneSpec scene;
  BlurModel blur;
  RadonModel radon;
  NoiseSpec noise;
  SolverConfig solver;
  std::filesystem::path output_dir;
};

/*
 * JSON run configuration:
 *
 *   {
 *     "experiment": "deblur" | "radon-dynamic" | "radon-static-baseline",
 *     "scene":   {"n_v": 32, "n_h": 32, "n_t": 4, "preset": "moving-disks"}
 *                or {"n_v": .., "n_h": .., "n_t": .., "objects": [
 *                      {"shape": "disk", "intensity": 1, "row": 8, "col": 8,
 *                       "radius": 3, "velocity": [1, 0]},
 *                      {"shape": "rectangle", "intensity": 0.5,
 *                       "trajectory": [{"row": 4, "col": 4, "half_height": 2,
 *                                       "half_width": 3}, ...]}]},
 *     "forward": {"sigma_psf": .., "bandwidth": ..}                (deblur)
 *                {"n_angles_per_step": 6, "n_detectors": 0,
 *                 "start_angle_deg": 0, "step_offset_deg": 1,
 *                 "angle_stride_deg": 0}                            (radon)
 *     "noise":   {"level": 0.01, "seed": 1},
 *     "solver":  {"method": "AnisoTV", "epsilon": 1e-3, "eta": 1.01,
 *                 "max_iters": 150, "gk_seed_steps": 5,
 *                 "rel_change_tol": 1e-6, "nonneg": false,
 *                 "lambda_grid": {"min": 1e-6, "max": 1e2, "count": 40},
 *                 "lambda": 0.1},
 *     "output_dir": "runs/deblur"
 *   }
 *
 * Every key except "scene" extents has a default. A blur "forward" without
 * values uses the medium blur for the frame size.
 */
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Scene, forward operator and noisy data for one experiment. For the static
/// baseline the problem is the dynamic one; run() splits it per frame.
struct ExperimentData {
  Dims dims;
  Vector truth;
  ReconstructionProblem problem;
  std::vector<LinearOperator> per_step;  // A^(t); empty for deblur
  Vector clean;                          // F u_true
};

ExperimentData build_experiment(const RunConfig& config);

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 1 solver failure
  std::string message;
  QualityReport quality;
  std::vector<SolveResult> results;  // one per frame for the static baseline
};

/// Runs the experiment and writes frames, history CSVs and summary.json into
/// config.output_dir. Throws ConfigError for unusable configurations.
RunOutcome run(const RunConfig& config, std::ostream& log);

/// Writes one frame as 16-bit binary PGM, mapping [lo, hi] linearly to [0, 65535].
void write_pgm16(const std::filesystem::path& path, const Matrix& frame, double lo, double hi);
/// Reads a 16-bit binary PGM back as raw integer levels.
Matrix read_pgm16(const std::filesystem::path& path);

struct CompareRow {
  std::string run;
  std::string method;
  std::string experiment;
  double rre_total = 0.0;
  std::vector<double> rre_per_frame;
  std::vector<double> ssim_per_frame;
  std::optional<int> iters_at_dp;
};

/// Loads summaries of completed runs, sorted by total RRE (stable).
/// Throws std::runtime_error if a run directory lacks its history or summary.
std::vector<CompareRow> load_comparison(const std::vector<std::filesystem::path>& run_dirs);
std::string format_comparison(const std::vector<CompareRow>& rows);

}  // namespace mmgks
