#include "mmgks/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mmgks {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view experiment_name(Experiment e) {
  switch (e) {
    case Experiment::deblur: return "deblur";
    case Experiment::radon_dynamic: return "radon-dynamic";
    case Experiment::radon_static_baseline: return "radon-static-baseline";
  }
  return "unknown";
}

namespace {

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("config: " + where + " is missing '" + key + "'");
  return get_or<T>(obj, key, T{});
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  const json& s = root.at(key);
  if (!s.is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
  return s;
}

ObjectPose parse_pose(const json& j) {
  ObjectPose p;
  p.row = get_or(j, "row", 0.0);
  p.col = get_or(j, "col", 0.0);
  p.radius = get_or(j, "radius", 0.0);
  p.half_height = get_or(j, "half_height", 0.0);
  p.half_width = get_or(j, "half_width", 0.0);
  return p;
}

SceneSpec parse_scene(const json& j) {
  const Index n_v = require<Index>(j, "n_v", "scene");
  const Index n_h = require<Index>(j, "n_h", "scene");
  const Index n_t = require<Index>(j, "n_t", "scene");
  if (n_v < 2 || n_h < 2 || n_t < 1) throw ConfigError("config: scene extents too small");

  if (j.contains("preset")) {
    const auto preset = get_or<std::string>(j, "preset", "");
    if (preset != "moving-disks") throw ConfigError("config: unknown scene preset '" + preset + "'");
    return moving_disks_scene(n_v, n_h, n_t);
  }
  SceneSpec spec{n_v, n_h, n_t, {}};
  if (!j.contains("objects") || !j.at("objects").is_array()) {
    throw ConfigError("config: scene needs a 'preset' or an 'objects' array");
  }
  for (const json& o : j.at("objects")) {
    SceneObject obj;
    const auto shape = get_or<std::string>(o, "shape", "disk");
    if (shape == "disk") {
      obj.kind = SceneObject::Kind::disk;
    } else if (shape == "rectangle") {
      obj.kind = SceneObject::Kind::rectangle;
    } else {
      throw ConfigError("config: unknown object shape '" + shape + "'");
    }
    obj.intensity = get_or(o, "intensity", 1.0);
    if (o.contains("trajectory")) {
      for (const json& p : o.at("trajectory")) obj.trajectory.push_back(parse_pose(p));
    } else {
      const auto vel = get_or<std::vector<double>>(o, "velocity", {0.0, 0.0});
      if (vel.size() != 2) throw ConfigError("config: velocity must be [d_row, d_col]");
      obj.trajectory = linear_trajectory(parse_pose(o), vel[0], vel[1], n_t);
    }
    spec.objects.push_back(std::move(obj));
  }
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return spec;
}

void parse_solver(const json& j, SolverConfig& s) {
  const auto name = get_or<std::string>(j, "method", "AnisoTV");
  const auto method = parse_method(name);
  if (!method) {
    throw ConfigError("config: unknown method '" + name + "'; valid methods are " + method_list());
  }
  s.regularizer.method = *method;
  s.regularizer.epsilon = get_or(j, "epsilon", s.regularizer.epsilon);
  s.eta = get_or(j, "eta", s.eta);
  s.max_iters = get_or(j, "max_iters", s.max_iters);
  s.gk_seed_steps = get_or(j, "gk_seed_steps", s.gk_seed_steps);
  s.rel_change_tol = get_or(j, "rel_change_tol", s.rel_change_tol);
  s.nonneg = get_or(j, "nonneg", s.nonneg);
  if (j.contains("lambda")) s.fixed_lambda = get_or(j, "lambda", 0.0);
  if (j.contains("lambda_grid")) {
    const json& g = j.at("lambda_grid");
    const double lo = get_or(g, "min", 1e-6);
    const double hi = get_or(g, "max", 1e2);
    const int count = get_or(g, "count", 40);
    try {
      s.lambda_grid = log_grid(lo, hi, count);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: lambda_grid: ") + e.what());
    }
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class HistoryWriter {
 public:
  explicit HistoryWriter(const fs::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "iter,lambda,objective,dp_residual,rre,subspace_dim\n" << std::flush;
  }
  void operator()(const IterationRecord& r) {
    out_ << r.iter << ',' << format_double(r.lambda) << ',' << format_double(r.objective) << ','
         << format_double(r.dp_residual) << ',' << format_double(r.rre) << ',' << r.subspace_dim
         << '\n'
         << std::flush;
  }

 private:
  std::ofstream out_;
};

Matrix frame_of(const Vector& u, const Dims& dims, Index t) {
  return Eigen::Map<const Matrix>(u.data() + t * dims.n_s(), dims.n_v, dims.n_h);
}

void write_frames(const fs::path& dir, const std::string& prefix, const Vector& u,
                  const Dims& dims, json& meta) {
  double lo = u.minCoeff(), hi = u.maxCoeff();
  if (!(hi > lo)) hi = lo + 1.0;
  for (Index t = 0; t < dims.n_t; ++t) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_frame_%03d.pgm", prefix.c_str(), int(t));
    write_pgm16(dir / name, frame_of(u, dims, t), lo, hi);
  }
  meta[prefix] = {{"lo", lo}, {"hi", hi}, {"maxval", 65535}, {"frames", dims.n_t}};
}

json quality_json(const QualityReport& q) {
  json j;
  j["rre_total"] = q.rre_total;
  j["rre_per_frame"] = q.rre_per_frame;
  j["ssim_per_frame"] = q.ssim_per_frame;
  j["iters_at_dp"] = q.iters_at_dp ? json(*q.iters_at_dp) : json(nullptr);
  j["lambda_at_dp"] = q.lambda_at_dp ? json(*q.lambda_at_dp) : json(nullptr);
  return j;
}

json result_json(const SolveResult& r) {
  json j;
  j["exit_reason"] = std::string(exit_reason_name(r.reason));
  j["message"] = r.message;
  j["iterations"] = r.history.size();
  j["seed_breakdown"] = r.seed_breakdown;
  j["iters_at_dp"] = r.iters_at_dp ? json(*r.iters_at_dp) : json(nullptr);
  j["lambda_at_dp"] = r.lambda_at_dp ? json(*r.lambda_at_dp) : json(nullptr);
  if (!r.history.empty()) {
    j["final_lambda"] = r.history.back().lambda;
    j["final_dp_residual"] = r.history.back().dp_residual;
  }
  return j;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");

  RunConfig cfg;
  const auto exp = get_or<std::string>(root, "experiment", "deblur");
  if (exp == "deblur") {
    cfg.experiment = Experiment::deblur;
  } else if (exp == "radon-dynamic") {
    cfg.experiment = Experiment::radon_dynamic;
  } else if (exp == "radon-static-baseline") {
    cfg.experiment = Experiment::radon_static_baseline;
  } else {
    throw ConfigError("config: unknown experiment '" + exp +
                      "'; expected deblur, radon-dynamic or radon-static-baseline");
  }
  if (!root.contains("scene")) throw ConfigError("config: missing 'scene'");
  cfg.scene = parse_scene(section(root, "scene"));

  const json& fw = section(root, "forward");
  if (cfg.experiment == Experiment::deblur) {
    cfg.blur = BlurModel::medium(std::min(cfg.scene.n_v, cfg.scene.n_h));
    cfg.blur.sigma_psf = get_or(fw, "sigma_psf", cfg.blur.sigma_psf);
    cfg.blur.bandwidth = get_or(fw, "bandwidth", cfg.blur.bandwidth);
    if (!(cfg.blur.sigma_psf > 0.0) || cfg.blur.bandwidth < 0) {
      throw ConfigError("config: blur needs sigma_psf > 0 and bandwidth >= 0");
    }
  } else {
    if (cfg.scene.n_v != cfg.scene.n_h) throw ConfigError("config: Radon experiments need square frames");
    cfg.radon.image_side = cfg.scene.n_v;
    cfg.radon.n_t = cfg.scene.n_t;
    cfg.radon.n_angles_per_step = get_or(fw, "n_angles_per_step", 6);
    cfg.radon.n_detectors = get_or<Index>(fw, "n_detectors", 0);
    cfg.radon.start_angle_deg = get_or(fw, "start_angle_deg", 0.0);
    cfg.radon.step_offset_deg = get_or(fw, "step_offset_deg", 1.0);
    cfg.radon.angle_stride_deg = get_or(fw, "angle_stride_deg", 0.0);
    if (cfg.radon.n_angles_per_step < 1 || cfg.radon.n_detectors < 0) {
      throw ConfigError("config: Radon geometry needs at least one angle per step");
    }
  }

  const json& noise = section(root, "noise");
  cfg.noise.level = get_or(noise, "level", 0.01);
  cfg.noise.seed = get_or<std::uint64_t>(noise, "seed", 0);
  if (!(cfg.noise.level >= 0.0)) throw ConfigError("config: noise level must be nonnegative");

  cfg.solver.regularizer.dims = {cfg.scene.n_v, cfg.scene.n_h, cfg.scene.n_t};
  parse_solver(section(root, "solver"), cfg.solver);
  cfg.output_dir = get_or<std::string>(root, "output_dir", "");

  SolverConfig check = cfg.solver;
  if (cfg.experiment == Experiment::radon_static_baseline) check.regularizer.dims.n_t = 1;
  try {
    check.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

ExperimentData build_experiment(const RunConfig& config) {
  ExperimentData ex;
  ex.dims = {config.scene.n_v, config.scene.n_h, config.scene.n_t};
  ex.truth = render_scene(config.scene).vec();

  LinearOperator forward;
  if (config.experiment == Experiment::deblur) {
    forward = assemble_dynamic_forward(build_blur_operator(config.blur, ex.dims.n_v, ex.dims.n_h),
                                       ex.dims.n_t);
  } else {
    for (Index t = 1; t <= ex.dims.n_t; ++t) {
      ex.per_step.push_back(build_radon_operator(config.radon, t));
    }
    forward = assemble_dynamic_forward(ex.per_step);
  }
  ex.clean = forward.apply(ex.truth);
  const Vector gamma = Vector::Ones(ex.clean.size());
  const NoisyData noisy = add_noise(ex.clean, config.noise, gamma);
  ex.problem.forward = forward;
  ex.problem.data = noisy.data;
  ex.problem.noise_cov_diag = gamma;
  ex.problem.delta = noisy.delta;
  ex.problem.truth = ex.truth;
  return ex;
}

RunOutcome run(const RunConfig& config, std::ostream& log) {
  if (config.output_dir.empty()) throw ConfigError("config: no output directory given");
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw ConfigError("config: cannot create " + config.output_dir.string() + ": " + ec.message());

  const ExperimentData ex = build_experiment(config);
  const Dims& dims = ex.dims;
  RunOutcome out;
  Vector u = Vector::Zero(dims.n());
  json summary;
  summary["experiment"] = std::string(experiment_name(config.experiment));
  summary["method"] = std::string(method_name(config.solver.regularizer.method));
  summary["dims"] = {dims.n_v, dims.n_h, dims.n_t};
  summary["noise_level"] = config.noise.level;
  summary["seed"] = config.noise.seed;
  summary["delta"] = ex.problem.delta;
  summary["eta"] = config.solver.eta;
  summary["nonneg"] = config.solver.nonneg;

  log << experiment_name(config.experiment) << ' ' << method_name(config.solver.regularizer.method)
      << ' ' << dims.n_v << 'x' << dims.n_h << 'x' << dims.n_t << ", delta " << ex.problem.delta
      << '\n';

  if (config.experiment == Experiment::radon_static_baseline) {
    json frames = json::array();
    const Index ns = dims.n_s();
    Index row = 0;
    std::optional<int> max_iters_at_dp;
    bool all_dp = true;
    for (Index t = 0; t < dims.n_t; ++t) {
      const LinearOperator& a = ex.per_step[std::size_t(t)];
      ReconstructionProblem p;
      p.forward = a;
      p.data = ex.problem.data.segment(row, a.rows());
      p.noise_cov_diag = ex.problem.noise_cov_diag.segment(row, a.rows());
      p.delta = (p.data - ex.clean.segment(row, a.rows())).norm();
      p.truth = ex.truth.segment(t * ns, ns);
      row += a.rows();

      SolverConfig sc = config.solver;
      sc.regularizer.dims = {dims.n_v, dims.n_h, 1};
      char name[64];
      std::snprintf(name, sizeof name, "history_frame_%03d.csv", int(t));
      HistoryWriter history(config.output_dir / name);
      sc.on_iteration = [&history](const IterationRecord& r) { history(r); };

      SolveResult r = mm_gks_solve(p, sc);
      log << "  frame " << t << ": " << exit_reason_name(r.reason) << " after "
          << r.history.size() << " iterations\n";
      u.segment(t * ns, ns) = r.u;
      json fj = result_json(r);
      fj["frame"] = t;
      fj["delta"] = p.delta;
      frames.push_back(fj);
      if (r.iters_at_dp) {
        max_iters_at_dp = std::max(max_iters_at_dp.value_or(0), *r.iters_at_dp);
      } else {
        all_dp = false;
      }
      if (!r.ok()) {
        out.exit_code = 1;
        out.message = "frame " + std::to_string(t) + ": " + r.message;
      }
      out.results.push_back(std::move(r));
      if (out.exit_code != 0) break;
    }
    summary["frames"] = frames;
    out.quality = quality_report(u, ex.truth, dims);
    if (all_dp) out.quality.iters_at_dp = max_iters_at_dp;
  } else {
    SolverConfig sc = config.solver;
    sc.regularizer.dims = dims;
    HistoryWriter history(config.output_dir / "history.csv");
    sc.on_iteration = [&history](const IterationRecord& r) { history(r); };
    SolveResult r = mm_gks_solve(ex.problem, sc);
    log << "  " << exit_reason_name(r.reason) << " after " << r.history.size() << " iterations\n";
    u = r.u;
    summary["solver"] = result_json(r);
    out.quality = quality_report(u, ex.truth, dims);
    out.quality.iters_at_dp = r.iters_at_dp;
    out.quality.lambda_at_dp = r.lambda_at_dp;
    if (!r.ok()) {
      out.exit_code = 1;
      out.message = r.message;
    }
    out.results.push_back(std::move(r));
  }

  json meta;
  write_frames(config.output_dir, "recon", u, dims, meta);
  write_frames(config.output_dir, "truth", ex.truth, dims, meta);
  std::ofstream(config.output_dir / "frames.json") << meta.dump(2) << '\n';

  summary["quality"] = quality_json(out.quality);
  summary["status"] = out.exit_code == 0 ? "ok" : "solver_failure";
  if (!out.message.empty()) summary["error"] = out.message;
  std::ofstream(config.output_dir / "summary.json") << summary.dump(2) << '\n';
  log << "  total RRE " << out.quality.rre_total << '\n';
  return out;
}

void write_pgm16(const fs::path& path, const Matrix& frame, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("write_pgm16: empty intensity range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << frame.cols() << ' ' << frame.rows() << "\n65535\n";
  for (Index i = 0; i < frame.rows(); ++i) {
    for (Index j = 0; j < frame.cols(); ++j) {
      const double s = std::clamp((frame(i, j) - lo) / (hi - lo), 0.0, 1.0);
      const auto level = static_cast<unsigned>(std::lround(s * 65535.0));
      const char bytes[2] = {char(level >> 8), char(level & 0xff)};
      out.write(bytes, 2);
    }
  }
}

Matrix read_pgm16(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  Index w = 0, h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P5" || maxval != 65535 || w < 1 || h < 1) {
    throw std::runtime_error(path.string() + " is not a 16-bit binary PGM");
  }
  Matrix m(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      unsigned char bytes[2];
      if (!in.read(reinterpret_cast<char*>(bytes), 2)) throw std::runtime_error(path.string() + " is truncated");
      m(i, j) = double((unsigned(bytes[0]) << 8) | bytes[1]);
    }
  }
  return m;
}

std::vector<CompareRow> load_comparison(const std::vector<fs::path>& run_dirs) {
  std::vector<CompareRow> rows;
  for (const auto& dir : run_dirs) {
    if (!fs::exists(dir / "history.csv") && !fs::exists(dir / "history_frame_000.csv")) {
      throw std::runtime_error("compare: " + dir.string() + " has no history");
    }
    std::ifstream in(dir / "summary.json");
    if (!in) throw std::runtime_error("compare: " + dir.string() + " has no summary.json");
    json s;
    try {
      s = json::parse(in);
    } catch (const json::exception& e) {
      throw std::runtime_error("compare: " + dir.string() + "/summary.json: " + e.what());
    }
    CompareRow row;
    row.run = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    row.method = s.value("method", "");
    row.experiment = s.value("experiment", "");
    const json& q = s.at("quality");
    row.rre_total = q.at("rre_total").get<double>();
    row.rre_per_frame = q.at("rre_per_frame").get<std::vector<double>>();
    row.ssim_per_frame = q.at("ssim_per_frame").get<std::vector<double>>();
    if (!q.at("iters_at_dp").is_null()) row.iters_at_dp = q.at("iters_at_dp").get<int>();
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompareRow& a, const CompareRow& b) { return a.rre_total < b.rre_total; });
  return rows;
}

std::string format_comparison(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "run" << std::setw(16) << "method" << std::setw(24)
     << "experiment" << std::right << std::setw(10) << "RRE" << std::setw(10) << "SSIM"
     << std::setw(8) << "DP it" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    double mean_ssim = 0.0;
    for (double v : r.ssim_per_frame) mean_ssim += v;
    if (!r.ssim_per_frame.empty()) mean_ssim /= double(r.ssim_per_frame.size());
    os << std::left << std::setw(24) << r.run << std::setw(16) << r.method << std::setw(24)
       << r.experiment << std::right << std::setprecision(4) << std::setw(10) << r.rre_total
       << std::setw(10) << mean_ssim << std::setw(8)
       << (r.iters_at_dp ? std::to_string(*r.iters_at_dp) : std::string("-")) << '\n';
  }
  os << "\nper-frame RRE / SSIM\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.run << std::right;
    for (std::size_t t = 0; t < r.rre_per_frame.size(); ++t) {
      os << "  " << std::setprecision(4) << r.rre_per_frame[t] << '/' << std::setprecision(3)
         << (t < r.ssim_per_frame.size() ? r.ssim_per_frame[t] : 0.0);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace mmgks
