#include "mmgks/cli.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace mmgks;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path dir = fs::temp_directory_path() / "mmgks_cli_tests" /
                 (std::string(info->test_suite_name()) + "_" + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

json deblur_config(Index side, Index n_t, const std::string& method) {
  return {{"experiment", "deblur"},
          {"scene", {{"n_v", side}, {"n_h", side}, {"n_t", n_t}, {"preset", "moving-disks"}}},
          {"forward", {{"sigma_psf", 0.85}, {"bandwidth", 3}}},
          {"noise", {{"level", 0.01}, {"seed", 1}}},
          {"solver", {{"method", method}, {"max_iters", 40}}}};
}

json radon_config(const std::string& experiment, Index side, Index n_t) {
  return {{"experiment", experiment},
          {"scene", {{"n_v", side}, {"n_h", side}, {"n_t", n_t}, {"preset", "moving-disks"}}},
          {"forward", {{"n_angles_per_step", 5}}},
          {"noise", {{"level", 0.01}, {"seed", 2}}},
          {"solver", {{"method", "AnisoTV"}, {"max_iters", 25}}}};
}

struct Command {
  int exit_code;
  std::string output;
};

Command run_binary(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "command_output.txt";
  const std::string cmd = std::string("\"") + DYNRECON_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(log)};
}

}  // namespace

TEST(Config, DefaultsForMinimalDeblur) {
  const RunConfig c = parse_run_config(R"({"scene": {"n_v": 32, "n_h": 32, "n_t": 4, "preset": "moving-disks"}})");
  EXPECT_EQ(c.experiment, Experiment::deblur);
  EXPECT_DOUBLE_EQ(c.blur.sigma_psf, 0.5);
  EXPECT_EQ(c.blur.bandwidth, 2);
  EXPECT_DOUBLE_EQ(c.noise.level, 0.01);
  EXPECT_EQ(c.solver.regularizer.method, Method::AnisoTV);
  EXPECT_DOUBLE_EQ(c.solver.regularizer.epsilon, 1e-3);
  EXPECT_DOUBLE_EQ(c.solver.eta, 1.01);
  EXPECT_EQ(c.solver.max_iters, 150);
  EXPECT_EQ(c.solver.gk_seed_steps, 5);
  EXPECT_FALSE(c.solver.nonneg);
  EXPECT_EQ(c.solver.lambda_grid, default_lambda_grid());
  EXPECT_EQ(c.scene.objects.size(), 6u);
}

TEST(Config, ExplicitObjectsAndSolverFields) {
  const RunConfig c = parse_run_config(R"({
    "experiment": "radon-dynamic",
    "scene": {"n_v": 16, "n_h": 16, "n_t": 3, "objects": [
      {"shape": "disk", "intensity": 0.5, "row": 4, "col": 5, "radius": 2, "velocity": [1, 0]},
      {"shape": "rectangle", "trajectory": [
         {"row": 8, "col": 8, "half_height": 1, "half_width": 2},
         {"row": 8, "col": 9, "half_height": 1, "half_width": 2},
         {"row": 8, "col": 10, "half_height": 1, "half_width": 2}]}]},
    "forward": {"n_angles_per_step": 4, "n_detectors": 20, "angle_stride_deg": 45},
    "solver": {"method": "GS", "epsilon": 0.01, "nonneg": true, "lambda": 0.25,
               "lambda_grid": {"min": 1e-3, "max": 1, "count": 4}},
    "output_dir": "somewhere"})");
  EXPECT_EQ(c.experiment, Experiment::radon_dynamic);
  ASSERT_EQ(c.scene.objects.size(), 2u);
  EXPECT_DOUBLE_EQ(c.scene.objects[0].trajectory[2].row, 6.0);
  EXPECT_EQ(c.scene.objects[1].kind, SceneObject::Kind::rectangle);
  EXPECT_DOUBLE_EQ(c.scene.objects[1].trajectory[2].col, 10.0);
  EXPECT_EQ(c.radon.n_angles_per_step, 4);
  EXPECT_EQ(c.radon.detectors(), 20);
  EXPECT_DOUBLE_EQ(c.radon.stride(), 45.0);
  EXPECT_EQ(c.solver.regularizer.method, Method::GS);
  EXPECT_DOUBLE_EQ(c.solver.regularizer.epsilon, 0.01);
  EXPECT_TRUE(c.solver.nonneg);
  EXPECT_EQ(c.solver.fixed_lambda, 0.25);
  EXPECT_EQ(c.solver.lambda_grid.size(), 4u);
  EXPECT_EQ(c.output_dir, fs::path("somewhere"));
}

TEST(Config, UnknownMethodListsValidOnes) {
  try {
    parse_run_config(R"({"scene": {"n_v": 8, "n_h": 8, "n_t": 2, "preset": "moving-disks"},
                         "solver": {"method": "TotalVariation"}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (Method m : kAllMethods) EXPECT_NE(msg.find(method_name(m)), std::string::npos) << msg;
  }
}

TEST(Config, Malformed) {
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(parse_run_config("[1, 2]"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"experiment": "deblur"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"scene": {"n_v": 8, "n_h": 8, "n_t": 2, "preset": "stars"}})"),
               ConfigError);
  EXPECT_THROW(parse_run_config(R"({"scene": {"n_v": "eight", "n_h": 8, "n_t": 2, "preset": "moving-disks"}})"),
               ConfigError);
  EXPECT_THROW(parse_run_config(R"({"experiment": "radon-dynamic",
                                    "scene": {"n_v": 8, "n_h": 10, "n_t": 2, "preset": "moving-disks"}})"),
               ConfigError);
  EXPECT_THROW(parse_run_config(R"({"scene": {"n_v": 8, "n_h": 8, "n_t": 2, "preset": "moving-disks"},
                                    "solver": {"eta": 0.9}})"),
               ConfigError);
  EXPECT_THROW(parse_run_config(R"({"experiment": "radon-static-baseline",
                                    "scene": {"n_v": 8, "n_h": 8, "n_t": 2, "preset": "moving-disks"},
                                    "solver": {"method": "Aniso3DTV"}})"),
               ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(Pgm, RoundTripLevels) {
  const fs::path dir = scratch_dir();
  Matrix frame(3, 4);
  frame << 0, 0.25, 0.5, 1, 1, 0.75, 0.5, 0, -1, 2, 0.5, 0.5;
  write_pgm16(dir / "f.pgm", frame, 0.0, 1.0);
  const Matrix levels = read_pgm16(dir / "f.pgm");
  ASSERT_EQ(levels.rows(), 3);
  ASSERT_EQ(levels.cols(), 4);
  EXPECT_EQ(levels(0, 3), 65535);
  EXPECT_EQ(levels(0, 0), 0);
  EXPECT_EQ(levels(0, 1), std::round(0.25 * 65535));
  EXPECT_EQ(levels(2, 0), 0);       // clamped
  EXPECT_EQ(levels(2, 1), 65535);   // clamped
}

TEST(Run, DeblurWritesFramesHistoryAndSummary) {
  const fs::path dir = scratch_dir();
  RunConfig cfg = parse_run_config(deblur_config(16, 3, "IsoTV").dump());
  cfg.output_dir = dir / "out";
  std::ostringstream log;
  const RunOutcome out = run(cfg, log);
  EXPECT_EQ(out.exit_code, 0) << out.message;
  for (int t = 0; t < 3; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "recon_frame_%03d.pgm", t);
    EXPECT_TRUE(fs::exists(cfg.output_dir / name));
    std::snprintf(name, sizeof name, "truth_frame_%03d.pgm", t);
    EXPECT_TRUE(fs::exists(cfg.output_dir / name));
  }
  const int rows = count_lines(cfg.output_dir / "history.csv") - 1;
  EXPECT_EQ(rows, int(out.results.front().history.size()));
  EXPECT_LE(rows, 40);
  const json s = json::parse(read_file(cfg.output_dir / "summary.json"));
  EXPECT_EQ(s["method"], "IsoTV");
  EXPECT_EQ(s["status"], "ok");
  EXPECT_EQ(s["quality"]["rre_per_frame"].size(), 3u);
  EXPECT_DOUBLE_EQ(s["quality"]["rre_total"].get<double>(), out.quality.rre_total);
  const json meta = json::parse(read_file(cfg.output_dir / "frames.json"));
  EXPECT_EQ(meta["recon"]["maxval"], 65535);
  EXPECT_LE(meta["truth"]["lo"].get<double>(), meta["truth"]["hi"].get<double>());
}

TEST(Run, StaticBaselineWritesOneHistoryPerFrame) {
  const fs::path dir = scratch_dir();
  RunConfig cfg = parse_run_config(radon_config("radon-static-baseline", 16, 3).dump());
  cfg.output_dir = dir / "static";
  std::ostringstream log;
  const RunOutcome out = run(cfg, log);
  EXPECT_EQ(out.exit_code, 0) << out.message;
  EXPECT_EQ(out.results.size(), 3u);
  for (int t = 0; t < 3; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "history_frame_%03d.csv", t);
    EXPECT_TRUE(fs::exists(cfg.output_dir / name)) << name;
  }
  EXPECT_FALSE(fs::exists(cfg.output_dir / "history.csv"));
  const json s = json::parse(read_file(cfg.output_dir / "summary.json"));
  EXPECT_EQ(s["frames"].size(), 3u);
  EXPECT_EQ(s["experiment"], "radon-static-baseline");
}

TEST(Run, ReproducibleUnderFixedSeed) {
  const fs::path dir = scratch_dir();
  RunConfig cfg = parse_run_config(deblur_config(12, 2, "GS").dump());
  std::ostringstream log;
  cfg.output_dir = dir / "a";
  run(cfg, log);
  cfg.output_dir = dir / "b";
  run(cfg, log);
  EXPECT_EQ(read_file(dir / "a" / "history.csv"), read_file(dir / "b" / "history.csv"));
  EXPECT_EQ(read_file(dir / "a" / "recon_frame_001.pgm"), read_file(dir / "b" / "recon_frame_001.pgm"));
}

TEST(Compare, SortsByTotalRreAndNeedsHistory) {
  const fs::path dir = scratch_dir();
  std::vector<fs::path> runs;
  std::ostringstream log;
  for (const char* m : {"AnisoTV", "GS", "Iso3DTV"}) {
    RunConfig cfg = parse_run_config(deblur_config(12, 3, m).dump());
    cfg.output_dir = dir / m;
    run(cfg, log);
    runs.push_back(cfg.output_dir);
  }
  const auto rows = load_comparison(runs);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_LE(rows[0].rre_total, rows[1].rre_total);
  EXPECT_LE(rows[1].rre_total, rows[2].rre_total);
  const std::string table = format_comparison(rows);
  for (const char* m : {"AnisoTV", "GS", "Iso3DTV"}) EXPECT_NE(table.find(m), std::string::npos);

  const auto self = load_comparison({runs[0], runs[0]});
  EXPECT_EQ(self[0].rre_per_frame, self[1].rre_per_frame);
  EXPECT_EQ(self[0].ssim_per_frame, self[1].ssim_per_frame);

  fs::remove(runs[1] / "history.csv");
  EXPECT_THROW(load_comparison(runs), std::runtime_error);
  EXPECT_THROW(load_comparison({dir / "missing"}), std::runtime_error);
}

TEST(Binary, ReconstructDeblurEndToEnd) {
  const fs::path dir = scratch_dir();
  json cfg = deblur_config(32, 4, "AnisoTV");
  cfg["solver"].erase("max_iters");
  const fs::path config = write_config(dir, "deblur.json", cfg);
  const Command c = run_binary("reconstruct --config \"" + config.string() + "\" --out \"" +
                                   (dir / "run").string() + "\"",
                               dir);
  ASSERT_EQ(c.exit_code, 0) << c.output;
  for (int t = 0; t < 4; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "recon_frame_%03d.pgm", t);
    EXPECT_TRUE(fs::exists(dir / "run" / name));
  }
  const int rows = count_lines(dir / "run" / "history.csv") - 1;
  EXPECT_GE(rows, 1);
  EXPECT_LE(rows, 150);
  const json s = json::parse(read_file(dir / "run" / "summary.json"));
  if (s["solver"]["exit_reason"] == "discrepancy") {
    EXPECT_LE(s["solver"]["final_dp_residual"].get<double>(), 1.01 * s["delta"].get<double>());
  }
}

TEST(Binary, OverridesApply) {
  const fs::path dir = scratch_dir();
  const fs::path config = write_config(dir, "c.json", deblur_config(12, 2, "AnisoTV"));
  const Command c = run_binary("reconstruct --config \"" + config.string() + "\" --out \"" +
                                   (dir / "run").string() + "\" --seed 9 --method GS --nonneg",
                               dir);
  ASSERT_EQ(c.exit_code, 0) << c.output;
  const json s = json::parse(read_file(dir / "run" / "summary.json"));
  EXPECT_EQ(s["method"], "GS");
  EXPECT_EQ(s["seed"], 9);
  EXPECT_EQ(s["nonneg"], true);
}

TEST(Binary, UnknownMethodExitsWithTwo) {
  const fs::path dir = scratch_dir();
  const fs::path config = write_config(dir, "c.json", deblur_config(12, 2, "AnisoTV"));
  Command c = run_binary("reconstruct --config \"" + config.string() + "\" --out \"" +
                             (dir / "run").string() + "\" --method Wavelets",
                         dir);
  EXPECT_EQ(c.exit_code, 2);
  for (Method m : kAllMethods) EXPECT_NE(c.output.find(method_name(m)), std::string::npos) << c.output;

  const fs::path bad = write_config(dir, "bad.json", deblur_config(12, 2, "Wavelets"));
  c = run_binary("reconstruct --config \"" + bad.string() + "\" --out \"" + (dir / "run").string() + "\"", dir);
  EXPECT_EQ(c.exit_code, 2);
  EXPECT_NE(c.output.find("TVplusTikhonov"), std::string::npos) << c.output;
}

TEST(Binary, MalformedConfigExitsWithTwo) {
  const fs::path dir = scratch_dir();
  std::ofstream(dir / "broken.json") << "{\"scene\": ";
  const Command c = run_binary("reconstruct --config \"" + (dir / "broken.json").string() + "\" --out \"" +
                                   (dir / "run").string() + "\"",
                               dir);
  EXPECT_EQ(c.exit_code, 2);
  EXPECT_FALSE(c.output.empty());
  EXPECT_EQ(run_binary("reconstruct --out x", dir).exit_code, 2);
}

TEST(Binary, CompareDynamicAndStatic) {
  const fs::path dir = scratch_dir();
  const fs::path dyn = write_config(dir, "dyn.json", radon_config("radon-dynamic", 16, 3));
  const fs::path stat = write_config(dir, "static.json", radon_config("radon-static-baseline", 16, 3));
  ASSERT_EQ(run_binary("reconstruct --config \"" + dyn.string() + "\" --out \"" + (dir / "dyn").string() + "\"", dir)
                .exit_code,
            0);
  ASSERT_EQ(run_binary("reconstruct --config \"" + stat.string() + "\" --out \"" + (dir / "static").string() + "\"",
                       dir)
                .exit_code,
            0);
  const Command c = run_binary("compare \"" + (dir / "dyn").string() + "\" \"" + (dir / "static").string() + "\"", dir);
  ASSERT_EQ(c.exit_code, 0) << c.output;
  EXPECT_NE(c.output.find("radon-dynamic"), std::string::npos);
  EXPECT_NE(c.output.find("radon-static-baseline"), std::string::npos);

  EXPECT_EQ(run_binary("compare \"" + (dir / "nothing").string() + "\"", dir).exit_code, 1);
}
