// Command-line front end: simulate worlds, run the pipeline on logs, evaluate and export plots.

#include "dpmhm/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dpmhm;

namespace {

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

template <typename T, typename W>
void write_csv(const fs::path& path, const std::vector<T>& rows, W writer) {
  std::ostringstream os;
  writer(os, std::span<const T>(rows));
  write_text_file(path.string(), os.str());
}

template <typename R>
auto read_csv_file(const std::string& path, R reader) {
  std::istringstream is(read_text_file(path));
  try {
    return reader(is);
  } catch (const LogFormatError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg = config_from(config_path);
  const RunInputs in = simulate_inputs(cfg);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_csv(dir / "measurements.csv", in.measurements, write_measurements);
  write_csv(dir / "odometry.csv", in.odometry, write_odometry);
  write_csv(dir / "ground_truth.csv", in.ground_truth, write_poses);
  write_text_file((dir / "config.txt").string(), serialize_config(cfg));
  std::printf("simulated %zu scenes, %zu measurements -> %s\n", in.odometry.size(), in.measurements.size(),
              out_dir.c_str());
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& meas, const std::string& odo, const std::string& gt,
            const std::string& out_dir) {
  const RunConfig cfg = config_from(config_path);
  RunInputs in;
  in.measurements = read_csv_file(meas, read_measurements);
  in.odometry = read_csv_file(odo, read_odometry);
  if (!gt.empty()) in.ground_truth = read_csv_file(gt, read_poses);
  const RunOutputs out = run_pipeline(cfg, in);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_csv(dir / "trajectory.csv", out.trajectory, write_poses);
  write_csv(dir / "map.csv", out.map, write_map);
  write_csv(dir / "metrics.csv", out.metrics, write_metrics);

  std::printf("mode=%s scenes=%zu submaps=%d landmarks=%zu loop_closures=%zu mean_hypotheses=%.3f\n",
              to_string(cfg.mode).c_str(), out.trajectory.size(), out.submaps, out.map.size(),
              out.loop_closures.size(), out.mean_hypotheses);
  if (!gt.empty())
    std::printf("rmse=%.4f odometry_rmse=%.4f drift_reduction=%.1f%%\n", out.final_rmse, out.odometry_rmse,
                out.odometry_rmse > 0.0 ? drift_reduction_percent(out.odometry_rmse, out.final_rmse) : 0.0);
  return 0;
}

int cmd_eval(const std::string& traj, const std::string& gt_path, const std::string& odo, const std::string& run_metrics,
             const std::string& out_path) {
  const auto est = read_csv_file(traj, read_poses);
  const auto gt = read_csv_file(gt_path, read_poses);
  const EvalReport rep = evaluate_trajectory(est, gt);

  std::vector<MetricsRow> prior;
  if (!run_metrics.empty()) prior = read_csv_file(run_metrics, read_metrics);
  std::vector<MetricsRow> rows;
  double sq = 0.0;
  for (std::size_t k = 0; k < rep.errors.size(); ++k) {
    sq += rep.errors[k] * rep.errors[k];
    MetricsRow r;
    r.frame = static_cast<int>(k);
    r.rmse = std::sqrt(sq / static_cast<double>(k + 1));
    if (k < prior.size()) {
      r.n_hypotheses = prior[k].n_hypotheses;
      r.n_landmarks = prior[k].n_landmarks;
      r.n_loop_closures = prior[k].n_loop_closures;
    }
    rows.push_back(r);
  }
  if (!out_path.empty()) write_csv(out_path, rows, write_metrics);

  std::printf("rmse=%.6f std=%.6f poses=%zu\n", rep.rmse, rep.error_std, rep.errors.size());
  if (!prior.empty()) {
    double h = 0.0;
    for (const auto& r : prior) h += r.n_hypotheses;
    std::printf("mean_hypotheses=%.3f\n", h / static_cast<double>(prior.size()));
  }
  if (!odo.empty()) {
    const auto raw = dead_reckoning(read_csv_file(odo, read_odometry));
    const EvalReport raw_rep = evaluate_trajectory(raw, gt);
    std::printf("odometry_rmse=%.6f drift_reduction=%.1f%%\n", raw_rep.rmse,
                raw_rep.rmse > 0.0 ? drift_reduction_percent(raw_rep.rmse, rep.rmse) : 0.0);
  }
  return 0;
}

// One column per labelled metrics file: frame,<label1>,<label2>,...
int cmd_export_plot(const std::vector<std::string>& series, const std::string& out_path) {
  std::vector<std::string> labels;
  std::vector<std::vector<MetricsRow>> data;
  for (const auto& s : series) {
    const auto eq = s.find('=');
    labels.push_back(eq == std::string::npos ? fs::path(s).parent_path().filename().string() : s.substr(0, eq));
    data.push_back(read_csv_file(eq == std::string::npos ? s : s.substr(eq + 1), read_metrics));
  }
  std::size_t frames = 0;
  for (const auto& d : data) frames = std::max(frames, d.size());
  std::ostringstream os;
  os << "frame";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  for (std::size_t k = 0; k < frames; ++k) {
    os << k;
    for (const auto& d : data) os << ',' << (k < d.size() ? format9(d[k].rmse) : std::string());
    os << '\n';
  }
  write_text_file(out_path, os.str());
  std::printf("wrote %zu frames x %zu series -> %s\n", frames, series.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-hypothesis semantic mapping toolkit"};
  app.require_subcommand(1);

  std::string config, out_dir = "out", meas, odo, gt, traj, run_metrics, out_path;
  std::vector<std::string> series;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic world and write its logs");
  sim->add_option("-c,--config", config, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out_dir, "Output directory");

  auto* run = app.add_subcommand("run", "Run the mapping pipeline on logs");
  run->add_option("-c,--config", config, "Config file")->check(CLI::ExistingFile);
  run->add_option("-m,--measurements", meas, "Measurement log")->required()->check(CLI::ExistingFile);
  run->add_option("--odometry", odo, "Odometry log")->required()->check(CLI::ExistingFile);
  run->add_option("-g,--ground-truth", gt, "Ground truth, enables the RMSE column")->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "Output directory");

  auto* ev = app.add_subcommand("eval", "Compare a trajectory against ground truth");
  ev->add_option("-t,--trajectory", traj, "Estimated trajectory")->required()->check(CLI::ExistingFile);
  ev->add_option("-g,--ground-truth", gt, "Ground truth")->required()->check(CLI::ExistingFile);
  ev->add_option("--odometry", odo, "Odometry log, reports drift reduction")->check(CLI::ExistingFile);
  ev->add_option("--run-metrics", run_metrics, "metrics.csv of the run, copies hypothesis counts")
      ->check(CLI::ExistingFile);
  ev->add_option("-o,--out", out_path, "Write a metrics CSV");

  auto* plot = app.add_subcommand("export-plot", "Per-frame RMSE series of one or more runs");
  plot->add_option("-s,--series", series, "label=metrics.csv (repeatable)")->required();
  plot->add_option("-o,--out", out_path, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(config, out_dir);
    if (*run) return cmd_run(config, meas, odo, gt, out_dir);
    if (*ev) return cmd_eval(traj, gt, odo, run_metrics, out_path);
    if (*plot) return cmd_export_plot(series, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
