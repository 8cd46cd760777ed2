#pragma once

// Method runners and the two benchmark suites: surface transfer (a cleaning
// loop carried from a flat baseline onto curved surfaces) and reaching between
// moved frames. Runs are spread over a worker pool; results are always
// reported in (scenario, method) order, independent of the worker count.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "poltrans/baselines.hpp"
#include "poltrans/metrics.hpp"
#include "poltrans/scenarios.hpp"
#include "poltrans/transport.hpp"

namespace poltrans {

enum class Method { gpt, le, reshaped_kmp, lwt };

/// {"gpt", "le", "reshaped_kmp", "lwt"}
const std::vector<std::string>& method_ids();
std::string to_string(Method m);
std::optional<Method> parse_method(const std::string& id);

struct MethodOptions {
  TransportConfig transport;
  /// Time -> displacement GP used by Reshaped-KMP.
  GPConfig time_gp = [] {
    GPConfig c;
    c.max_noise_ratio = 1e-6;
    return c;
  }();
  LWTConfig lwt;
  Topology le_topology = Topology::chain;
};

struct MethodRun {
  Trajectory rollout;
  /// Per-sample standard deviation of the transported position (gpt only).
  std::vector<double> position_std;
  double fit_seconds = 0.0;
  double transport_seconds = 0.0;
  /// Map methods: |map(s_i) - t_i| over the keypoints. Reshaping methods:
  /// distance of each via sample from its displaced target.
  KeypointMismatch accuracy;
  /// Fraction of transported samples with det(J) > 0 (map methods only).
  std::optional<double> det_positive_fraction;
  std::string warning;
};

MethodRun run_method(Method method, const PairedKeypoints& kp, const Trajectory& demonstration,
                     const MethodOptions& options = {});

/// Worker count: POLTRANS_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs `tasks` jobs on up to `workers` threads. job(i) must only write to
/// slot i of its own output.
void parallel_for(std::size_t tasks, std::size_t workers, const std::function<void(std::size_t)>& job);

struct BenchConfig {
  /// "surfaces" or "frames".
  std::string suite = "surfaces";
  std::vector<Method> methods{Method::gpt, Method::le, Method::reshaped_kmp, Method::lwt};
  /// Surfaces: one randomized surface per non-flat profile and seed, on top
  /// of the fixed presets. Frames: one test configuration per seed.
  std::vector<std::uint64_t> seeds;
  std::size_t surface_keypoints = 20;
  std::size_t frame_keypoints = 5;
  /// Laplacian editing only sees this many points per frame.
  std::size_t le_frame_keypoints = 2;
  std::size_t training_configurations = 9;
  double test_spread = 1.0;
  double training_spread = 0.5;
  double alpha = 0.05;
  MethodOptions options;
  /// 0 means worker_count().
  std::size_t threads = 0;
};

/// Default seeds: 0..2 for surfaces, 0..19 for frames.
std::vector<std::uint64_t> default_bench_seeds(const std::string& suite);

struct BenchRow {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  std::optional<MetricReport> metrics;
  std::string status = "ok";
  /// Timing and map diagnostics; kept out of the metrics table so reruns of
  /// that table are bitwise identical.
  MethodRun run;
};

struct BenchScenario {
  std::string name;
  std::uint64_t seed = 0;
  PairedKeypoints keypoints;
  /// Keypoints shown to Laplacian editing.
  PairedKeypoints le_keypoints;
  Trajectory demonstration;
  Trajectory reference;
  /// Closed loops are edited as rings.
  Topology le_topology = Topology::chain;
};

std::vector<BenchScenario> bench_scenarios(const BenchConfig& config);

/// The protocol for frames: the training configurations are
/// random_frame_pair(i, training_spread) for i < training_configurations; a
/// test seed draws one of them as the demonstration and moves the frames to
/// random_frame_pair(1000 + seed, test_spread).
FrameScenario frame_bench_scenario(std::uint64_t seed, const BenchConfig& config);

struct BenchResult {
  std::vector<BenchScenario> scenarios;
  /// (scenario, method) order.
  std::vector<BenchRow> rows;
  RankingResult ranking;
  MethodSamples samples;
};

BenchResult run_bench(const BenchConfig& config);

/// scenario,method,seed,frechet,area,dtw,final_position,final_angle,status
std::string metrics_csv(const BenchResult& result);
/// scenario,method,seed,fit_seconds,transport_seconds,accuracy_max,
/// accuracy_mean,det_positive_percent,warning
std::string report_csv(const BenchResult& result);
std::string ranking_json(const BenchResult& result);
std::string scenario_svg(const BenchResult& result, std::size_t scenario_index);

/// Writes metrics.csv, report.csv, ranking.json and svg/<scenario>.svg.
void write_bench_outputs(const BenchResult& result, const std::filesystem::path& out_dir, bool svg = true);

}  // namespace poltrans
