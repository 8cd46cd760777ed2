#include "poltrans/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/LU>

#include "poltrans/affine.hpp"
#include "poltrans/io.hpp"
#include "poltrans/svg.hpp"

namespace poltrans {

const std::vector<std::string>& method_ids() {
  static const std::vector<std::string> ids{"gpt", "le", "reshaped_kmp", "lwt"};
  return ids;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::gpt: return "gpt";
    case Method::le: return "le";
    case Method::reshaped_kmp: return "reshaped_kmp";
    case Method::lwt: return "lwt";
  }
  return "unknown";
}

std::optional<Method> parse_method(const std::string& id) {
  if (id == "gpt") return Method::gpt;
  if (id == "le") return Method::le;
  if (id == "reshaped_kmp") return Method::reshaped_kmp;
  if (id == "lwt") return Method::lwt;
  return std::nullopt;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

KeypointMismatch summarize(const std::vector<double>& errors) {
  KeypointMismatch m;
  for (double e : errors) {
    m.max = std::max(m.max, e);
    m.mean += e;
  }
  if (!errors.empty()) m.mean /= static_cast<double>(errors.size());
  return m;
}

MethodRun run_reshaping(Method method, const PairedKeypoints& kp, const Trajectory& demo, const MethodOptions& opt) {
  MethodRun run;
  const auto t0 = Clock::now();
  const ViaAssignment assignment = assign_via_points(demo, kp);
  const auto targets = displaced_targets(demo, assignment, kp);
  run.fit_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  run.rollout = method == Method::le ? laplacian_edit(demo, assignment, targets, opt.le_topology)
                                     : reshaped_kmp(demo, assignment, targets, opt.time_gp);
  run.transport_seconds = seconds_since(t1);
  std::vector<double> err;
  for (std::size_t k = 0; k < assignment.pairs.size(); ++k) {
    err.push_back((run.rollout[assignment.pairs[k].trajectory_index] - targets[k]).norm());
  }
  run.accuracy = summarize(err);
  return run;
}

MethodRun run_gpt(const PairedKeypoints& kp, const Trajectory& demo, const MethodOptions& opt) {
  MethodRun run;
  const auto t0 = Clock::now();
  const TransportMap map = fit_transport(kp, opt.transport);
  run.fit_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  std::vector<Vector> pts;
  pts.reserve(demo.size());
  run.position_std.reserve(demo.size());
  for (const auto& x : demo.positions()) {
    const auto pt = transport_point(map, x);
    pts.push_back(pt.mean);
    run.position_std.push_back(std::sqrt(pt.variance));
  }
  run.transport_seconds = seconds_since(t1);
  run.rollout = Trajectory(demo.dim(), std::move(pts), demo.times());
  run.accuracy = keypoint_mismatch(map);
  run.det_positive_fraction = check_local_diffeomorphism(map, demo.positions()).positive_fraction;
  return run;
}

MethodRun run_lwt(const PairedKeypoints& kp, const Trajectory& demo, const MethodOptions& opt) {
  MethodRun run;
  const auto t0 = Clock::now();
  const AffineMap affine = fit_affine(kp);
  std::vector<Vector> moved;
  for (const auto& s : kp.source().points()) moved.push_back(apply_affine(affine, s));
  const PairedKeypoints aligned(PointSet(kp.dim(), moved), kp.target());
  const LWTMap lwt = fit_lwt(aligned, opt.lwt);
  run.fit_seconds = seconds_since(t0);
  run.warning = lwt.warning;

  const auto t1 = Clock::now();
  std::vector<Vector> pts;
  pts.reserve(demo.size());
  for (const auto& x : demo.positions()) pts.push_back(apply_lwt(lwt, apply_affine(affine, x)));
  run.transport_seconds = seconds_since(t1);
  run.rollout = Trajectory(demo.dim(), std::move(pts), demo.times());

  std::vector<double> err;
  for (std::size_t i = 0; i < kp.size(); ++i) err.push_back((apply_lwt(lwt, moved[i]) - kp.target()[i]).norm());
  run.accuracy = summarize(err);
  std::size_t positive = 0;
  for (const auto& x : demo.positions()) {
    if (lwt_jacobian(lwt, apply_affine(affine, x)).determinant() > 0.0) ++positive;
  }
  run.det_positive_fraction = static_cast<double>(positive) / static_cast<double>(demo.size());
  return run;
}

}  // namespace

MethodRun run_method(Method method, const PairedKeypoints& kp, const Trajectory& demonstration,
                     const MethodOptions& options) {
  switch (method) {
    case Method::gpt: return run_gpt(kp, demonstration, options);
    case Method::le:
    case Method::reshaped_kmp: return run_reshaping(method, kp, demonstration, options);
    case Method::lwt: return run_lwt(kp, demonstration, options);
  }
  throw std::invalid_argument("unknown method");
}

std::size_t worker_count() {
  if (const char* env = std::getenv("POLTRANS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t tasks, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, tasks));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<std::uint64_t> default_bench_seeds(const std::string& suite) {
  const std::uint64_t n = suite == "frames" ? 20 : 3;
  std::vector<std::uint64_t> seeds(n);
  for (std::uint64_t i = 0; i < n; ++i) seeds[i] = i;
  return seeds;
}

FrameScenario frame_bench_scenario(std::uint64_t seed, const BenchConfig& config) {
  if (config.training_configurations == 0) throw std::invalid_argument("need at least one training configuration");
  std::mt19937_64 rng(seed);
  const auto pick = std::uniform_int_distribution<std::uint64_t>(0, config.training_configurations - 1)(rng);
  const FramePair source = random_frame_pair(pick, config.training_spread);
  const FramePair test = random_frame_pair(1000 + seed, config.test_spread);
  return make_frame_scenario(test.start, test.goal, config.frame_keypoints, seed, source);
}

std::vector<BenchScenario> bench_scenarios(const BenchConfig& config) {
  const auto seeds = config.seeds.empty() ? default_bench_seeds(config.suite) : config.seeds;
  std::vector<BenchScenario> out;
  if (config.suite == "surfaces") {
    auto add = [&](const std::string& name, SurfaceProfile profile, std::uint64_t seed,
                   std::optional<ProfileParams> params) {
      const auto sc = make_surface_scenario(profile, config.surface_keypoints, seed, params);
      out.push_back({name, seed, sc.keypoints, sc.keypoints, sc.demonstration, surface_reference(sc),
                     Topology::ring});
    };
    ProfileParams tilt;
    tilt.tilt = 0.4;
    ProfileParams mild;
    mild.amplitude = 0.05;
    mild.frequency = 1.0;
    ProfileParams strong;
    strong.amplitude = 0.15;
    strong.frequency = 2.0;
    ProfileParams step;
    step.height = 0.15;
    step.width = 0.05;
    ProfileParams composite;
    composite.tilt = 0.2;
    composite.amplitude = 0.04;
    composite.frequency = 1.5;
    composite.height = 0.08;
    composite.width = 0.08;
    add("flat", SurfaceProfile::flat, 0, ProfileParams{});
    add("tilt", SurfaceProfile::tilt, 0, tilt);
    add("sine_mild", SurfaceProfile::sine, 0, mild);
    add("sine_strong", SurfaceProfile::sine, 0, strong);
    add("step", SurfaceProfile::step, 0, step);
    add("composite", SurfaceProfile::composite, 0, composite);
    for (const auto seed : seeds) {
      for (const auto profile :
           {SurfaceProfile::tilt, SurfaceProfile::sine, SurfaceProfile::step, SurfaceProfile::composite}) {
        add(to_string(profile) + "_s" + std::to_string(seed), profile, seed, std::nullopt);
      }
    }
  } else if (config.suite == "frames") {
    for (const auto seed : seeds) {
      const auto sc = frame_bench_scenario(seed, config);
      out.push_back({"frames_s" + std::to_string(seed), seed, sc.keypoints,
                     frame_keypoint_subset(sc, std::min(config.le_frame_keypoints, config.frame_keypoints)),
                     sc.demonstration, sc.reference, Topology::chain});
    }
  } else {
    throw std::invalid_argument("unknown suite '" + config.suite + "' (expected surfaces|frames)");
  }
  return out;
}

BenchResult run_bench(const BenchConfig& config) {
  BenchResult result;
  result.scenarios = bench_scenarios(config);
  const std::size_t nm = config.methods.size();
  const std::size_t tasks = result.scenarios.size() * nm;
  result.rows.resize(tasks);
  parallel_for(tasks, config.threads > 0 ? config.threads : worker_count(), [&](std::size_t i) {
    const auto& sc = result.scenarios[i / nm];
    const Method method = config.methods[i % nm];
    BenchRow& row = result.rows[i];
    row.scenario = sc.name;
    row.method = to_string(method);
    row.seed = sc.seed;
    MethodOptions opt = config.options;
    opt.le_topology = sc.le_topology;
    try {
      row.run = run_method(method, method == Method::le ? sc.le_keypoints : sc.keypoints, sc.demonstration, opt);
      row.metrics = compare_trajectories(row.run.rollout, sc.reference);
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
      row.metrics.reset();
    }
  });

  for (const auto m : config.methods) result.samples[to_string(m)];
  for (const auto& row : result.rows) {
    if (!row.metrics) continue;
    for (const auto& name : metric_names()) result.samples[row.method][name].push_back(metric_value(*row.metrics, name));
  }
  // The rank test needs three samples per method; thinner methods only appear
  // with zero points.
  MethodSamples testable;
  for (const auto& [method, per_metric] : result.samples) {
    bool enough = !per_metric.empty();
    for (const auto& [metric, v] : per_metric) enough = enough && v.size() >= 3;
    if (enough) testable[method] = per_metric;
  }
  result.ranking = rank_methods(testable, config.alpha);
  for (const auto& [method, per_metric] : result.samples) result.ranking.total_points.try_emplace(method, 0);
  return result;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::string metrics_csv(const BenchResult& result) {
  std::ostringstream out;
  out << "scenario,method,seed";
  for (const auto& n : metric_names()) out << "," << n;
  out << ",status\n" << std::setprecision(17);
  for (const auto& row : result.rows) {
    out << csv_field(row.scenario) << "," << row.method << "," << row.seed;
    for (const auto& n : metric_names()) {
      out << ",";
      if (row.metrics) out << metric_value(*row.metrics, n);
    }
    out << "," << csv_field(row.status) << "\n";
  }
  return out.str();
}

std::string report_csv(const BenchResult& result) {
  std::ostringstream out;
  out << "scenario,method,seed,fit_seconds,transport_seconds,accuracy_max,accuracy_mean,det_positive_percent,"
         "warning\n";
  out << std::setprecision(9);
  for (const auto& row : result.rows) {
    out << csv_field(row.scenario) << "," << row.method << "," << row.seed << ",";
    if (row.status == "ok") {
      out << row.run.fit_seconds << "," << row.run.transport_seconds << "," << row.run.accuracy.max << ","
          << row.run.accuracy.mean << ",";
      if (row.run.det_positive_fraction) out << 100.0 * *row.run.det_positive_fraction;
      out << "," << csv_field(row.run.warning) << "\n";
    } else {
      out << ",,,,," << csv_field(row.status) << "\n";
    }
  }
  return out.str();
}

std::string ranking_json(const BenchResult& result) {
  io::json j;
  j["total_points"] = result.ranking.total_points;
  io::json per = io::json::object();
  for (const auto& [metric, mr] : result.ranking.per_metric) per[metric] = {{"points", mr.points}, {"rank", mr.rank}};
  j["per_metric"] = per;
  io::json counts = io::json::object();
  for (const auto& [method, per_metric] : result.samples) {
    std::size_t n = 0;
    for (const auto& [metric, v] : per_metric) n = std::max(n, v.size());
    counts[method] = n;
  }
  j["samples"] = counts;
  return j.dump(2) + "\n";
}

std::string scenario_svg(const BenchResult& result, std::size_t index) {
  static const std::map<std::string, std::string> colors{
      {"gpt", "#e67e22"}, {"le", "#2980b9"}, {"reshaped_kmp", "#8e44ad"}, {"lwt", "#27ae60"}};
  const auto& sc = result.scenarios.at(index);
  SvgPlot plot(sc.name);
  for (const auto& row : result.rows) {
    if (row.scenario != sc.name || row.method != "gpt" || row.status != "ok") continue;
    std::vector<double> hw;
    for (double s : row.run.position_std) hw.push_back(2.0 * s);
    plot.add_band(row.run.rollout.positions(), hw, colors.at("gpt"), "gpt +/- 2 sd");
  }
  plot.add_polyline(sc.demonstration.positions(), "#7f8c8d", "demonstration", 1.2, true);
  plot.add_polyline(sc.reference.positions(), "#000000", "reference", 1.5, true);
  for (const auto& row : result.rows) {
    if (row.scenario != sc.name || row.status != "ok") continue;
    const auto it = colors.find(row.method);
    plot.add_polyline(row.run.rollout.positions(), it != colors.end() ? it->second : "#555555", row.method, 1.8);
  }
  plot.add_markers(sc.keypoints.source().points(), "#3498db", "source keypoints", 2.5);
  plot.add_markers(sc.keypoints.target().points(), "#c0392b", "target keypoints", 2.5);
  return plot.render();
}

void write_bench_outputs(const BenchResult& result, const std::filesystem::path& out_dir, bool svg) {
  io::write_text(out_dir / "metrics.csv", metrics_csv(result));
  io::write_text(out_dir / "report.csv", report_csv(result));
  io::write_text(out_dir / "ranking.json", ranking_json(result));
  if (svg) {
    for (std::size_t i = 0; i < result.scenarios.size(); ++i) {
      io::write_text(out_dir / "svg" / (result.scenarios[i].name + ".svg"), scenario_svg(result, i));
    }
  }
}

}  // namespace poltrans
