// poltrans: fit transportation maps, transport labels, run the benchmark
// suites, score trajectories and rank methods.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"
#include "poltrans/bench.hpp"
#include "poltrans/io.hpp"

namespace fs = std::filesystem;
using namespace poltrans;
using io::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> methods;
  std::string suite;
  std::string keypoints;
  std::string source_csv;
  std::string target_csv;
  std::string trajectory;
  std::string map;
  std::string labels;
  std::string rollout;
  std::string reference;
  std::string input;
  std::string profile;
  std::size_t n_keypoints = 20;
  std::size_t seed_count = 0;
  bool no_svg = false;
};

json load_config(const Options& o) {
  if (o.config.empty()) return json::object();
  if (!fs::exists(o.config)) throw UsageError("config file not found: " + o.config);
  json j = io::read_json(o.config);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  return j;
}

/// Relative paths in a config file resolve against the config's directory.
std::string config_path(const Options& o, const json& cfg, const char* key) {
  if (!cfg.contains(key)) return {};
  fs::path p = cfg[key].get<std::string>();
  if (p.is_relative() && !o.config.empty()) p = fs::path(o.config).parent_path() / p;
  return p.string();
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError("missing " + what);
  if (!fs::exists(path)) throw UsageError(what + " not found: " + path);
}

Method resolve_method(const std::string& id) {
  if (const auto m = parse_method(id)) return *m;
  std::string valid;
  for (const auto& v : method_ids()) valid += (valid.empty() ? "" : ", ") + v;
  throw UsageError("unknown method '" + id + "' (valid: " + valid + ")");
}

std::vector<Method> resolve_methods(const Options& o, const json& cfg) {
  std::vector<std::string> ids = o.methods;
  if (ids.empty() && cfg.contains("methods")) ids = cfg["methods"].get<std::vector<std::string>>();
  if (ids.empty() && cfg.contains("method")) ids.push_back(cfg["method"].get<std::string>());
  std::vector<Method> out;
  for (const auto& id : ids) {
    // Accept comma-separated lists as well as repeated flags.
    std::stringstream ss(id);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(resolve_method(part));
    }
  }
  return out;
}

void apply_gp_overrides(GPConfig& gp, const json& cfg, std::optional<std::uint64_t> seed) {
  if (cfg.contains("gp")) {
    const auto& g = cfg["gp"];
    if (g.contains("signal_variance")) gp.init.signal_variance = g["signal_variance"].get<double>();
    if (g.contains("lengthscale")) gp.init.lengthscale = g["lengthscale"].get<double>();
    if (g.contains("noise_variance")) gp.init.noise_variance = g["noise_variance"].get<double>();
    if (g.contains("optimize")) gp.optimize = g["optimize"].get<bool>();
    if (g.contains("restarts")) gp.restarts = g["restarts"].get<int>();
    if (g.contains("max_noise_ratio")) gp.max_noise_ratio = g["max_noise_ratio"].get<double>();
    if (g.contains("seed")) gp.seed = g["seed"].get<std::uint64_t>();
  }
  if (seed) gp.seed = *seed;
}

TransportConfig transport_config(const json& cfg, std::optional<std::uint64_t> seed) {
  TransportConfig tc;
  apply_gp_overrides(tc.gp, cfg, seed);
  // Explicit kernel values in the config are used as given.
  if (cfg.contains("gp") && (cfg["gp"].contains("lengthscale") || cfg["gp"].contains("signal_variance"))) {
    tc.data_driven_init = false;
  }
  return tc;
}

PairedKeypoints load_keypoints(const Options& o, const json& cfg) {
  std::string src = o.source_csv;
  std::string tgt = o.target_csv;
  if (!src.empty() || !tgt.empty()) {
    require_file(src, "source CSV");
    require_file(tgt, "target CSV");
    return PairedKeypoints(io::read_point_set_csv(fs::path(src)), io::read_point_set_csv(fs::path(tgt)));
  }
  std::string path = o.keypoints;
  if (path.empty()) path = config_path(o, cfg, "keypoints");
  if (path.empty()) path = config_path(o, cfg, "scenario");
  require_file(path, "keypoints file (--keypoints or config \"keypoints\"/\"scenario\")");
  const json j = io::read_json(path);
  return io::keypoints_from_json(j.contains("keypoints") ? j["keypoints"] : j);
}

Trajectory load_trajectory_file(const std::string& path) {
  const json j = io::read_json(path);
  return io::trajectory_from_json(j.contains("demonstration") ? j["demonstration"] : j);
}

fs::path out_dir(const Options& o, const json& cfg) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (cfg.contains("out_dir")) return cfg["out_dir"].get<std::string>();
  return ".";
}

int cmd_fit(const Options& o) {
  const json cfg = load_config(o);
  auto methods = resolve_methods(o, cfg);
  const Method method = methods.empty() ? Method::gpt : methods.front();
  const int repetitions = cfg.value("repetitions", 1);
  if (repetitions < 1) throw UsageError("repetitions must be >= 1");
  const PairedKeypoints kp = load_keypoints(o, cfg);
  const fs::path dir = out_dir(o, cfg);

  json report{{"method", to_string(method)}, {"keypoints", kp.size()}, {"dim", kp.dim()}};
  if (method == Method::gpt) {
    const TransportConfig tc = transport_config(cfg, o.seed);
    TransportMap map;
    double total = 0.0;
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      map = fit_transport(kp, tc);
      total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    const auto mm = keypoint_mismatch(map);
    const double diam = kp.target().diameter();
    report["fit_seconds"] = total / repetitions;
    report["keypoint_mismatch_max"] = mm.max;
    report["keypoint_mismatch_mean"] = mm.mean;
    report["match_tolerance"] = tc.match_tolerance_ratio * (diam > 0.0 ? diam : 1.0);
    report["kernel"] = io::to_json(map.residual().params());
    io::write_json(dir / "map.json", io::to_json(map));
  } else {
    std::string traj_path = o.trajectory.empty() ? config_path(o, cfg, "demonstration") : o.trajectory;
    if (traj_path.empty()) traj_path = o.keypoints.empty() ? config_path(o, cfg, "scenario") : o.keypoints;
    require_file(traj_path, "demonstration trajectory (--trajectory) for method " + to_string(method));
    const Trajectory demo = load_trajectory_file(traj_path);
    MethodOptions mo;
    mo.transport = transport_config(cfg, o.seed);
    apply_gp_overrides(mo.time_gp, cfg, o.seed);
    if (cfg.value("topology", std::string("chain")) == "ring") mo.le_topology = Topology::ring;
    MethodRun run;
    double total = 0.0;
    for (int r = 0; r < repetitions; ++r) {
      run = run_method(method, kp, demo, mo);
      total += run.fit_seconds;
    }
    report["fit_seconds"] = total / repetitions;
    report["keypoint_mismatch_max"] = run.accuracy.max;
    report["keypoint_mismatch_mean"] = run.accuracy.mean;
    if (!run.warning.empty()) report["warning"] = run.warning;
    io::write_json(dir / "rollout.json", io::to_json(run.rollout));
  }
  io::write_json(dir / "fit_report.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

double max_spectrum_gap(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vector ea = Eigen::SelfAdjointEigenSolver<Matrix>(a[i]).eigenvalues();
    const Vector eb = Eigen::SelfAdjointEigenSolver<Matrix>(b[i]).eigenvalues();
    gap = std::max(gap, (ea - eb).cwiseAbs().maxCoeff());
  }
  return gap;
}

int cmd_transport(const Options& o) {
  const json cfg = load_config(o);
  const std::string map_path = o.map.empty() ? config_path(o, cfg, "map") : o.map;
  const std::string labels_path = o.labels.empty() ? config_path(o, cfg, "labels") : o.labels;
  require_file(map_path, "map file (--map)");
  require_file(labels_path, "labels file (--labels)");
  const TransportMap map = io::transport_map_from_json(io::read_json(map_path));
  const json lj = io::read_json(labels_path);
  PolicyLabels labels;
  if (lj.contains("demonstration")) {
    labels = io::labels_from_trajectory(io::trajectory_from_json(lj["demonstration"]));
  } else if (lj.contains("velocities") || lj.contains("orientations") || lj.contains("stiffness") ||
             lj.contains("damping") || !lj.contains("times")) {
    labels = io::labels_from_json(lj);
  } else {
    labels = io::labels_from_trajectory(io::trajectory_from_json(lj));
  }
  if (labels.dim != map.dim()) {
    throw std::runtime_error("labels are " + std::to_string(labels.dim) + "D but the map is " +
                             std::to_string(map.dim()) + "D");
  }
  const TransportedLabels out = transport_labels(map, labels);
  const auto diffeo = check_local_diffeomorphism(map, labels.positions);
  const fs::path dir = out_dir(o, cfg);
  std::ostringstream csv;
  io::write_transported_labels_csv(csv, out);
  io::write_text(dir / "transported.csv", csv.str());

  json report{{"labels", out.size()},
              {"det_positive_fraction", diffeo.positive_fraction},
              {"keypoint_signs_uniform", diffeo.keypoint_signs_uniform},
              {"near_singular", std::count(out.near_singular.begin(), out.near_singular.end(), true)},
              {"warnings", out.warnings}};
  if (labels.stiffness) report["stiffness_spectrum_max_gap"] = max_spectrum_gap(*labels.stiffness, *out.stiffness);
  if (labels.damping) report["damping_spectrum_max_gap"] = max_spectrum_gap(*labels.damping, *out.damping);
  if (labels.stiffness || labels.damping) {
    const double gap = std::max(report.value("stiffness_spectrum_max_gap", 0.0),
                                report.value("damping_spectrum_max_gap", 0.0));
    report["spectra_preserved"] = gap <= 1e-9 * (1.0 + [&] {
      double s = 0.0;
      for (const auto* fam : {&labels.stiffness, &labels.damping}) {
        if (*fam) {
          for (const auto& m : **fam) s = std::max(s, m.cwiseAbs().maxCoeff());
        }
      }
      return s;
    }());
  }
  io::write_json(dir / "transport_report.json", report);
  if (diffeo.positive_fraction < 1.0) {
    std::cerr << "warning: det(J) <= 0 at " << (1.0 - diffeo.positive_fraction) * 100.0
              << "% of the labels; the map folds space there\n";
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_bench(const Options& o) {
  const json cfg = load_config(o);
  BenchConfig bc;
  bc.suite = !o.suite.empty() ? o.suite : cfg.value("suite", std::string("surfaces"));
  if (bc.suite != "surfaces" && bc.suite != "frames") {
    throw UsageError("unknown suite '" + bc.suite + "' (valid: surfaces, frames)");
  }
  const auto methods = resolve_methods(o, cfg);
  if (!methods.empty()) bc.methods = methods;
  if (cfg.contains("seeds")) bc.seeds = cfg["seeds"].get<std::vector<std::uint64_t>>();
  if (o.seed_count > 0) {
    bc.seeds.clear();
    const std::uint64_t first = o.seed.value_or(0);
    for (std::uint64_t i = 0; i < o.seed_count; ++i) bc.seeds.push_back(first + i);
  } else if (o.seed) {
    bc.seeds = {*o.seed};
  }
  bc.surface_keypoints = cfg.value("surface_keypoints", bc.surface_keypoints);
  bc.frame_keypoints = cfg.value("frame_keypoints", bc.frame_keypoints);
  bc.le_frame_keypoints = cfg.value("le_frame_keypoints", bc.le_frame_keypoints);
  bc.training_configurations = cfg.value("training_configurations", bc.training_configurations);
  bc.alpha = cfg.value("alpha", bc.alpha);
  bc.threads = cfg.value("threads", bc.threads);
  apply_gp_overrides(bc.options.transport.gp, cfg, std::nullopt);
  if (cfg.value("repetitions", 1) < 1) throw UsageError("repetitions must be >= 1");

  const BenchResult result = run_bench(bc);
  const fs::path dir = out_dir(o, cfg);
  write_bench_outputs(result, dir, !o.no_svg);
  std::size_t failed = 0;
  for (const auto& row : result.rows) {
    if (row.status != "ok") {
      ++failed;
      std::cerr << "warning: " << row.method << " on " << row.scenario << ": " << row.status << "\n";
    }
  }
  std::cout << "bench " << bc.suite << ": " << result.scenarios.size() << " scenarios, " << result.rows.size()
            << " runs, " << failed << " failed; outputs in " << dir.string() << "\n";
  std::cout << ranking_json(result);
  return 0;
}

int cmd_metrics(const Options& o) {
  const json cfg = load_config(o);
  const std::string a = o.rollout.empty() ? config_path(o, cfg, "rollout") : o.rollout;
  const std::string b = o.reference.empty() ? config_path(o, cfg, "reference") : o.reference;
  require_file(a, "rollout trajectory (--rollout)");
  require_file(b, "reference trajectory (--reference)");
  const MetricReport r = compare_trajectories(load_trajectory_file(a), load_trajectory_file(b));
  json j = json::object();
  for (const auto& n : metric_names()) j[n] = metric_value(r, n);
  if (!o.out_dir.empty() || cfg.contains("out_dir")) io::write_json(out_dir(o, cfg) / "metrics.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int cmd_rank(const Options& o) {
  const json cfg = load_config(o);
  const std::string path = o.input.empty() ? config_path(o, cfg, "input") : o.input;
  require_file(path, "metrics CSV (--input)");
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics CSV");
  const auto header = split_csv_line(line);
  const auto col = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const auto method_col = col("method");
  if (method_col < 0) throw std::runtime_error("metrics CSV has no 'method' column");
  MethodSamples samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const auto& method = cells.at(static_cast<std::size_t>(method_col));
    auto& per = samples[method];
    for (const auto& n : metric_names()) {
      const auto c = col(n);
      if (c < 0 || static_cast<std::size_t>(c) >= cells.size() || cells[static_cast<std::size_t>(c)].empty()) continue;
      per[n].push_back(std::stod(cells[static_cast<std::size_t>(c)]));
    }
  }
  BenchResult br;
  br.samples = samples;
  br.ranking = rank_methods(samples, cfg.value("alpha", 0.05));
  const std::string text = ranking_json(br);
  if (!o.out_dir.empty() || cfg.contains("out_dir")) io::write_text(out_dir(o, cfg) / "ranking.json", text);
  std::cout << text;
  return 0;
}

int cmd_scenario_gen(const Options& o) {
  const json cfg = load_config(o);
  const std::string suite = !o.suite.empty() ? o.suite : cfg.value("suite", std::string("surfaces"));
  const std::uint64_t seed = o.seed.value_or(cfg.value("seed", std::uint64_t{0}));
  const fs::path dir = out_dir(o, cfg) / "scenarios";
  fs::path written;
  if (suite == "surfaces") {
    const std::string id = !o.profile.empty() ? o.profile : cfg.value("profile", std::string("sine"));
    SurfaceProfile profile;
    try {
      profile = parse_surface_profile(id);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto sc = make_surface_scenario(profile, cfg.value("keypoints", o.n_keypoints), seed);
    written = dir / "surfaces" / (sc.name + ".json");
    io::write_json(written, io::to_json(sc));
  } else if (suite == "frames") {
    BenchConfig bc;
    bc.frame_keypoints = cfg.value("keypoints_per_frame", bc.frame_keypoints);
    const auto sc = frame_bench_scenario(seed, bc);
    written = dir / "frames" / ("frames_s" + std::to_string(seed) + ".json");
    io::write_json(written, io::to_json(sc));
  } else {
    throw UsageError("unknown suite '" + suite + "' (valid: surfaces, frames)");
  }
  std::cout << written.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoint-conditioned policy transportation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment config");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--out-dir", o.out_dir, "Output directory");
  };

  auto* fit = app.add_subcommand("fit", "Fit a transportation map (or run a baseline) from paired keypoints");
  common(fit);
  fit->add_option("--method", o.methods, "gpt | le | reshaped_kmp | lwt");
  fit->add_option("--keypoints", o.keypoints, "PairedKeypoints or scenario JSON");
  fit->add_option("--source", o.source_csv, "Source keypoints CSV");
  fit->add_option("--target", o.target_csv, "Target keypoints CSV");
  fit->add_option("--trajectory", o.trajectory, "Demonstration trajectory JSON (baselines)");

  auto* transport = app.add_subcommand("transport", "Transport policy labels through a fitted map");
  common(transport);
  transport->add_option("--map", o.map, "Map JSON written by fit");
  transport->add_option("--labels", o.labels, "PolicyLabels, trajectory or scenario JSON");

  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  common(bench);
  bench->add_option("--suite", o.suite, "surfaces | frames");
  bench->add_option("--method", o.methods, "Methods to compare (repeatable or comma separated)");
  bench->add_option("--seeds", o.seed_count, "Number of consecutive seeds starting at --seed");
  bench->add_flag("--no-svg", o.no_svg, "Skip SVG plots");

  auto* metrics = app.add_subcommand("metrics", "Compare a rollout with a reference trajectory");
  common(metrics);
  metrics->add_option("--rollout", o.rollout, "Trajectory JSON");
  metrics->add_option("--reference", o.reference, "Trajectory JSON");

  auto* rank = app.add_subcommand("rank", "Rank methods from a metrics CSV with pairwise U tests");
  common(rank);
  rank->add_option("--input", o.input, "metrics.csv from bench");

  auto* gen = app.add_subcommand("scenario-gen", "Write a scenario JSON");
  common(gen);
  gen->add_option("--suite", o.suite, "surfaces | frames");
  gen->add_option("--profile", o.profile, "flat | tilt | sine | step | composite");
  gen->add_option("--keypoints", o.n_keypoints, "Keypoint count for surface scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit) return cmd_fit(o);
    if (*transport) return cmd_transport(o);
    if (*bench) return cmd_bench(o);
    if (*metrics) return cmd_metrics(o);
    if (*rank) return cmd_rank(o);
    if (*gen) return cmd_scenario_gen(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
