#include "poltrans/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace poltrans::io {

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array for a vector");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array of rows for a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument("ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

namespace {

json vectors_to_json(const std::vector<Vector>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(to_json(v));
  return out;
}

std::vector<Vector> vectors_from_json(const json& j) {
  std::vector<Vector> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(vector_from_json(e));
  return out;
}

json matrices_to_json(const std::vector<Matrix>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(to_json(m));
  return out;
}

std::vector<Matrix> matrices_from_json(const json& j) {
  std::vector<Matrix> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(matrix_from_json(e));
  return out;
}

json pose_to_json(const FramePose& p) { return {{"position", to_json(p.position)}, {"heading", p.heading}}; }

FramePose pose_from_json(const json& j) { return {vector_from_json(j.at("position")), j.at("heading").get<double>()}; }

json frames_to_json(const FramePair& f) { return {{"start", pose_to_json(f.start)}, {"goal", pose_to_json(f.goal)}}; }

FramePair frames_from_json(const json& j) { return {pose_from_json(j.at("start")), pose_from_json(j.at("goal"))}; }

}  // namespace

json to_json(const PointSet& ps) { return {{"dim", ps.dim()}, {"points", vectors_to_json(ps.points())}}; }

PointSet point_set_from_json(const json& j) {
  return PointSet(j.at("dim").get<int>(), vectors_from_json(j.at("points")));
}

json to_json(const PairedKeypoints& kp) { return {{"source", to_json(kp.source())}, {"target", to_json(kp.target())}}; }

PairedKeypoints keypoints_from_json(const json& j) {
  return PairedKeypoints(point_set_from_json(j.at("source")), point_set_from_json(j.at("target")));
}

json to_json(const PolicyLabels& labels) {
  json out{{"dim", labels.dim}, {"positions", vectors_to_json(labels.positions)}};
  if (labels.velocities) out["velocities"] = vectors_to_json(*labels.velocities);
  if (labels.orientations) out["orientations"] = matrices_to_json(*labels.orientations);
  if (labels.stiffness) out["stiffness"] = matrices_to_json(*labels.stiffness);
  if (labels.damping) out["damping"] = matrices_to_json(*labels.damping);
  return out;
}

PolicyLabels labels_from_json(const json& j) {
  PolicyLabels l;
  l.dim = j.at("dim").get<int>();
  l.positions = vectors_from_json(j.at("positions"));
  if (j.contains("velocities")) l.velocities = vectors_from_json(j["velocities"]);
  if (j.contains("orientations")) l.orientations = matrices_from_json(j["orientations"]);
  if (j.contains("stiffness")) l.stiffness = matrices_from_json(j["stiffness"]);
  if (j.contains("damping")) l.damping = matrices_from_json(j["damping"]);
  return l;
}

json to_json(const Trajectory& traj) {
  json out{{"dim", traj.dim()}, {"positions", vectors_to_json(traj.positions())}};
  if (traj.has_times()) out["times"] = *traj.times();
  return out;
}

Trajectory trajectory_from_json(const json& j) {
  std::optional<std::vector<double>> times;
  if (j.contains("times")) times = j["times"].get<std::vector<double>>();
  return Trajectory(j.at("dim").get<int>(), vectors_from_json(j.at("positions")), std::move(times));
}

json to_json(const KernelParams& p) {
  return {{"signal_variance", p.signal_variance}, {"lengthscale", p.lengthscale}, {"noise_variance", p.noise_variance}};
}

KernelParams kernel_params_from_json(const json& j) {
  KernelParams p;
  p.signal_variance = j.at("signal_variance").get<double>();
  p.lengthscale = j.at("lengthscale").get<double>();
  p.noise_variance = j.at("noise_variance").get<double>();
  return p;
}

json to_json(const GPModel& gp) {
  return {{"inputs", to_json(gp.inputs())}, {"outputs", to_json(gp.outputs())}, {"params", to_json(gp.params())}};
}

GPModel gp_from_json(const json& j) {
  return GPModel(matrix_from_json(j.at("inputs")), matrix_from_json(j.at("outputs")),
                 kernel_params_from_json(j.at("params")));
}

json to_json(const AffineMap& map) {
  return {{"rotation", to_json(map.rotation.matrix())},
          {"source_centroid", to_json(map.source_centroid)},
          {"target_centroid", to_json(map.target_centroid)}};
}

AffineMap affine_from_json(const json& j) {
  AffineMap m;
  m.rotation = RotationMatrix(matrix_from_json(j.at("rotation")));
  m.source_centroid = vector_from_json(j.at("source_centroid"));
  m.target_centroid = vector_from_json(j.at("target_centroid"));
  return m;
}

json to_json(const TransportMap& map) {
  return {{"kind", "gpt"},
          {"dim", map.dim()},
          {"affine", to_json(map.affine())},
          {"residual", to_json(map.residual())},
          {"keypoints", to_json(map.keypoints())}};
}

TransportMap transport_map_from_json(const json& j) {
  if (j.value("kind", std::string("gpt")) != "gpt") throw std::invalid_argument("not a transport map file");
  return TransportMap(affine_from_json(j.at("affine")), gp_from_json(j.at("residual")),
                      keypoints_from_json(j.at("keypoints")));
}

json to_json(const SurfaceScenario& sc) {
  return {{"kind", "surface"},
          {"name", sc.name},
          {"profile", to_string(sc.profile)},
          {"params",
           {{"tilt", sc.params.tilt},
            {"amplitude", sc.params.amplitude},
            {"frequency", sc.params.frequency},
            {"height", sc.params.height},
            {"width", sc.params.width}}},
          {"seed", sc.seed},
          {"keypoints", to_json(sc.keypoints)},
          {"demonstration", to_json(sc.demonstration)}};
}

SurfaceScenario surface_scenario_from_json(const json& j) {
  SurfaceScenario sc;
  sc.name = j.value("name", std::string());
  sc.profile = parse_surface_profile(j.at("profile").get<std::string>());
  const auto& p = j.at("params");
  sc.params.tilt = p.value("tilt", 0.0);
  sc.params.amplitude = p.value("amplitude", 0.0);
  sc.params.frequency = p.value("frequency", 1.0);
  sc.params.height = p.value("height", 0.0);
  sc.params.width = p.value("width", 0.05);
  sc.seed = j.value("seed", std::uint64_t{0});
  sc.keypoints = keypoints_from_json(j.at("keypoints"));
  sc.demonstration = trajectory_from_json(j.at("demonstration"));
  return sc;
}

json to_json(const FrameScenario& sc) {
  return {{"kind", "frame"},
          {"source", frames_to_json(sc.source)},
          {"target", frames_to_json(sc.target)},
          {"keypoints_per_frame", sc.keypoints_per_frame},
          {"seed", sc.seed},
          {"keypoints", to_json(sc.keypoints)},
          {"demonstration", to_json(sc.demonstration)},
          {"reference", to_json(sc.reference)}};
}

FrameScenario frame_scenario_from_json(const json& j) {
  FrameScenario sc;
  sc.source = frames_from_json(j.at("source"));
  sc.target = frames_from_json(j.at("target"));
  sc.keypoints_per_frame = j.at("keypoints_per_frame").get<std::size_t>();
  sc.seed = j.value("seed", std::uint64_t{0});
  sc.keypoints = keypoints_from_json(j.at("keypoints"));
  sc.demonstration = trajectory_from_json(j.at("demonstration"));
  sc.reference = trajectory_from_json(j.at("reference"));
  return sc;
}

PolicyLabels labels_from_trajectory(const Trajectory& traj) {
  PolicyLabels l;
  l.dim = traj.dim();
  l.positions = traj.positions();
  if (traj.has_times() && traj.size() >= 2) l.velocities = finite_difference_velocities(traj);
  return l;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

PointSet read_point_set_csv(std::istream& in) {
  std::vector<Vector> pts;
  std::string line;
  bool first = true;
  int dim = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw std::invalid_argument("non-numeric CSV cell on line " + std::to_string(lineno));
    }
    first = false;
    if (dim == 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim) {
      throw std::invalid_argument("inconsistent column count on line " + std::to_string(lineno));
    }
    pts.push_back(Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  return PointSet(dim, std::move(pts));
}

PointSet read_point_set_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_point_set_csv(in);
}

void write_transported_labels_csv(std::ostream& out, const TransportedLabels& labels) {
  const auto n = labels.size();
  const auto d = n > 0 ? labels.positions[0].size() : 0;
  auto axis = [](Eigen::Index i) { return std::string(1, "xyz"[i]); };
  std::vector<std::string> header{"index"};
  for (Eigen::Index a = 0; a < d; ++a) header.push_back(axis(a));
  header.push_back("position_variance");
  if (labels.velocities) {
    for (Eigen::Index a = 0; a < d; ++a) header.push_back("v" + axis(a));
  }
  if (labels.velocity_variance) {
    for (Eigen::Index a = 0; a < d; ++a) header.push_back("v" + axis(a) + "_variance");
  }
  auto matrix_header = [&](const std::string& prefix) {
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) header.push_back(prefix + std::to_string(r) + std::to_string(c));
    }
  };
  if (labels.orientations) matrix_header("R");
  if (labels.stiffness) matrix_header("K");
  if (labels.damping) matrix_header("D");
  header.push_back("det_J");
  header.push_back("near_singular");

  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  out << std::setprecision(17);
  auto put_matrix = [&](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << "," << m(r, c);
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (Eigen::Index a = 0; a < d; ++a) out << "," << labels.positions[i](a);
    out << "," << labels.position_variance[i];
    if (labels.velocities) {
      for (Eigen::Index a = 0; a < d; ++a) out << "," << (*labels.velocities)[i](a);
    }
    if (labels.velocity_variance) {
      for (Eigen::Index a = 0; a < d; ++a) out << "," << (*labels.velocity_variance)[i](a);
    }
    if (labels.orientations) put_matrix((*labels.orientations)[i].matrix());
    if (labels.stiffness) put_matrix((*labels.stiffness)[i]);
    if (labels.damping) put_matrix((*labels.damping)[i]);
    out << "," << labels.jacobian_determinants[i] << "," << (labels.near_singular[i] ? 1 : 0) << "\n";
  }
}

}  // namespace poltrans::io
