#pragma once

// JSON and CSV serialization. Vectors are JSON arrays, matrices are arrays of
// rows. Doubles are written with round-trip precision.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"

#include "poltrans/scenarios.hpp"
#include "poltrans/transport.hpp"
#include "poltrans/types.hpp"

namespace poltrans::io {

using json = nlohmann::json;

json to_json(const Vector& v);
json to_json(const Matrix& m);
Vector vector_from_json(const json& j);
Matrix matrix_from_json(const json& j);

/// {"dim": d, "points": [[...], ...]}
json to_json(const PointSet& ps);
PointSet point_set_from_json(const json& j);

/// {"source": PointSet, "target": PointSet}
json to_json(const PairedKeypoints& kp);
PairedKeypoints keypoints_from_json(const json& j);

/// {"dim", "positions", and optionally "velocities", "orientations",
/// "stiffness", "damping"}
json to_json(const PolicyLabels& labels);
PolicyLabels labels_from_json(const json& j);

/// {"dim", "positions", optional "times"}
json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const json& j);

json to_json(const KernelParams& p);
KernelParams kernel_params_from_json(const json& j);

/// {"inputs", "outputs", "params"}; the factorization is redone on load.
json to_json(const GPModel& gp);
GPModel gp_from_json(const json& j);

json to_json(const AffineMap& map);
AffineMap affine_from_json(const json& j);

/// {"kind": "gpt", "dim", "affine", "residual", "keypoints"}
json to_json(const TransportMap& map);
TransportMap transport_map_from_json(const json& j);

json to_json(const SurfaceScenario& sc);
SurfaceScenario surface_scenario_from_json(const json& j);
json to_json(const FrameScenario& sc);
FrameScenario frame_scenario_from_json(const json& j);

/// Labels derived from a trajectory: its positions plus finite-difference
/// velocities when it carries timestamps.
PolicyLabels labels_from_trajectory(const Trajectory& traj);

json read_json(const std::filesystem::path& path);
/// Pretty-printed, trailing newline. Creates parent directories.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// One point per row, comma separated. Blank lines and lines starting with
/// '#' are skipped; a first row that does not parse as numbers is treated as
/// a header.
PointSet read_point_set_csv(std::istream& in);
PointSet read_point_set_csv(const std::filesystem::path& path);

/// One row per label: position, its variance, then each transported quantity
/// present (matrices flattened row-major), det(J) and the near-singular flag.
void write_transported_labels_csv(std::ostream& out, const TransportedLabels& labels);

}  // namespace poltrans::io
