#pragma once

// Alternative transporters used for comparison: Laplacian trajectory editing,
// time-indexed displacement reshaping (Reshaped-KMP), and a locally weighted
// translation (LWT) diffeomorphism. The first two reshape one trajectory using
// via-points picked by a minimum-cost assignment; LWT deforms the whole space.

#include <cstddef>
#include <string>
#include <vector>

#include "poltrans/gp.hpp"
#include "poltrans/types.hpp"

namespace poltrans {

struct ViaPair {
  std::size_t trajectory_index = 0;
  std::size_t keypoint_index = 0;
};

struct ViaAssignment {
  std::vector<ViaPair> pairs;
  double total_cost = 0.0;
};

/// Minimum-cost one-to-one assignment of rows to columns (rows <= cols).
/// Returns the column chosen for every row.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

/// Binds every source keypoint to a distinct trajectory sample, minimizing
/// the total Euclidean distance. Throws if the trajectory is shorter than the
/// keypoint list.
ViaAssignment assign_via_points(const Trajectory& traj, const PairedKeypoints& kp);

/// New positions for the assigned samples: x[i] + (t_j - s_j).
std::vector<Vector> displaced_targets(const Trajectory& traj, const ViaAssignment& assignment,
                                      const PairedKeypoints& kp);

enum class Topology { chain, ring };

/// Combinatorial graph Laplacian (degree minus adjacency) of a chain or ring.
Matrix uniform_laplacian(std::size_t nodes, Topology topology);

/// Minimizes |L X' - L X|^2 over all Laplacian rows with every assigned
/// sample pinned to its target (pinned values are substituted into the
/// system). `targets` is aligned with assignment.pairs. An empty assignment
/// returns the input. Throws "singular Laplacian system" if the free samples
/// are not determined.
Trajectory laplacian_edit(const Trajectory& traj, const ViaAssignment& assignment,
                          const std::vector<Vector>& targets, Topology topology);

/// Adds a GP-interpolated displacement field over time: the assigned samples
/// move to their targets, the rest follow the time-smooth interpolation.
Trajectory reshaped_kmp(const Trajectory& traj, const ViaAssignment& assignment,
                        const std::vector<Vector>& targets, const GPConfig& time_gp);

/// x -> x + translation * exp(-|x - center|^2 / (2 radius^2)).
struct LWTUnit {
  Vector center;
  Vector translation;
  double radius = 1.0;
};

struct LWTConfig {
  int max_iters = 5000;
  /// Convergence tolerance as a fraction of the target diameter.
  double tolerance_ratio = 1e-3;
  /// Unit translation is capped at step_ratio * radius. Below exp(1/2) every
  /// unit is a diffeomorphism.
  double step_ratio = 0.5;
  /// Unit radius as a fraction of the distance to the nearest other keypoint.
  double radius_ratio = 0.5;
};

struct LWTMap {
  int dim = 2;
  std::vector<LWTUnit> units;
  bool converged = false;
  double max_residual = 0.0;
  std::string warning;
};

/// Greedy fit: repeatedly pushes the worst-matched keypoint toward its target
/// with one bounded unit. Expects the affine part already applied to the
/// source keypoints.
LWTMap fit_lwt(const PairedKeypoints& kp, const LWTConfig& config = {});
Vector apply_lwt(const LWTMap& map, const Vector& x);
Matrix lwt_jacobian(const LWTMap& map, const Vector& x);
Matrix lwt_unit_jacobian(const LWTUnit& unit, const Vector& x);

}  // namespace poltrans
