#pragma once

// Synthetic 2D experiments: a periodic cleaning stroke over a flat baseline
// that has to be carried onto a curved surface, and a reaching motion between
// two frames that are moved to new poses.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poltrans/types.hpp"

namespace poltrans {

enum class SurfaceProfile { flat, tilt, sine, step, composite };

std::string to_string(SurfaceProfile p);
/// Throws std::invalid_argument for unknown ids.
SurfaceProfile parse_surface_profile(const std::string& id);

struct ProfileParams {
  /// Rotation of the surface about the baseline start (radians).
  double tilt = 0.0;
  double amplitude = 0.0;
  /// Sine cycles over the baseline length.
  double frequency = 1.0;
  /// Height of the smooth step or of the composite bump.
  double height = 0.0;
  /// Transition width of the step / bump.
  double width = 0.05;
};

/// Baseline length in meters; the baseline runs from (0, 0) to (L, 0).
inline constexpr double kBaselineLength = 1.0;
inline constexpr std::size_t kDemonstrationSamples = 200;

struct SurfaceScenario {
  std::string name;
  SurfaceProfile profile = SurfaceProfile::flat;
  ProfileParams params;
  PairedKeypoints keypoints;
  Trajectory demonstration;
  std::uint64_t seed = 0;
};

/// Point on the target surface above baseline abscissa `x`.
Vector surface_point(SurfaceProfile profile, const ProfileParams& params, double x);
/// Unit normal of the target surface at abscissa `x` (pointing away from the
/// baseline's lower side).
Vector surface_normal(SurfaceProfile profile, const ProfileParams& params, double x);

/// Parameters drawn from `seed` for the given profile.
ProfileParams random_profile_params(SurfaceProfile profile, std::uint64_t seed);

/// Source keypoints: n evenly spaced samples of the baseline. Targets: the
/// same abscissae on the profile. Parameters come from `params` or, when
/// absent, from `seed`. Throws for n < 2.
SurfaceScenario make_surface_scenario(SurfaceProfile profile, std::size_t n_keypoints, std::uint64_t seed,
                                      std::optional<ProfileParams> params = std::nullopt);

/// Approach-clean-retreat loop over the baseline, kDemonstrationSamples long.
Trajectory surface_demonstration();

/// Demonstration carried onto the surface by following its normal offset:
/// (x, y) -> surface_point(x) + y * surface_normal(x).
Trajectory surface_reference(const SurfaceScenario& scenario);

struct FramePose {
  Vector position = Vector::Zero(2);
  double heading = 0.0;
};

struct FramePair {
  FramePose start;
  FramePose goal;
};

/// Canonical start / goal frames used when no demonstration pair is given.
FramePair canonical_frames();

/// Local offsets of the points tracked on each frame. The frame origin is not
/// among them.
std::vector<Vector> frame_keypoint_offsets(std::size_t count);

/// Reaching curve: a cubic Hermite arc leaving the start frame along its
/// heading, then a straight docking segment into the goal origin along the
/// goal heading.
Trajectory frame_demonstration(const FramePair& frames);

struct FrameScenario {
  FramePair source;
  FramePair target;
  std::size_t keypoints_per_frame = 5;
  PairedKeypoints keypoints;
  /// Recorded in the source configuration.
  Trajectory demonstration;
  /// What the same skill looks like in the target configuration.
  Trajectory reference;
  std::uint64_t seed = 0;
};

/// Keypoints are the frame offsets (start frame first, then goal frame)
/// placed at the source poses and at the new poses. Throws if the new frames
/// coincide.
FrameScenario make_frame_scenario(const FramePose& start, const FramePose& goal, std::size_t keypoints_per_frame,
                                  std::uint64_t seed, const FramePair& source = canonical_frames());

/// Canonical frames with a seeded random perturbation; `spread` scales it.
FramePair random_frame_pair(std::uint64_t seed, double spread = 1.0);

/// Subset of a frame scenario's keypoints: the first `per_frame` points of
/// each frame.
PairedKeypoints frame_keypoint_subset(const FrameScenario& scenario, std::size_t per_frame);

struct GridSpec {
  std::size_t nx = 20;
  std::size_t ny = 20;
};

/// Resamples a 3D cloud onto an nx x ny grid spanned bilinearly by four xy
/// corners (order: (0,0), (1,0), (1,1), (0,1) in grid coordinates). z is the
/// mean z of cloud points within half a cell of each node; empty nodes are
/// filled from filled neighbours; finally z is smoothed with a
/// (2w+1) x (2w+1) moving average. Output is row-major (x index fastest).
PointSet gridify_pointcloud(const PointSet& cloud, const GridSpec& grid, const std::array<Vector, 4>& corners,
                            std::size_t smoothing_half_window);

}  // namespace poltrans
