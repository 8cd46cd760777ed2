#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "poltrans/types.hpp"

namespace poltrans {

struct MetricReport {
  double frechet = 0.0;
  double area_between = 0.0;
  double dtw = 0.0;
  double final_position_error = 0.0;
  /// Radians, in [0, pi].
  double final_angle_error = 0.0;
};

/// Names used for the five metrics in CSV/JSON output, in report order.
const std::vector<std::string>& metric_names();
double metric_value(const MetricReport& report, const std::string& name);

/// Discrete Frechet distance between the two sampled polylines.
double frechet_distance(const Trajectory& a, const Trajectory& b);

/// Cumulative Euclidean alignment cost, steps (1,0), (0,1), (1,1).
double dtw_distance(const Trajectory& a, const Trajectory& b);

/// `count` points spaced uniformly by arc length, endpoints included.
std::vector<Vector> resample_by_arc_length(const std::vector<Vector>& points, std::size_t count);

/// Both curves are resampled to max(Ma, Mb) points by arc length; the area is
/// the sum over consecutive matched pairs of quadrilaterals
/// (a_k, a_k+1, b_k+1, b_k), each split into two triangles along either
/// diagonal; the smaller split is used.
double area_between_curves(const Trajectory& a, const Trajectory& b);

double final_position_error(const Trajectory& a, const Trajectory& b);

/// Number of trailing segments averaged into the docking direction.
inline constexpr std::size_t kDockingWindow = 5;

/// Angle between the mean directions of the last kDockingWindow segments (or
/// all segments if there are fewer). Throws "stationary tail" if either mean
/// direction is zero.
double final_angle_error(const Trajectory& a, const Trajectory& b);

MetricReport compare_trajectories(const Trajectory& rollout, const Trajectory& reference);

struct MannWhitneyResult {
  /// U statistic of the first sample (mid-ranks for ties).
  double u = 0.0;
  /// One-sided p-value for "x is stochastically lower than y".
  double p_value = 1.0;
  bool x_lower = false;
  bool exact = true;
};

/// Largest per-sample size handled by the exact permutation distribution;
/// beyond it a tie-corrected normal approximation with continuity correction
/// is used.
inline constexpr std::size_t kExactMannWhitneyMax = 20;

MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y, double alpha = 0.05);

struct MetricRanking {
  std::map<std::string, int> points;
  /// 1 is best; methods with equal points share a position.
  std::map<std::string, int> rank;
};

struct RankingResult {
  std::map<std::string, MetricRanking> per_metric;
  std::map<std::string, int> total_points;
};

/// method -> metric -> samples (lower is better).
using MethodSamples = std::map<std::string, std::map<std::string, std::vector<double>>>;

/// Every ordered pair of methods is tested per metric; a method whose samples
/// are significantly lower earns one point.
RankingResult rank_methods(const MethodSamples& results, double alpha = 0.05);

}  // namespace poltrans
