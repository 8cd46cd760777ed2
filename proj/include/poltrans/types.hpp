#pragma once

// Shared domain types: keypoint sets, policy labels, trajectories and
// rotation matrices. All types are immutable once constructed, so they can be
// shared freely across threads.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace poltrans {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Default tolerance used when checking orthogonality, symmetry and PSD-ness
/// of matrix labels.
inline constexpr double kLabelTolerance = 1e-9;

/// Ordered set of N points in R^dim (dim is 2 or 3).
class PointSet {
 public:
  PointSet() = default;
  /// Throws std::invalid_argument on empty input, wrong point length,
  /// unsupported dimension or non-finite components.
  PointSet(int dim, std::vector<Vector> points);

  /// Builds from an N x dim matrix, one point per row.
  static PointSet from_rows(const Matrix& rows);

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  const Vector& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Vector>& points() const { return points_; }

  /// N x dim matrix, one point per row.
  Matrix rows() const;
  Vector centroid() const;
  /// Largest pairwise distance.
  double diameter() const;

 private:
  int dim_ = 0;
  std::vector<Vector> points_;
};

/// Source and target keypoints paired by index.
class PairedKeypoints {
 public:
  PairedKeypoints() = default;
  PairedKeypoints(PointSet source, PointSet target);

  const PointSet& source() const { return source_; }
  const PointSet& target() const { return target_; }
  int dim() const { return source_.dim(); }
  std::size_t size() const { return source_.size(); }

 private:
  PointSet source_;
  PointSet target_;
};

/// A proper rotation: R^T R = I and det(R) = +1 within tolerance.
class RotationMatrix {
 public:
  RotationMatrix() = default;
  explicit RotationMatrix(Matrix entries, double tolerance = kLabelTolerance);

  static RotationMatrix identity(int dim);
  /// 2D rotation by `angle` radians.
  static RotationMatrix planar(double angle);

  const Matrix& matrix() const { return entries_; }
  int dim() const { return static_cast<int>(entries_.rows()); }

 private:
  Matrix entries_;
};

/// Demonstration labels. Positions are mandatory; every other family is
/// optional but, when present, has the same length as positions.
struct PolicyLabels {
  int dim = 2;
  std::vector<Vector> positions;
  std::optional<std::vector<Vector>> velocities;
  std::optional<std::vector<Matrix>> orientations;
  std::optional<std::vector<Matrix>> stiffness;
  std::optional<std::vector<Matrix>> damping;

  std::size_t size() const { return positions.size(); }
};

/// Time-ordered positions. Timestamps are optional but strictly increasing
/// when present.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int dim, std::vector<Vector> positions,
             std::optional<std::vector<double>> times = std::nullopt);

  int dim() const { return dim_; }
  std::size_t size() const { return positions_.size(); }
  const std::vector<Vector>& positions() const { return positions_; }
  const Vector& operator[](std::size_t i) const { return positions_[i]; }
  const std::optional<std::vector<double>>& times() const { return times_; }
  bool has_times() const { return times_.has_value(); }

 private:
  int dim_ = 0;
  std::vector<Vector> positions_;
  std::optional<std::vector<double>> times_;
};

struct Violation {
  std::string field;
  std::size_t index = 0;
  double residual = 0.0;
  std::string message;
};

/// Checks every PolicyLabels invariant and reports each failure. An empty
/// result means the labels are valid.
std::vector<Violation> validate_labels(const PolicyLabels& labels,
                                       double tolerance = kLabelTolerance);

/// Central differences in the interior, one-sided differences at the ends.
/// Requires timestamps and at least two samples.
std::vector<Vector> finite_difference_velocities(const Trajectory& traj);

/// True when `m` is symmetric with eigenvalues >= -tolerance.
bool is_symmetric_psd(const Matrix& m, double tolerance = kLabelTolerance);

/// Residual max|R^T R - I| and |det R - 1|, whichever is larger.
double rotation_residual(const Matrix& r);

}  // namespace poltrans
