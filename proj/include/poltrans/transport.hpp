#pragma once

// Policy transportation: phi(x) = gamma(x) + psi(gamma(x)), where gamma is the
// rigid alignment of source to target keypoints and psi is a GP fitted on the
// residual mismatch that gamma leaves behind. Positions go through phi,
// velocities through the Jacobian J, orientations / stiffness / damping
// through the rotation factor of J's polar decomposition.

#include <optional>
#include <string>
#include <vector>

#include "poltrans/affine.hpp"
#include "poltrans/gp.hpp"
#include "poltrans/types.hpp"

namespace poltrans {

struct TransportConfig {
  GPConfig gp = [] {
    GPConfig c;
    c.max_noise_ratio = 1e-6;
    return c;
  }();
  /// Replace gp.init with default_kernel_params() computed on the residuals.
  bool data_driven_init = true;
  /// Keypoint-match tolerance as a fraction of the target diameter.
  double match_tolerance_ratio = 1e-3;
};

class TransportMap {
 public:
  TransportMap() = default;
  /// Throws std::invalid_argument if the residual GP was not trained on
  /// gamma(source) -> target - gamma(source).
  TransportMap(AffineMap affine, GPModel residual, PairedKeypoints keypoints);

  const AffineMap& affine() const { return affine_; }
  const GPModel& residual() const { return residual_; }
  const PairedKeypoints& keypoints() const { return keypoints_; }
  int dim() const { return affine_.dim(); }

 private:
  AffineMap affine_;
  GPModel residual_;
  PairedKeypoints keypoints_;
};

TransportMap fit_transport(const PairedKeypoints& kp, const TransportConfig& config = {});

struct PointTransport {
  Vector mean;
  /// GP posterior variance at gamma(x), shared by every output dimension.
  double variance = 0.0;
};

struct JacobianTransport {
  Matrix jacobian;
  /// Var[J_ab] for every entry, from the derivative GP pushed through A.
  Matrix entry_variance;
};

PointTransport transport_point(const TransportMap& map, const Vector& x);
JacobianTransport transport_jacobian(const TransportMap& map, const Vector& x);

struct KeypointMismatch {
  double max = 0.0;
  double mean = 0.0;
};
/// Distances |phi(s_i) - t_i| summarized over all keypoints.
KeypointMismatch keypoint_mismatch(const TransportMap& map);

/// Singular values below this fraction of the largest flag J as near-singular.
inline constexpr double kNearSingularRatio = 1e-9;

struct PolarRotation {
  RotationMatrix rotation;
  bool near_singular = false;
};

/// Rotation factor of the polar decomposition J = R P, forced into SO(d):
/// R = U diag(1, ..., det(U V^T)) V^T from the SVD J = U S V^T.
PolarRotation nearest_rotation(const Matrix& j);

struct TransportedLabels {
  std::vector<Vector> positions;
  std::vector<double> position_variance;
  std::optional<std::vector<Vector>> velocities;
  std::optional<std::vector<Vector>> velocity_variance;
  std::optional<std::vector<RotationMatrix>> orientations;
  std::optional<std::vector<Matrix>> stiffness;
  std::optional<std::vector<Matrix>> damping;
  std::vector<Matrix> jacobians;
  std::vector<double> jacobian_determinants;
  std::vector<RotationMatrix> projected_rotations;
  /// Per label; set when J is near-singular and its rotation factor is not unique.
  std::vector<bool> near_singular;
  std::vector<std::string> warnings;

  std::size_t size() const { return positions.size(); }
};

/// Throws std::invalid_argument if the labels fail validation or their
/// dimension differs from the map's.
TransportedLabels transport_labels(const TransportMap& map, const PolicyLabels& labels);

/// Per-dimension variance of J(x) xdot, treating the Jacobian entries as
/// independent: var_a = sum_b Var[J_ab] * xdot_b^2.
std::vector<Vector> velocity_transport_variance(const TransportMap& map, const std::vector<Vector>& positions,
                                                const std::vector<Vector>& velocities);

/// Total variance of transported velocities: the epistemic policy variance
/// plus the transportation variance. Throws on negative or mismatched input.
std::vector<Vector> transport_uncertainty(const TransportMap& map, const PolicyLabels& labels,
                                          const std::vector<Vector>& policy_variance);

struct DiffeomorphismReport {
  std::vector<double> determinants;
  double positive_fraction = 0.0;
  std::vector<double> keypoint_determinants;
  /// All keypoint determinants share one strict sign. Necessary for the map to
  /// be a change of coordinates; never sufficient on its own.
  bool keypoint_signs_uniform = false;
};

DiffeomorphismReport check_local_diffeomorphism(const TransportMap& map, const std::vector<Vector>& points);

}  // namespace poltrans
