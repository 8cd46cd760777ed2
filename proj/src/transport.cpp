#include "poltrans/transport.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace poltrans {

namespace {

Matrix affine_image_rows(const AffineMap& affine, const PointSet& pts) {
  Matrix out(static_cast<Eigen::Index>(pts.size()), pts.dim());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = apply_affine(affine, pts[i]).transpose();
  }
  return out;
}

void check_point_dim(const TransportMap& map, const Vector& x) {
  if (x.size() != map.dim()) throw std::invalid_argument("point dimension does not match transport map");
}

}  // namespace

TransportMap::TransportMap(AffineMap affine, GPModel residual, PairedKeypoints keypoints)
    : affine_(std::move(affine)), residual_(std::move(residual)), keypoints_(std::move(keypoints)) {
  if (keypoints_.dim() != affine_.dim() || residual_.input_dim() != affine_.dim() ||
      residual_.output_dim() != affine_.dim()) {
    throw std::invalid_argument("transport map components differ in dimension");
  }
  if (residual_.size() != keypoints_.size()) {
    throw std::invalid_argument("residual model size differs from keypoint count");
  }
  const Matrix expected_in = affine_image_rows(affine_, keypoints_.source());
  const Matrix expected_out = keypoints_.target().rows() - expected_in;
  const double scale = 1.0 + expected_in.cwiseAbs().maxCoeff();
  if ((residual_.inputs() - expected_in).cwiseAbs().maxCoeff() > 1e-9 * scale ||
      (residual_.outputs() - expected_out).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument("residual model is not trained on the affine residuals of the keypoints");
  }
}

TransportMap fit_transport(const PairedKeypoints& kp, const TransportConfig& config) {
  AffineMap affine = fit_affine(kp);
  const Matrix inputs = affine_image_rows(affine, kp.source());
  const Matrix outputs = kp.target().rows() - inputs;

  GPConfig gp_config = config.gp;
  if (config.data_driven_init) {
    gp_config.init = default_kernel_params(inputs, outputs);
    gp_config.init.noise_variance = std::min(gp_config.init.noise_variance,
                                             gp_config.max_noise_ratio * gp_config.init.signal_variance);
  }
  // Keypoint matching is a hard requirement. The per-coordinate tolerance is
  // scaled so the Euclidean mismatch stays within the match tolerance.
  const double diam = kp.target().diameter();
  const double tol = config.match_tolerance_ratio * (diam > 0.0 ? diam : 1.0);
  GPModel gp = enforce_interpolation(fit_gp(inputs, outputs, gp_config), tol / std::sqrt(double(kp.dim())));
  return TransportMap(affine, std::move(gp), kp);
}

PointTransport transport_point(const TransportMap& map, const Vector& x) {
  check_point_dim(map, x);
  const Vector g = apply_affine(map.affine(), x);
  return {g + map.residual().predict_mean(g), map.residual().predict_variance(g)};
}

JacobianTransport transport_jacobian(const TransportMap& map, const Vector& x) {
  check_point_dim(map, x);
  const Matrix& a = map.affine().rotation.matrix();
  const Vector g = apply_affine(map.affine(), x);
  const DerivativePrediction dpsi = map.residual().predict_derivative(g);
  JacobianTransport out;
  out.jacobian = a + dpsi.jacobian * a;
  // Row a of J is A^T-pushed gradient of psi_a; its covariance is A^T S A.
  const Matrix pushed = a.transpose() * dpsi.covariance * a;
  const Vector col_var = pushed.diagonal().cwiseMax(0.0);
  out.entry_variance = Matrix(map.dim(), map.dim());
  for (int r = 0; r < map.dim(); ++r) out.entry_variance.row(r) = col_var.transpose();
  return out;
}

KeypointMismatch keypoint_mismatch(const TransportMap& map) {
  const auto& kp = map.keypoints();
  KeypointMismatch out;
  for (std::size_t i = 0; i < kp.size(); ++i) {
    const double e = (transport_point(map, kp.source()[i]).mean - kp.target()[i]).norm();
    out.max = std::max(out.max, e);
    out.mean += e;
  }
  out.mean /= static_cast<double>(kp.size());
  return out;
}

PolarRotation nearest_rotation(const Matrix& j) {
  const Eigen::Index d = j.rows();
  Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  Vector signs = Vector::Ones(d);
  signs(d - 1) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Matrix r = u * signs.asDiagonal() * v.transpose();
  const Vector& s = svd.singularValues();
  const bool near_singular = !(s(d - 1) >= kNearSingularRatio * s(0)) || s(0) == 0.0;
  return {RotationMatrix(std::move(r)), near_singular};
}

TransportedLabels transport_labels(const TransportMap& map, const PolicyLabels& labels) {
  if (labels.dim != map.dim()) throw std::invalid_argument("label dimension does not match transport map");
  const auto violations = validate_labels(labels);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "invalid labels: " << violations.front().field << "[" << violations.front().index
       << "] " << violations.front().message;
    throw std::invalid_argument(os.str());
  }

  const std::size_t m = labels.size();
  TransportedLabels out;
  out.positions.reserve(m);
  out.position_variance.reserve(m);
  out.jacobians.reserve(m);
  out.jacobian_determinants.reserve(m);
  out.projected_rotations.reserve(m);
  out.near_singular.reserve(m);
  std::vector<Matrix> entry_variances;
  entry_variances.reserve(m);

  for (std::size_t i = 0; i < m; ++i) {
    const Vector& x = labels.positions[i];
    const PointTransport p = transport_point(map, x);
    JacobianTransport jt = transport_jacobian(map, x);
    PolarRotation polar = nearest_rotation(jt.jacobian);
    out.positions.push_back(p.mean);
    out.position_variance.push_back(p.variance);
    out.jacobian_determinants.push_back(jt.jacobian.determinant());
    out.jacobians.push_back(std::move(jt.jacobian));
    entry_variances.push_back(std::move(jt.entry_variance));
    out.near_singular.push_back(polar.near_singular);
    if (polar.near_singular) {
      out.warnings.push_back("label " + std::to_string(i) + ": near-singular Jacobian, rotation factor not unique");
    }
    out.projected_rotations.push_back(std::move(polar.rotation));
  }

  if (labels.velocities) {
    std::vector<Vector> vel(m), var(m);
    for (std::size_t i = 0; i < m; ++i) {
      const Vector& xd = (*labels.velocities)[i];
      vel[i] = out.jacobians[i] * xd;
      var[i] = entry_variances[i] * xd.cwiseAbs2();
    }
    out.velocities = std::move(vel);
    out.velocity_variance = std::move(var);
  }
  if (labels.orientations) {
    std::vector<RotationMatrix> rots;
    rots.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      Matrix r = out.projected_rotations[i].matrix() * (*labels.orientations)[i];
      rots.emplace_back(std::move(r), 2.0 * kLabelTolerance);
    }
    out.orientations = std::move(rots);
  }
  auto congruence = [&](const std::vector<Matrix>& in) {
    std::vector<Matrix> res(m);
    for (std::size_t i = 0; i < m; ++i) {
      const Matrix& r = out.projected_rotations[i].matrix();
      Matrix k = r * in[i] * r.transpose();
      res[i] = 0.5 * (k + k.transpose());
    }
    return res;
  };
  if (labels.stiffness) out.stiffness = congruence(*labels.stiffness);
  if (labels.damping) out.damping = congruence(*labels.damping);
  return out;
}

std::vector<Vector> velocity_transport_variance(const TransportMap& map, const std::vector<Vector>& positions,
                                                const std::vector<Vector>& velocities) {
  if (positions.size() != velocities.size()) {
    throw std::invalid_argument("positions and velocities differ in length");
  }
  std::vector<Vector> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (velocities[i].size() != map.dim()) throw std::invalid_argument("velocity dimension does not match map");
    out[i] = transport_jacobian(map, positions[i]).entry_variance * velocities[i].cwiseAbs2();
  }
  return out;
}

std::vector<Vector> transport_uncertainty(const TransportMap& map, const PolicyLabels& labels,
                                          const std::vector<Vector>& policy_variance) {
  if (!labels.velocities) throw std::invalid_argument("velocity labels are required for velocity uncertainty");
  if (policy_variance.size() != labels.size()) {
    throw std::invalid_argument("policy variance and labels differ in length");
  }
  for (const auto& v : policy_variance) {
    if (v.size() != map.dim()) throw std::invalid_argument("policy variance dimension does not match map");
    if (!v.allFinite() || (v.array() < 0.0).any()) throw std::invalid_argument("negative input variance");
  }
  std::vector<Vector> total = velocity_transport_variance(map, labels.positions, *labels.velocities);
  for (std::size_t i = 0; i < total.size(); ++i) total[i] = policy_variance[i] + total[i];
  return total;
}

DiffeomorphismReport check_local_diffeomorphism(const TransportMap& map, const std::vector<Vector>& points) {
  if (points.empty()) throw std::invalid_argument("no points to check");
  DiffeomorphismReport out;
  out.determinants.reserve(points.size());
  std::size_t positive = 0;
  for (const auto& p : points) {
    const double det = transport_jacobian(map, p).jacobian.determinant();
    out.determinants.push_back(det);
    if (det > 0.0) ++positive;
  }
  out.positive_fraction = static_cast<double>(positive) / static_cast<double>(points.size());

  const auto& src = map.keypoints().source();
  bool all_pos = true;
  bool all_neg = true;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double det = transport_jacobian(map, src[i]).jacobian.determinant();
    out.keypoint_determinants.push_back(det);
    all_pos = all_pos && det > 0.0;
    all_neg = all_neg && det < 0.0;
  }
  out.keypoint_signs_uniform = all_pos || all_neg;
  return out;
}

}  // namespace poltrans
