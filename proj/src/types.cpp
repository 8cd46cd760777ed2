#include "poltrans/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace poltrans {

namespace {

void check_dim(int dim) {
  if (dim != 2 && dim != 3) {
    throw std::invalid_argument("dimension must be 2 or 3, got " + std::to_string(dim));
  }
}

void check_point(const Vector& p, int dim, std::size_t i, const char* what) {
  if (p.size() != dim) {
    std::ostringstream os;
    os << what << " " << i << " has length " << p.size() << ", expected " << dim;
    throw std::invalid_argument(os.str());
  }
  if (!p.allFinite()) {
    std::ostringstream os;
    os << what << " " << i << " has non-finite components";
    throw std::invalid_argument(os.str());
  }
}

double symmetry_residual(const Matrix& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

PointSet::PointSet(int dim, std::vector<Vector> points) : dim_(dim), points_(std::move(points)) {
  check_dim(dim_);
  if (points_.empty()) throw std::invalid_argument("point set must contain at least one point");
  for (std::size_t i = 0; i < points_.size(); ++i) check_point(points_[i], dim_, i, "point");
}

PointSet PointSet::from_rows(const Matrix& rows) {
  std::vector<Vector> pts;
  pts.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) pts.emplace_back(rows.row(i).transpose());
  return PointSet(static_cast<int>(rows.cols()), std::move(pts));
}

Matrix PointSet::rows() const {
  Matrix m(static_cast<Eigen::Index>(points_.size()), dim_);
  for (std::size_t i = 0; i < points_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points_[i].transpose();
  return m;
}

Vector PointSet::centroid() const {
  Vector c = Vector::Zero(dim_);
  for (const auto& p : points_) c += p;
  return c / static_cast<double>(points_.size());
}

double PointSet::diameter() const {
  double best = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      best = std::max(best, (points_[i] - points_[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

PairedKeypoints::PairedKeypoints(PointSet source, PointSet target)
    : source_(std::move(source)), target_(std::move(target)) {
  if (source_.dim() != target_.dim()) {
    throw std::invalid_argument("source and target keypoints differ in dimension");
  }
  if (source_.size() != target_.size()) {
    throw std::invalid_argument("source and target keypoints differ in count");
  }
}

double rotation_residual(const Matrix& r) {
  if (r.rows() != r.cols() || r.rows() == 0) return std::numeric_limits<double>::infinity();
  const double ortho = (r.transpose() * r - Matrix::Identity(r.rows(), r.cols())).cwiseAbs().maxCoeff();
  const double det = std::abs(r.determinant() - 1.0);
  return std::max(ortho, det);
}

RotationMatrix::RotationMatrix(Matrix entries, double tolerance) : entries_(std::move(entries)) {
  check_dim(static_cast<int>(entries_.rows()));
  const double res = rotation_residual(entries_);
  if (!(res <= tolerance)) {
    std::ostringstream os;
    os << "matrix is not a proper rotation (residual " << res << ")";
    throw std::invalid_argument(os.str());
  }
}

RotationMatrix RotationMatrix::identity(int dim) {
  return RotationMatrix(Matrix::Identity(dim, dim));
}

RotationMatrix RotationMatrix::planar(double angle) {
  Matrix r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return RotationMatrix(std::move(r));
}

Trajectory::Trajectory(int dim, std::vector<Vector> positions, std::optional<std::vector<double>> times)
    : dim_(dim), positions_(std::move(positions)), times_(std::move(times)) {
  check_dim(dim_);
  for (std::size_t i = 0; i < positions_.size(); ++i) check_point(positions_[i], dim_, i, "trajectory point");
  if (times_) {
    if (times_->size() != positions_.size()) {
      throw std::invalid_argument("trajectory times and positions differ in length");
    }
    for (std::size_t i = 1; i < times_->size(); ++i) {
      if (!((*times_)[i] > (*times_)[i - 1])) {
        throw std::invalid_argument("trajectory times must be strictly increasing");
      }
    }
  }
}

bool is_symmetric_psd(const Matrix& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  if (!m.allFinite()) return false;
  return symmetry_residual(m) <= tolerance && min_eigenvalue(m) >= -tolerance;
}

std::vector<Violation> validate_labels(const PolicyLabels& labels, double tolerance) {
  std::vector<Violation> out;
  const std::size_t m = labels.positions.size();
  const int d = labels.dim;
  if (d != 2 && d != 3) {
    out.push_back({"dim", 0, static_cast<double>(d), "dimension must be 2 or 3"});
    return out;
  }

  auto check_length = [&](const char* field, std::size_t n) {
    if (n != m) {
      out.push_back({field, 0, static_cast<double>(n) - static_cast<double>(m),
                     std::string(field) + " length differs from positions"});
      return false;
    }
    return true;
  };

  for (std::size_t i = 0; i < m; ++i) {
    const auto& p = labels.positions[i];
    if (p.size() != d || !p.allFinite()) {
      out.push_back({"positions", i, 0.0, "position has wrong length or non-finite entries"});
    }
  }

  if (labels.velocities && check_length("velocities", labels.velocities->size())) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto& v = (*labels.velocities)[i];
      if (v.size() != d || !v.allFinite()) {
        out.push_back({"velocities", i, 0.0, "velocity has wrong length or non-finite entries"});
      }
    }
  }

  if (labels.orientations && check_length("orientations", labels.orientations->size())) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto& r = (*labels.orientations)[i];
      if (r.rows() != d || r.cols() != d) {
        out.push_back({"orientations", i, 0.0, "orientation has wrong shape"});
        continue;
      }
      const double ortho = (r.transpose() * r - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
      if (!(ortho <= tolerance)) {
        out.push_back({"orientations", i, ortho, "orthogonality residual max|R^T R - I| exceeds tolerance"});
        continue;
      }
      const double det = std::abs(r.determinant() - 1.0);
      if (!(det <= tolerance)) {
        out.push_back({"orientations", i, det, "determinant differs from +1"});
      }
    }
  }

  auto check_spd = [&](const char* field, const std::vector<Matrix>& mats) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto& k = mats[i];
      if (k.rows() != d || k.cols() != d || !k.allFinite()) {
        out.push_back({field, i, 0.0, "matrix has wrong shape or non-finite entries"});
        continue;
      }
      const double sym = symmetry_residual(k);
      if (!(sym <= tolerance)) {
        out.push_back({field, i, sym, "symmetry residual exceeds tolerance"});
        continue;
      }
      const double lo = min_eigenvalue(k);
      if (lo < -tolerance) out.push_back({field, i, lo, "negative eigenvalue"});
    }
  };
  if (labels.stiffness && check_length("stiffness", labels.stiffness->size())) {
    check_spd("stiffness", *labels.stiffness);
  }
  if (labels.damping && check_length("damping", labels.damping->size())) {
    check_spd("damping", *labels.damping);
  }
  return out;
}

std::vector<Vector> finite_difference_velocities(const Trajectory& traj) {
  if (!traj.has_times()) throw std::invalid_argument("finite differences need timestamps");
  const std::size_t m = traj.size();
  if (m < 2) throw std::invalid_argument("insufficient samples");
  const auto& t = *traj.times();
  const auto& x = traj.positions();
  std::vector<Vector> v(m);
  v[0] = (x[1] - x[0]) / (t[1] - t[0]);
  v[m - 1] = (x[m - 1] - x[m - 2]) / (t[m - 1] - t[m - 2]);
  for (std::size_t i = 1; i + 1 < m; ++i) v[i] = (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]);
  return v;
}

}  // namespace poltrans
