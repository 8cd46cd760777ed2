#include "poltrans/affine.hpp"

#include <stdexcept>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace poltrans {

AffineMap AffineMap::identity(int dim) {
  return {RotationMatrix::identity(dim), Vector::Zero(dim), Vector::Zero(dim)};
}

AffineMap fit_affine(const PairedKeypoints& kp) {
  const int d = kp.dim();
  if (kp.size() == 0) throw std::invalid_argument("cannot fit affine map to zero keypoints");

  const Vector src_mean = kp.source().centroid();
  const Vector tgt_mean = kp.target().centroid();
  const Matrix src = kp.source().rows().rowwise() - src_mean.transpose();
  const Matrix tgt = kp.target().rows().rowwise() - tgt_mean.transpose();
  const Matrix h = src.transpose() * tgt;

  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sigma = svd.singularValues();
  const double smax = sigma.size() > 0 ? sigma(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (smax > 0.0 && sigma(i) >= kRankTolerance * smax) ++rank;
  }

  Matrix a = Matrix::Identity(d, d);
  if (rank >= d - 1 && rank > 0) {
    Matrix v = svd.matrixV();
    const Matrix& u = svd.matrixU();
    a = v * u.transpose();
    if (a.determinant() < 0.0) {
      v.col(d - 1) *= -1.0;
      a = v * u.transpose();
    }
  }
  return {RotationMatrix(std::move(a)), src_mean, tgt_mean};
}

Vector apply_affine(const AffineMap& map, const Vector& x) {
  if (x.size() != map.dim()) throw std::invalid_argument("point dimension does not match affine map");
  return map.rotation.matrix() * (x - map.source_centroid) + map.target_centroid;
}

}  // namespace poltrans
