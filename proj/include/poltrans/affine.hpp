#pragma once

#include "poltrans/types.hpp"

namespace poltrans {

/// Rigid map x -> A (x - source_centroid) + target_centroid.
struct AffineMap {
  RotationMatrix rotation;
  Vector source_centroid;
  Vector target_centroid;

  int dim() const { return rotation.dim(); }
  static AffineMap identity(int dim);
};

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

/// Least-squares proper rotation + translation aligning source to target.
///
/// Cross-covariance H = (S - mean S)^T (T - mean T) = U S V^T gives
/// A = V U^T. A reflection is removed by flipping the column of V paired with
/// the smallest singular value. When the rotation is not unique (rank of H
/// below dim - 1) the rotation falls back to the identity.
AffineMap fit_affine(const PairedKeypoints& kp);

Vector apply_affine(const AffineMap& map, const Vector& x);

}  // namespace poltrans
