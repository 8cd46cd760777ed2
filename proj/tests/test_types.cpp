#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "poltrans/types.hpp"

using namespace poltrans;
using oracle::v2;

namespace {

PolicyLabels full_labels(std::size_t m) {
  PolicyLabels l;
  l.dim = 2;
  for (std::size_t i = 0; i < m; ++i) l.positions.push_back(v2(double(i), 0.0));
  l.velocities = std::vector<Vector>(m, v2(1.0, 0.0));
  l.orientations = std::vector<Matrix>(m, Matrix::Identity(2, 2));
  Matrix k(2, 2);
  k << 100, 0, 0, 10;
  l.stiffness = std::vector<Matrix>(m, k);
  l.damping = std::vector<Matrix>(m, 0.1 * k);
  return l;
}

}  // namespace

TEST_CASE("point sets reject invalid input") {
  CHECK_THROWS_AS(PointSet(2, {}), std::invalid_argument);
  CHECK_THROWS_AS(PointSet(4, {Vector::Zero(4)}), std::invalid_argument);
  CHECK_THROWS_AS(PointSet(2, {Vector::Zero(3)}), std::invalid_argument);
  CHECK_THROWS_AS(PointSet(2, {v2(std::nan(""), 0.0)}), std::invalid_argument);
  CHECK_THROWS_AS(PointSet(2, {v2(std::numeric_limits<double>::infinity(), 0.0)}), std::invalid_argument);
  const PointSet ok(2, {v2(0, 0), v2(3, 4)});
  CHECK(ok.size() == 2);
  CHECK(ok.diameter() == doctest::Approx(5.0));
  CHECK(ok.centroid().isApprox(v2(1.5, 2.0)));
  CHECK(PointSet::from_rows(ok.rows()).points()[1] == ok[1]);
}

TEST_CASE("paired keypoints require matching count and dimension") {
  const PointSet a(2, {v2(0, 0), v2(1, 0)});
  const PointSet b(2, {v2(0, 0)});
  Vector p3 = Vector::Zero(3);
  const PointSet c(3, {p3, p3});
  CHECK_THROWS_AS(PairedKeypoints(a, b), std::invalid_argument);
  CHECK_THROWS_AS(PairedKeypoints(a, c), std::invalid_argument);
  CHECK_NOTHROW(PairedKeypoints(a, a));
}

TEST_CASE("rotation matrices must be proper and orthogonal") {
  CHECK_NOTHROW(RotationMatrix::identity(3));
  CHECK_NOTHROW(RotationMatrix::planar(0.7));
  CHECK_THROWS_AS(RotationMatrix(2.0 * Matrix::Identity(2, 2)), std::invalid_argument);
  Matrix reflect = Matrix::Identity(2, 2);
  reflect(1, 1) = -1.0;
  CHECK_THROWS_AS(RotationMatrix{reflect}, std::invalid_argument);
  CHECK(rotation_residual(oracle::rot2(1.2)) < 1e-12);
}

TEST_CASE("trajectories need strictly increasing times") {
  CHECK_THROWS_AS(Trajectory(2, {v2(0, 0), v2(1, 0)}, std::vector<double>{0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory(2, {v2(0, 0), v2(1, 0)}, std::vector<double>{0.0}), std::invalid_argument);
  const Trajectory t(2, {v2(0, 0), v2(1, 0)}, std::vector<double>{0.0, 0.5});
  CHECK(t.has_times());
}

TEST_CASE("validate_labels: valid labels give an empty report") {
  CHECK(validate_labels(full_labels(5)).empty());
}

TEST_CASE("validate_labels: scaled orientation reports orthogonality residual") {
  auto l = full_labels(4);
  (*l.orientations)[2] *= 2.0;
  const auto v = validate_labels(l);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "orientations");
  CHECK(v[0].index == 2);
  CHECK(v[0].residual == doctest::Approx(3.0));
}

TEST_CASE("validate_labels: negative stiffness eigenvalue is a PSD violation") {
  auto l = full_labels(3);
  Matrix k(2, 2);
  k << 1.0, 0.0, 0.0, -0.5;
  (*l.stiffness)[1] = k;
  const auto v = validate_labels(l);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "stiffness");
  CHECK(v[0].index == 1);
  CHECK(v[0].residual == doctest::Approx(-0.5));
}

TEST_CASE("validate_labels: other invariants") {
  auto l = full_labels(3);
  l.velocities->pop_back();
  CHECK(validate_labels(l).size() == 1);

  l = full_labels(3);
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  (*l.damping)[0] = asym;
  CHECK(validate_labels(l).at(0).field == "damping");

  l = full_labels(3);
  Matrix reflect = Matrix::Identity(2, 2);
  reflect(0, 0) = -1.0;
  (*l.orientations)[0] = reflect;
  CHECK(validate_labels(l).at(0).message.find("determinant") != std::string::npos);

  // Within tolerance is accepted.
  l = full_labels(3);
  (*l.orientations)[0] = oracle::rot2(0.3);
  (*l.orientations)[0](0, 0) += 1e-10;
  CHECK(validate_labels(l).empty());
}

TEST_CASE("validate_labels is idempotent and leaves the labels untouched") {
  auto l = full_labels(4);
  (*l.orientations)[1] *= 3.0;
  const auto before = l.orientations->at(1);
  const auto a = validate_labels(l);
  const auto b = validate_labels(l);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].field == b[i].field);
    CHECK(a[i].index == b[i].index);
    CHECK(a[i].residual == b[i].residual);
  }
  CHECK(l.orientations->at(1) == before);
}

TEST_CASE("finite differences: linear motion has unit velocity") {
  std::vector<Vector> p;
  std::vector<double> t;
  for (int i = 0; i < 6; ++i) {
    p.push_back(v2(0.1 * i, 0.0));
    t.push_back(0.1 * i);
  }
  for (const auto& v : finite_difference_velocities(Trajectory(2, p, t))) {
    CHECK(v(0) == doctest::Approx(1.0));
    CHECK(v(1) == doctest::Approx(0.0));
  }
}

TEST_CASE("finite differences: constant positions have zero velocity") {
  const Trajectory tr(2, {v2(1, 2), v2(1, 2), v2(1, 2)}, std::vector<double>{0, 1, 3});
  for (const auto& v : finite_difference_velocities(tr)) CHECK(v.norm() == 0.0);
}

TEST_CASE("finite differences: x = t^2 gives interior velocity 2 at t = 1") {
  const Trajectory tr(2, {v2(0, 0), v2(1, 0), v2(4, 0)}, std::vector<double>{0, 1, 2});
  const auto v = finite_difference_velocities(tr);
  CHECK(v[1](0) == doctest::Approx((4.0 - 0.0) / 2.0));
  CHECK(v[0](0) == doctest::Approx(1.0));
  CHECK(v[2](0) == doctest::Approx(3.0));
}

TEST_CASE("finite differences: errors") {
  const Trajectory one(2, {v2(0, 0)}, std::vector<double>{0});
  CHECK_THROWS_WITH_AS(finite_difference_velocities(one), "insufficient samples", std::invalid_argument);
  const Trajectory untimed(2, {v2(0, 0), v2(1, 1)});
  CHECK_THROWS_AS(finite_difference_velocities(untimed), std::invalid_argument);
}

TEST_CASE("is_symmetric_psd") {
  Matrix k(2, 2);
  k << 2, 1, 1, 2;
  CHECK(is_symmetric_psd(k));
  k(0, 1) = 1.1;
  CHECK_FALSE(is_symmetric_psd(k));
  k << 1, 0, 0, -1e-12;
  CHECK(is_symmetric_psd(k));
}
