#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "oracles.hpp"
#include "poltrans/scenarios.hpp"
#include "poltrans/transport.hpp"

using namespace poltrans;

namespace {

PointSet random_points(std::mt19937_64& rng, int dim, std::size_t n, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < n; ++i) {
    Vector p(dim);
    for (int a = 0; a < dim; ++a) p(a) = u(rng);
    pts.push_back(p);
  }
  return PointSet(dim, pts);
}

/// Target = smooth nonlinear deformation of a rotated source.
PairedKeypoints random_scenario(std::mt19937_64& rng, int dim, std::size_t n) {
  const PointSet s = random_points(rng, dim, n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double angle = 3.0 * u(rng);
  const double amp = 0.15 * u(rng);
  std::vector<Vector> t;
  for (const auto& p : s.points()) {
    Vector q = p;
    q.head(2) = oracle::rot2(angle) * p.head(2);
    q(0) += amp * std::sin(2.0 * p(1));
    q(1) += amp * std::cos(1.5 * p(0));
    q += Vector::Constant(dim, 0.3);
    t.push_back(q);
  }
  return {s, PointSet(dim, t)};
}

SurfaceScenario sine_bump() {
  ProfileParams p;
  p.amplitude = 0.05;
  p.frequency = 1.0;
  return make_surface_scenario(SurfaceProfile::sine, 20, 0, p);
}

/// phi evaluated from its definition with a dense solver.
Vector phi_oracle(const TransportMap& map, const Vector& x) {
  const auto& kp = map.keypoints();
  const Matrix a = map.affine().rotation.matrix();
  const Vector ms = kp.source().centroid(), mt = kp.target().centroid();
  Matrix in(static_cast<Eigen::Index>(kp.size()), kp.dim()), out(in.rows(), in.cols());
  for (std::size_t i = 0; i < kp.size(); ++i) {
    const Vector g = a * (kp.source()[i] - ms) + mt;
    in.row(static_cast<Eigen::Index>(i)) = g.transpose();
    out.row(static_cast<Eigen::Index>(i)) = (kp.target()[i] - g).transpose();
  }
  const auto& p = map.residual().params();
  const Vector gx = a * (x - ms) + mt;
  return gx + oracle::gp_mean(in, out, p.signal_variance, p.lengthscale, p.noise_variance, gx);
}

PolicyLabels full_labels(const std::vector<Vector>& xs) {
  PolicyLabels l;
  l.dim = 2;
  l.positions = xs;
  l.velocities = std::vector<Vector>{};
  l.orientations = std::vector<Matrix>{};
  l.stiffness = std::vector<Matrix>{};
  l.damping = std::vector<Matrix>{};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    l.velocities->push_back(oracle::v2(1.0, 0.5 * static_cast<double>(i % 3)));
    l.orientations->push_back(oracle::rot2(0.3 * static_cast<double>(i)));
    Matrix k(2, 2);
    k << 100.0, 0.0, 0.0, 10.0;
    const Matrix r = oracle::rot2(0.2 * static_cast<double>(i));
    l.stiffness->push_back(r * k * r.transpose());
    l.damping->push_back(0.1 * r * k * r.transpose());
  }
  return l;
}

Vector sorted_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return es.eigenvalues();
}

}  // namespace

TEST_CASE("identical keypoints give the identity map") {
  std::mt19937_64 rng(1);
  const PointSet s = random_points(rng, 2, 15);
  const auto map = fit_transport(PairedKeypoints(s, s));
  CHECK(keypoint_mismatch(map).max <= 1e-6 * s.diameter());
  for (int i = 0; i < 10; ++i) {
    const Vector x = random_points(rng, 2, 1, 3.0)[0];
    CHECK((transport_point(map, x).mean - x).norm() < 1e-6);
    CHECK((transport_jacobian(map, x).jacobian - Matrix::Identity(2, 2)).norm() < 1e-6);
  }
  const auto labels = full_labels({oracle::v2(0.1, 0.2), oracle::v2(-0.4, 0.9)});
  const auto out = transport_labels(map, labels);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((out.positions[i] - labels.positions[i]).norm() < 1e-6);
    CHECK(((*out.velocities)[i] - (*labels.velocities)[i]).norm() < 1e-6);
    CHECK(((*out.orientations)[i].matrix() - (*labels.orientations)[i]).norm() < 1e-6);
    CHECK(((*out.stiffness)[i] - (*labels.stiffness)[i]).norm() < 1e-6 * 100);
    CHECK(((*out.damping)[i] - (*labels.damping)[i]).norm() < 1e-6 * 10);
  }
  const auto rep = check_local_diffeomorphism(map, labels.positions);
  CHECK(rep.positive_fraction == 1.0);
  CHECK(rep.keypoint_signs_uniform);
}

TEST_CASE("pure translation and rigid motion are reproduced everywhere") {
  std::mt19937_64 rng(2);
  const PointSet s = random_points(rng, 2, 12);
  for (double angle : {0.0, 1.1, -2.7}) {
    const Matrix r = oracle::rot2(angle);
    const Vector t = oracle::v2(1.5, -0.7);
    std::vector<Vector> tp;
    for (const auto& p : s.points()) tp.push_back(r * p + t);
    const auto map = fit_transport(PairedKeypoints(s, PointSet(2, tp)));
    CHECK(map.residual().outputs().cwiseAbs().maxCoeff() < 1e-9);
    for (int i = 0; i < 20; ++i) {
      const Vector x = random_points(rng, 2, 1, 4.0)[0];
      CHECK((transport_point(map, x).mean - (r * x + t)).norm() < 1e-8);
      const auto j = transport_jacobian(map, x).jacobian;
      CHECK((j - r).norm() < 1e-6);
      CHECK(j.determinant() == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("residual GP is trained on gamma(source)") {
  std::mt19937_64 rng(3);
  const auto kp = random_scenario(rng, 2, 10);
  const auto map = fit_transport(kp);
  for (std::size_t i = 0; i < kp.size(); ++i) {
    const Vector g = apply_affine(map.affine(), kp.source()[i]);
    CHECK((map.residual().inputs().row(static_cast<Eigen::Index>(i)).transpose() - g).norm() < 1e-12);
    CHECK((map.residual().outputs().row(static_cast<Eigen::Index>(i)).transpose() - (kp.target()[i] - g)).norm() <
          1e-12);
  }
  // A GP trained on the raw source is rejected.
  CHECK_THROWS_AS(TransportMap(map.affine(), GPModel(kp.source().rows(), map.residual().outputs(),
                                                     map.residual().params()),
                               kp),
                  std::invalid_argument);
}

TEST_CASE("sine bump: keypoints land on targets and match a dense re-evaluation") {
  const auto sc = sine_bump();
  const auto map = fit_transport(sc.keypoints);
  const double tol = 1e-3 * sc.keypoints.target().diameter();
  for (std::size_t i = 0; i < sc.keypoints.size(); ++i) {
    const Vector got = transport_point(map, sc.keypoints.source()[i]).mean;
    CHECK((got - sc.keypoints.target()[i]).norm() <= tol);
    CHECK((got - phi_oracle(map, sc.keypoints.source()[i])).norm() < 1e-8);
  }
  // Midpoints between neighbouring keypoints.
  for (std::size_t i = 0; i + 1 < sc.keypoints.size(); i += 3) {
    const Vector mid = 0.5 * (sc.keypoints.source()[i] + sc.keypoints.source()[i + 1]);
    CHECK((transport_point(map, mid).mean - phi_oracle(map, mid)).norm() < 1e-8);
  }
}

TEST_CASE("sine bump: horizontal velocity follows the surface tangent") {
  const auto sc = sine_bump();
  const auto map = fit_transport(sc.keypoints);
  const Vector v = oracle::v2(1.0, 0.0);
  for (std::size_t i = 0; i < sc.keypoints.size(); ++i) {
    const double x = sc.keypoints.source()[i](0);
    const Vector tangent = surface_point(sc.profile, sc.params, x + 1e-6) - surface_point(sc.profile, sc.params, x - 1e-6);
    const Vector moved = transport_jacobian(map, sc.keypoints.source()[i]).jacobian * v;
    const double cosang = moved.dot(tangent) / (moved.norm() * tangent.norm());
    CHECK(std::acos(std::min(1.0, cosang)) * 180.0 / oracle::kPi <= 5.0);
  }
}

TEST_CASE("far from the keypoints the map reverts to gamma") {
  std::mt19937_64 rng(4);
  const auto kp = random_scenario(rng, 2, 15);
  const auto map = fit_transport(kp);
  const auto& p = map.residual().params();
  const double sp = std::sqrt(p.signal_variance), l = p.lengthscale;
  const Vector x = kp.source().centroid() + Vector::Constant(2, 2.0 + 30.0 * l);
  const auto pt = transport_point(map, x);
  CHECK((pt.mean - apply_affine(map.affine(), x)).norm() <= 1e-6 * sp);
  CHECK(pt.variance == doctest::Approx(p.signal_variance).epsilon(1e-9));
  const auto jt = transport_jacobian(map, x);
  CHECK((jt.jacobian - map.affine().rotation.matrix()).norm() <= 1e-6 * sp / l);

  PolicyLabels labels;
  labels.positions = {x, x};
  labels.velocities = std::vector<Vector>{oracle::v2(1.0, 0.0), oracle::v2(0.0, 0.0)};
  const auto var = transport_uncertainty(map, labels, {Vector::Zero(2), Vector::Zero(2)});
  const double prior = p.signal_variance / (l * l);
  CHECK(var[0](0) == doctest::Approx(prior).epsilon(1e-9));
  CHECK(var[0](1) == doctest::Approx(prior).epsilon(1e-9));
  CHECK(var[1].norm() == 0.0);
}

TEST_CASE("transport_uncertainty adds epistemic and transportation variance") {
  std::mt19937_64 rng(5);
  const auto kp = random_scenario(rng, 2, 12);
  const auto map = fit_transport(kp);
  PolicyLabels labels;
  labels.positions = {oracle::v2(0.1, 0.2), oracle::v2(0.9, -0.3), oracle::v2(-0.5, 0.5)};
  labels.velocities = std::vector<Vector>{oracle::v2(0.3, -1.0), oracle::v2(2.0, 0.1), oracle::v2(-0.2, 0.4)};
  const auto trans = velocity_transport_variance(map, labels.positions, *labels.velocities);
  const auto zero = transport_uncertainty(map, labels, std::vector<Vector>(3, Vector::Zero(2)));
  const std::vector<Vector> policy{oracle::v2(0.1, 0.2), oracle::v2(0.0, 1.0), oracle::v2(3.0, 0.0)};
  const auto total = transport_uncertainty(map, labels, policy);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(zero[i] == trans[i]);
    CHECK((total[i] - (trans[i] + policy[i])).norm() < 1e-15);
    // var_a = sum_b Var[J_ab] xdot_b^2
    const auto jt = transport_jacobian(map, labels.positions[i]);
    const Vector vsq = (*labels.velocities)[i].array().square();
    CHECK((trans[i] - jt.entry_variance * vsq).norm() < 1e-14);
  }
  CHECK_THROWS_AS(transport_uncertainty(map, labels, {oracle::v2(-1.0, 0.0), policy[1], policy[2]}),
                  std::invalid_argument);
  CHECK_THROWS_AS(transport_uncertainty(map, labels, {policy[0]}), std::invalid_argument);
}

TEST_CASE("90 degree rotation: velocities and stiffness rotate with the frame") {
  std::mt19937_64 rng(6);
  const PointSet s = random_points(rng, 2, 8);
  const Matrix a = oracle::rot2(oracle::kPi / 2);
  std::vector<Vector> tp;
  for (const auto& p : s.points()) tp.push_back(a * p);
  const auto map = fit_transport(PairedKeypoints(s, PointSet(2, tp)));
  PolicyLabels labels;
  labels.positions = {oracle::v2(0.2, 0.1)};
  labels.velocities = std::vector<Vector>{oracle::v2(1.0, 0.0)};
  Matrix k(2, 2);
  k << 100.0, 0.0, 0.0, 10.0;
  labels.stiffness = std::vector<Matrix>{k};
  const auto out = transport_labels(map, labels);
  CHECK(((*out.velocities)[0] - oracle::v2(0.0, 1.0)).norm() < 1e-9);
  CHECK(((*out.stiffness)[0] - a * k * a.transpose()).norm() < 1e-9);
  CHECK((sorted_eigenvalues((*out.stiffness)[0]) - oracle::v2(10.0, 100.0)).norm() < 1e-9);
}

TEST_CASE("Jacobian matches finite differences (1000 random pairs)") {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  int fits = 0;
  for (int trial = 0; fits * 20 < 1000; ++trial) {
    const int dim = trial % 3 == 2 ? 3 : 2;
    const auto kp = random_scenario(rng, dim, 6 + static_cast<std::size_t>(trial % 10));
    const auto map = fit_transport(kp);
    ++fits;
    for (int q = 0; q < 20; ++q) {
      const Vector x = random_points(rng, dim, 1, 1.5)[0];
      const Matrix fd = oracle::fd_jacobian([&](const Vector& v) { return transport_point(map, v).mean; }, x, 1e-5);
      const Matrix j = transport_jacobian(map, x).jacobian;
      worst = std::max(worst, (j - fd).norm() / std::max(1e-6, 1e-4 * j.norm()));
    }
  }
  CHECK(worst <= 1.0);
}

TEST_CASE("projected rotations are proper; spectra survive the congruence") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto kp = random_scenario(rng, 2, 10);
    const auto map = fit_transport(kp);
    std::vector<Vector> xs;
    for (int i = 0; i < 15; ++i) xs.push_back(random_points(rng, 2, 1, 1.5)[0]);
    const auto labels = full_labels(xs);
    const auto out = transport_labels(map, labels);
    REQUIRE(out.size() == xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Matrix& r = out.projected_rotations[i].matrix();
      CHECK((r.transpose() * r - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
      const Matrix& rk = (*out.orientations)[i].matrix();
      CHECK((rk - r * (*labels.orientations)[i]).norm() < 1e-12);
      CHECK((sorted_eigenvalues((*out.stiffness)[i]) - sorted_eigenvalues((*labels.stiffness)[i])).cwiseAbs().maxCoeff() <
            1e-9 * 100);
      CHECK((sorted_eigenvalues((*out.damping)[i]) - sorted_eigenvalues((*labels.damping)[i])).cwiseAbs().maxCoeff() <
            1e-9 * 10);
      CHECK(is_symmetric_psd((*out.stiffness)[i]));
      CHECK(std::abs(out.jacobian_determinants[i] - out.jacobians[i].determinant()) < 1e-12);
    }
  }
}

TEST_CASE("nearest_rotation handles reflections and singular Jacobians") {
  Matrix reflect(2, 2);
  reflect << 1.0, 0.0, 0.0, -1.0;
  const auto a = nearest_rotation(reflect);
  CHECK(std::abs(a.rotation.matrix().determinant() - 1.0) < 1e-12);
  CHECK_FALSE(a.near_singular);
  const auto z = nearest_rotation(Matrix::Zero(2, 2));
  CHECK(z.near_singular);
  CHECK(std::abs(z.rotation.matrix().determinant() - 1.0) < 1e-12);
  Matrix rank1(3, 3);
  rank1 << 1, 2, 3, 2, 4, 6, 1, 2, 3;
  const auto r = nearest_rotation(rank1);
  CHECK(r.near_singular);
  CHECK((r.rotation.matrix().transpose() * r.rotation.matrix() - Matrix::Identity(3, 3)).norm() < 1e-12);
  // Polar factor of a scaled rotation is the rotation.
  CHECK((nearest_rotation(3.0 * oracle::rot2(0.4)).rotation.matrix() - oracle::rot2(0.4)).norm() < 1e-12);
}

TEST_CASE("missing label families stay absent") {
  std::mt19937_64 rng(9);
  const auto map = fit_transport(random_scenario(rng, 2, 8));
  PolicyLabels labels;
  labels.positions = {oracle::v2(0.0, 0.0)};
  const auto out = transport_labels(map, labels);
  CHECK_FALSE(out.velocities.has_value());
  CHECK_FALSE(out.orientations.has_value());
  CHECK_FALSE(out.stiffness.has_value());
  CHECK_FALSE(out.damping.has_value());
  CHECK(out.jacobians.size() == 1);
  PolicyLabels wrong;
  wrong.dim = 3;
  wrong.positions = {Vector::Zero(3)};
  CHECK_THROWS_AS(transport_labels(map, wrong), std::invalid_argument);
}

TEST_CASE("a folding map is detected on a dense grid") {
  // x -> x^3 - 3x along the first axis folds the plane at x = +-1.
  std::vector<Vector> s, t;
  for (int i = 0; i <= 12; ++i) {
    for (int j = 0; j <= 4; ++j) {
      const double x = -2.0 + 4.0 * i / 12.0, y = -1.0 + 0.5 * j;
      s.push_back(oracle::v2(x, y));
      t.push_back(oracle::v2(x * x * x - 3.0 * x, y));
    }
  }
  const auto map = fit_transport(PairedKeypoints(PointSet(2, s), PointSet(2, t)));
  std::vector<Vector> grid;
  for (int i = 0; i <= 80; ++i) {
    for (int j = 0; j <= 10; ++j) grid.push_back(oracle::v2(-2.0 + 4.0 * i / 80.0, -1.0 + 0.2 * j));
  }
  const auto rep = check_local_diffeomorphism(map, grid);
  CHECK(rep.positive_fraction < 1.0);
  CHECK(rep.positive_fraction > 0.0);
  CHECK_FALSE(rep.keypoint_signs_uniform);
  CHECK(rep.determinants.size() == grid.size());
}

TEST_CASE("pure rotation has unit determinants") {
  std::mt19937_64 rng(10);
  const PointSet s = random_points(rng, 3, 10);
  Eigen::Matrix3d r = Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 2, -1).normalized()).toRotationMatrix();
  std::vector<Vector> tp;
  for (const auto& p : s.points()) tp.push_back(r * p);
  const auto map = fit_transport(PairedKeypoints(s, PointSet(3, tp)));
  std::vector<Vector> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(random_points(rng, 3, 1, 2.0)[0]);
  const auto rep = check_local_diffeomorphism(map, pts);
  for (double d : rep.determinants) CHECK(std::abs(d - 1.0) < 1e-6);
  CHECK(rep.positive_fraction == 1.0);
}

TEST_CASE("keypoint matching holds for random scenarios up to N = 200") {
  std::mt19937_64 rng(11);
  for (std::size_t n : {5u, 40u, 120u, 200u}) {
    const auto kp = random_scenario(rng, 2, n);
    const auto map = fit_transport(kp);
    CHECK(keypoint_mismatch(map).max <= 1e-3 * kp.target().diameter());
  }
}
