#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "poltrans/baselines.hpp"

using namespace poltrans;

namespace {

Trajectory line_trajectory(std::size_t m, bool timed = true) {
  std::vector<Vector> pts;
  std::vector<double> times;
  for (std::size_t i = 0; i < m; ++i) {
    pts.push_back(oracle::v2(static_cast<double>(i), 0.0));
    times.push_back(0.1 * static_cast<double>(i));
  }
  if (!timed) return Trajectory(2, pts);
  return Trajectory(2, pts, times);
}

Trajectory random_walk(std::mt19937_64& rng, std::size_t m) {
  std::normal_distribution<double> g(0.0, 0.2);
  std::vector<Vector> pts;
  std::vector<double> times;
  Vector p = Vector::Zero(2);
  for (std::size_t i = 0; i < m; ++i) {
    p += oracle::v2(0.1 + std::abs(g(rng)), g(rng));
    pts.push_back(p);
    times.push_back(0.05 * static_cast<double>(i));
  }
  return Trajectory(2, pts, times);
}

Matrix distance_matrix(const PairedKeypoints& kp, const Trajectory& traj) {
  Matrix c(static_cast<Eigen::Index>(kp.size()), static_cast<Eigen::Index>(traj.size()));
  for (std::size_t i = 0; i < kp.size(); ++i) {
    for (std::size_t j = 0; j < traj.size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (kp.source()[i] - traj[j]).norm();
    }
  }
  return c;
}

Matrix traj_rows(const Trajectory& t) {
  Matrix m(static_cast<Eigen::Index>(t.size()), t.dim());
  for (std::size_t i = 0; i < t.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = t[i].transpose();
  return m;
}

ViaAssignment manual_assignment(const std::vector<std::size_t>& idx) {
  ViaAssignment a;
  for (std::size_t k = 0; k < idx.size(); ++k) a.pairs.push_back({idx[k], k});
  return a;
}

}  // namespace

TEST_CASE("assignment of coinciding keypoints costs nothing") {
  const auto traj = line_trajectory(10);
  const PointSet s(2, {traj[7], traj[2], traj[4]});
  const auto a = assign_via_points(traj, PairedKeypoints(s, s));
  CHECK(a.total_cost == doctest::Approx(0.0));
  REQUIRE(a.pairs.size() == 3);
  CHECK(a.pairs[0].trajectory_index == 7);
  CHECK(a.pairs[1].trajectory_index == 2);
  CHECK(a.pairs[2].trajectory_index == 4);
}

TEST_CASE("small assignments match exhaustive enumeration") {
  const Trajectory traj(2, {oracle::v2(0, 0), oracle::v2(1, 0), oracle::v2(3, 0)});
  const PointSet s(2, {oracle::v2(0.9, 0.2), oracle::v2(0.4, -0.1)});
  const PairedKeypoints kp(s, s);
  std::vector<std::size_t> best;
  const double brute = oracle::brute_force_assignment(distance_matrix(kp, traj), &best);
  const auto a = assign_via_points(traj, kp);
  CHECK(a.total_cost == doctest::Approx(brute).epsilon(1e-12));
  CHECK(a.pairs[0].trajectory_index == best[0]);
  CHECK(a.pairs[1].trajectory_index == best[1]);

  // Both keypoints closest to the same sample.
  const Trajectory t2(2, {oracle::v2(0, 0), oracle::v2(5, 0), oracle::v2(-4, 0)});
  const PointSet s2(2, {oracle::v2(0, 1), oracle::v2(0, -1)});
  const auto a2 = assign_via_points(t2, PairedKeypoints(s2, s2));
  CHECK(a2.pairs[0].trajectory_index != a2.pairs[1].trajectory_index);
  CHECK(a2.total_cost ==
        doctest::Approx(oracle::brute_force_assignment(distance_matrix(PairedKeypoints(s2, s2), t2))).epsilon(1e-12));
}

TEST_CASE("assignment beats greedy and matches brute force on random instances") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 5);
    const std::size_t m = n + static_cast<std::size_t>(trial % 4);
    std::vector<Vector> tp, sp;
    for (std::size_t j = 0; j < m; ++j) tp.push_back(oracle::v2(u(rng), u(rng)));
    for (std::size_t i = 0; i < n; ++i) sp.push_back(oracle::v2(u(rng), u(rng)));
    const Trajectory traj(2, tp);
    const PointSet s(2, sp);
    const PairedKeypoints kp(s, s);
    const Matrix c = distance_matrix(kp, traj);
    const auto a = assign_via_points(traj, kp);

    std::vector<char> used(m, 0);
    double greedy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = m;
      for (std::size_t j = 0; j < m; ++j) {
        if (!used[j] && (best == m || c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <
                                          c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)))) {
          best = j;
        }
      }
      used[best] = 1;
      greedy += c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best));
    }
    CHECK(a.total_cost <= greedy + 1e-12);
    CHECK(a.total_cost == doctest::Approx(oracle::brute_force_assignment(c)).epsilon(1e-12));
  }
}

TEST_CASE("solve_assignment on a rectangular cost matrix") {
  Matrix c(2, 4);
  c << 4, 1, 3, 9, 2, 0, 5, 9;
  const auto cols = solve_assignment(c);
  CHECK(c(0, static_cast<Eigen::Index>(cols[0])) + c(1, static_cast<Eigen::Index>(cols[1])) == 3.0);
}

TEST_CASE("more keypoints than samples is rejected") {
  const auto traj = line_trajectory(2);
  const PointSet s(2, {oracle::v2(0, 0), oracle::v2(1, 0), oracle::v2(2, 0)});
  CHECK_THROWS_WITH_AS(assign_via_points(traj, PairedKeypoints(s, s)), "more keypoints than trajectory points",
                       std::invalid_argument);
}

TEST_CASE("displaced targets add the keypoint displacement") {
  const auto traj = line_trajectory(5);
  const PointSet s(2, {oracle::v2(1.1, 0.1)});
  const PointSet t(2, {oracle::v2(2.1, 1.1)});
  const PairedKeypoints kp(s, t);
  const auto a = assign_via_points(traj, kp);
  const auto tg = displaced_targets(traj, a, kp);
  CHECK((tg[0] - oracle::v2(2.0, 1.0)).norm() < 1e-15);
}

TEST_CASE("Laplacian editing with unchanged targets is the identity") {
  std::mt19937_64 rng(13);
  const auto traj = random_walk(rng, 30);
  const auto a = manual_assignment({0, 11, 29});
  const std::vector<Vector> tg{traj[0], traj[11], traj[29]};
  for (auto topo : {Topology::chain, Topology::ring}) {
    const auto out = laplacian_edit(traj, a, tg, topo);
    CHECK((traj_rows(out) - traj_rows(traj)).cwiseAbs().maxCoeff() < 1e-9);
    // Laplacian coordinates of free nodes are untouched.
    const Matrix l = uniform_laplacian(30, topo);
    CHECK((l * traj_rows(out) - l * traj_rows(traj)).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK((traj_rows(laplacian_edit(traj, ViaAssignment{}, {}, Topology::chain)) - traj_rows(traj)).norm() == 0.0);
}

TEST_CASE("uniform Laplacian matches the adjacency construction") {
  CHECK((uniform_laplacian(6, Topology::chain) - oracle::laplacian(6, false)).norm() == 0.0);
  CHECK((uniform_laplacian(6, Topology::ring) - oracle::laplacian(6, true)).norm() == 0.0);
}

TEST_CASE("five-node chain with its middle node lifted") {
  const auto traj = line_trajectory(5);
  const auto a = manual_assignment({2});
  const std::vector<Vector> tg{oracle::v2(2.0, 1.0)};
  const auto out = laplacian_edit(traj, a, tg, Topology::chain);
  const Matrix expected = oracle::constrained_laplacian_ls(traj_rows(traj), false, {2}, tg);
  CHECK((traj_rows(out) - expected).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((out[2] - tg[0]).norm() < 1e-9);
}

TEST_CASE("Laplacian editing matches a dense constrained solve") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 8 + static_cast<std::size_t>(trial % 20);
    const auto traj = random_walk(rng, m);
    const bool ring = trial % 2 == 1;
    std::vector<std::size_t> idx{0, m / 3, m - 2};
    if (trial % 3 == 0) idx = {m / 2};
    std::vector<Vector> tg;
    for (auto i : idx) tg.push_back(traj[i] + oracle::v2(g(rng), g(rng)));
    const auto out = laplacian_edit(traj, manual_assignment(idx), tg, ring ? Topology::ring : Topology::chain);
    const Matrix expected = oracle::constrained_laplacian_ls(traj_rows(traj), ring, idx, tg);
    CHECK((traj_rows(out) - expected).cwiseAbs().maxCoeff() < 1e-8);
    for (std::size_t k = 0; k < idx.size(); ++k) CHECK((out[idx[k]] - tg[k]).norm() < 1e-9);
  }
}

TEST_CASE("ring editing wraps around the closure") {
  // Two pinned nodes keep the solution from being a pure translation.
  const auto traj = line_trajectory(12);
  const std::vector<std::size_t> idx{1, 6};
  const std::vector<Vector> tg{traj[1] + oracle::v2(0.0, 1.0), traj[6]};
  const auto ring = laplacian_edit(traj, manual_assignment(idx), tg, Topology::ring);
  const auto chain = laplacian_edit(traj, manual_assignment(idx), tg, Topology::chain);
  CHECK((traj_rows(ring) - oracle::constrained_laplacian_ls(traj_rows(traj), true, idx, tg)).cwiseAbs().maxCoeff() <
        1e-8);
  CHECK(std::abs(ring[11](1) - traj[11](1)) > 1e-3);
  CHECK(std::abs(ring[0](1) - traj[0](1)) > 1e-3);
  CHECK(std::abs(ring[11](1) - chain[11](1)) > 1e-3);
}

TEST_CASE("Reshaped-KMP: zero displacement, interpolation, decay") {
  const auto traj = line_trajectory(101);
  GPConfig cfg;
  cfg.optimize = false;
  cfg.init = KernelParams{1.0, 0.1, 1e-8};

  const auto a = manual_assignment({0, 50});
  const auto same = reshaped_kmp(traj, a, {traj[0], traj[50]}, cfg);
  CHECK((traj_rows(same) - traj_rows(traj)).norm() == 0.0);

  const Vector d = oracle::v2(0.3, -0.4);
  const auto one = reshaped_kmp(traj, manual_assignment({0}), {traj[0] + d}, cfg);
  CHECK(((one[0] - traj[0]) - d).norm() < 1e-6 * d.norm());
  // Endpoint at t = 10, more than 30 lengthscales away.
  CHECK((one[100] - traj[100]).norm() <= 1e-3 * d.norm());

  // With optimization the via samples still land on their targets.
  GPConfig opt;
  opt.max_noise_ratio = 1e-6;
  const std::vector<Vector> tg{traj[10] + oracle::v2(0, 1), traj[40] + oracle::v2(0.5, 0), traj[90] + oracle::v2(0, -1)};
  const auto many = reshaped_kmp(traj, manual_assignment({10, 40, 90}), tg, opt);
  CHECK((many[10] - tg[0]).norm() < 1e-6);
  CHECK((many[40] - tg[1]).norm() < 1e-6);
  CHECK((many[90] - tg[2]).norm() < 1e-6);

  CHECK_THROWS_AS(reshaped_kmp(line_trajectory(5, false), manual_assignment({0}), {oracle::v2(0, 1)}, cfg),
                  std::invalid_argument);
}

TEST_CASE("LWT: identity, far field, convergence and unit invertibility") {
  const PointSet s(2, {oracle::v2(0, 0), oracle::v2(1, 0)});
  const auto id = fit_lwt(PairedKeypoints(s, s));
  CHECK(id.units.empty());
  CHECK((apply_lwt(id, oracle::v2(0.3, 0.7)) - oracle::v2(0.3, 0.7)).norm() == 0.0);

  const PointSet t(2, {oracle::v2(0.1, 0.3), oracle::v2(1.2, -0.2)});
  LWTConfig cfg;
  const auto map = fit_lwt(PairedKeypoints(s, t), cfg);
  CHECK(map.converged);
  CHECK(map.warning.empty());
  const double tol = cfg.tolerance_ratio * t.diameter();
  for (std::size_t i = 0; i < 2; ++i) CHECK((apply_lwt(map, s[i]) - t[i]).norm() <= tol);
  const Vector far = oracle::v2(50.0, 50.0);
  CHECK((apply_lwt(map, far) - far).norm() < 1e-9);

  for (const auto& u : map.units) {
    CHECK(u.translation.norm() <= cfg.step_ratio * u.radius + 1e-12);
    for (int i = -10; i <= 10; ++i) {
      for (int j = -10; j <= 10; ++j) {
        const Vector x = u.center + u.radius * oracle::v2(0.3 * i, 0.3 * j);
        CHECK(lwt_unit_jacobian(u, x).determinant() > 0.0);
      }
    }
  }
  // Composed Jacobian vs finite differences.
  const Vector x = oracle::v2(0.4, 0.1);
  const Matrix fd = oracle::fd_jacobian([&](const Vector& v) { return apply_lwt(map, v); }, x, 1e-6);
  CHECK((lwt_jacobian(map, x) - fd).norm() < 1e-6);
}

TEST_CASE("LWT reports non-convergence with the best map") {
  const PointSet s(2, {oracle::v2(0, 0), oracle::v2(1, 0)});
  const PointSet t(2, {oracle::v2(3, 3), oracle::v2(-2, 1)});
  LWTConfig cfg;
  cfg.max_iters = 3;
  const auto map = fit_lwt(PairedKeypoints(s, t), cfg);
  CHECK_FALSE(map.converged);
  CHECK_FALSE(map.warning.empty());
  CHECK(map.units.size() <= 3);
}
