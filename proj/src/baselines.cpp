#include "poltrans/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseQR>

namespace poltrans {

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  // Shortest augmenting path with row/column potentials (Kuhn-Munkres).
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  if (n > m) throw std::invalid_argument("assignment needs rows <= cols");
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

ViaAssignment assign_via_points(const Trajectory& traj, const PairedKeypoints& kp) {
  if (traj.dim() != kp.dim()) throw std::invalid_argument("trajectory and keypoints differ in dimension");
  if (traj.size() < kp.size()) throw std::invalid_argument("more keypoints than trajectory points");
  Matrix cost(static_cast<Eigen::Index>(kp.size()), static_cast<Eigen::Index>(traj.size()));
  for (std::size_t i = 0; i < kp.size(); ++i) {
    for (std::size_t j = 0; j < traj.size(); ++j) {
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (kp.source()[i] - traj[j]).norm();
    }
  }
  const auto cols = solve_assignment(cost);
  ViaAssignment out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.pairs.push_back({cols[i], i});
    out.total_cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[i]));
  }
  return out;
}

std::vector<Vector> displaced_targets(const Trajectory& traj, const ViaAssignment& assignment,
                                      const PairedKeypoints& kp) {
  std::vector<Vector> out;
  out.reserve(assignment.pairs.size());
  for (const auto& pr : assignment.pairs) {
    out.push_back(traj[pr.trajectory_index] + kp.target()[pr.keypoint_index] - kp.source()[pr.keypoint_index]);
  }
  return out;
}

namespace {

void check_assignment(const Trajectory& traj, const ViaAssignment& assignment, const std::vector<Vector>& targets) {
  if (targets.size() != assignment.pairs.size()) {
    throw std::invalid_argument("targets and assignment differ in length");
  }
  std::vector<char> seen(traj.size(), 0);
  for (std::size_t k = 0; k < assignment.pairs.size(); ++k) {
    const auto idx = assignment.pairs[k].trajectory_index;
    if (idx >= traj.size()) throw std::invalid_argument("assignment index out of range");
    if (seen[idx]) throw std::invalid_argument("assignment binds a trajectory index twice");
    seen[idx] = 1;
    if (targets[k].size() != traj.dim()) throw std::invalid_argument("target dimension does not match trajectory");
  }
}

}  // namespace

Matrix uniform_laplacian(std::size_t nodes, Topology topology) {
  const auto n = static_cast<Eigen::Index>(nodes);
  Matrix l = Matrix::Zero(n, n);
  auto connect = [&](Eigen::Index a, Eigen::Index b) {
    l(a, b) -= 1.0;
    l(b, a) -= 1.0;
    l(a, a) += 1.0;
    l(b, b) += 1.0;
  };
  for (Eigen::Index i = 0; i + 1 < n; ++i) connect(i, i + 1);
  if (topology == Topology::ring && n >= 3) connect(n - 1, 0);
  return l;
}

Trajectory laplacian_edit(const Trajectory& traj, const ViaAssignment& assignment,
                          const std::vector<Vector>& targets, Topology topology) {
  check_assignment(traj, assignment, targets);
  const std::size_t m = traj.size();
  const int d = traj.dim();
  if (assignment.pairs.empty()) return traj;

  std::vector<long> constrained(m, -1);
  for (std::size_t k = 0; k < assignment.pairs.size(); ++k) {
    constrained[assignment.pairs[k].trajectory_index] = static_cast<long>(k);
  }
  // Column index of every free sample in the reduced system.
  std::vector<Eigen::Index> free_col(m, -1);
  Eigen::Index nf = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (constrained[i] < 0) free_col[i] = nf++;
  }

  const auto mi = static_cast<Eigen::Index>(m);
  const Matrix lap = uniform_laplacian(m, topology);
  Matrix x(mi, d);
  for (std::size_t i = 0; i < m; ++i) x.row(static_cast<Eigen::Index>(i)) = traj[i].transpose();

  std::vector<Vector> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (constrained[i] >= 0) out[i] = targets[static_cast<std::size_t>(constrained[i])];
  }
  if (nf > 0) {
    // Pinned samples move to the right-hand side; every Laplacian row stays in
    // the least-squares objective.
    Matrix rhs = lap * x;
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index r = 0; r < mi; ++r) {
      for (Eigen::Index c = 0; c < mi; ++c) {
        const double v = lap(r, c);
        if (v == 0.0) continue;
        const long k = constrained[static_cast<std::size_t>(c)];
        if (k >= 0) {
          rhs.row(r) -= v * targets[static_cast<std::size_t>(k)].transpose();
        } else {
          trip.emplace_back(r, free_col[static_cast<std::size_t>(c)], v);
        }
      }
    }
    Eigen::SparseMatrix<double> a(mi, nf);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    qr.compute(a);
    if (qr.info() != Eigen::Success || qr.rank() < nf) throw std::runtime_error("singular Laplacian system");
    const Matrix sol = qr.solve(rhs);
    if (qr.info() != Eigen::Success || !sol.allFinite()) throw std::runtime_error("singular Laplacian system");
    for (std::size_t i = 0; i < m; ++i) {
      if (free_col[i] >= 0) out[i] = sol.row(free_col[i]).transpose();
    }
  }
  return Trajectory(d, std::move(out), traj.times());
}

Trajectory reshaped_kmp(const Trajectory& traj, const ViaAssignment& assignment,
                        const std::vector<Vector>& targets, const GPConfig& time_gp) {
  if (!traj.has_times()) throw std::invalid_argument("reshaped KMP needs timestamps");
  check_assignment(traj, assignment, targets);
  const auto& t = *traj.times();
  const int d = traj.dim();
  if (assignment.pairs.empty()) return traj;

  const auto n = static_cast<Eigen::Index>(assignment.pairs.size());
  Matrix in(n, 1), out(n, d);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto idx = assignment.pairs[static_cast<std::size_t>(k)].trajectory_index;
    in(k, 0) = t[idx];
    out.row(k) = (targets[static_cast<std::size_t>(k)] - traj[idx]).transpose();
  }
  if (out.cwiseAbs().maxCoeff() == 0.0) return traj;

  // Assigned samples must land on their targets, up to the noise floor.
  const GPModel gp = enforce_interpolation(fit_gp(in, out, time_gp), 1e-9 * out.cwiseAbs().maxCoeff());
  std::vector<Vector> pos(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    Vector q(1);
    q(0) = t[i];
    pos[i] = traj[i] + gp.predict_mean(q);
  }
  return Trajectory(d, std::move(pos), traj.times());
}

Matrix lwt_unit_jacobian(const LWTUnit& unit, const Vector& x) {
  const Vector diff = x - unit.center;
  const double r2 = unit.radius * unit.radius;
  const double w = std::exp(-diff.squaredNorm() / (2.0 * r2));
  const auto d = x.size();
  return Matrix::Identity(d, d) - unit.translation * (w / r2) * diff.transpose();
}

namespace {

Vector apply_unit(const LWTUnit& unit, const Vector& x) {
  const double w = std::exp(-(x - unit.center).squaredNorm() / (2.0 * unit.radius * unit.radius));
  return x + w * unit.translation;
}

}  // namespace

Vector apply_lwt(const LWTMap& map, const Vector& x) {
  if (x.size() != map.dim) throw std::invalid_argument("point dimension does not match LWT map");
  Vector y = x;
  for (const auto& unit : map.units) y = apply_unit(unit, y);
  return y;
}

Matrix lwt_jacobian(const LWTMap& map, const Vector& x) {
  if (x.size() != map.dim) throw std::invalid_argument("point dimension does not match LWT map");
  Vector y = x;
  Matrix j = Matrix::Identity(map.dim, map.dim);
  for (const auto& unit : map.units) {
    j = lwt_unit_jacobian(unit, y) * j;
    y = apply_unit(unit, y);
  }
  return j;
}

LWTMap fit_lwt(const PairedKeypoints& kp, const LWTConfig& config) {
  const std::size_t n = kp.size();
  LWTMap map;
  map.dim = kp.dim();
  const double diam = kp.target().diameter();
  const double tol = config.tolerance_ratio * (diam > 0.0 ? diam : 1.0);

  std::vector<Vector> cur = kp.source().points();
  auto worst = [&](std::size_t& which) {
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = (kp.target()[i] - cur[i]).norm();
      if (e > best) {
        best = e;
        which = i;
      }
    }
    return best;
  };

  std::size_t which = 0;
  double residual = worst(which);
  double best_residual = residual;
  std::size_t best_units = 0;
  for (int it = 0; it < config.max_iters && residual >= tol; ++it) {
    const Vector err = kp.target()[which] - cur[which];
    double nn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i != which) nn = std::min(nn, (cur[i] - cur[which]).norm());
    }
    double radius = std::isfinite(nn) && nn > 0.0 ? config.radius_ratio * nn : err.norm() / config.step_ratio;
    if (!(radius > 0.0)) radius = 1.0;
    Vector step = err;
    const double cap = config.step_ratio * radius;
    if (step.norm() > cap) step *= cap / step.norm();

    LWTUnit unit{cur[which], step, radius};
    for (auto& p : cur) p = apply_unit(unit, p);
    map.units.push_back(std::move(unit));

    residual = worst(which);
    if (residual < best_residual) {
      best_residual = residual;
      best_units = map.units.size();
    }
  }
  map.converged = residual < tol;
  if (!map.converged) {
    map.units.resize(best_units);
    map.warning = "LWT did not converge within " + std::to_string(config.max_iters) + " iterations";
  }
  map.max_residual = map.converged ? residual : best_residual;
  return map;
}

}  // namespace poltrans
