#include "poltrans/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace poltrans {

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"frechet", "area", "dtw", "final_position", "final_angle"};
  return names;
}

double metric_value(const MetricReport& r, const std::string& name) {
  if (name == "frechet") return r.frechet;
  if (name == "area") return r.area_between;
  if (name == "dtw") return r.dtw;
  if (name == "final_position") return r.final_position_error;
  if (name == "final_angle") return r.final_angle_error;
  throw std::invalid_argument("unknown metric: " + name);
}

namespace {

void require_nonempty(const Trajectory& a, const Trajectory& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("trajectories must be nonempty");
  if (a.dim() != b.dim()) throw std::invalid_argument("trajectories differ in dimension");
}

double triangle_area(const Vector& p, const Vector& q, const Vector& r) {
  const Vector u = q - p;
  const Vector v = r - p;
  const double uv = u.dot(v);
  return 0.5 * std::sqrt(std::max(0.0, u.squaredNorm() * v.squaredNorm() - uv * uv));
}

Vector tail_direction(const Trajectory& t) {
  const std::size_t m = t.size();
  const std::size_t segments = std::min(kDockingWindow, m - 1);
  // Mean of the last `segments` segment vectors telescopes to a chord.
  return (t[m - 1] - t[m - 1 - segments]) / static_cast<double>(segments);
}

}  // namespace

double frechet_distance(const Trajectory& a, const Trajectory& b) {
  require_nonempty(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = (a[i] - b[j]).norm();
      if (i == 0 && j == 0) {
        cur[j] = d;
      } else if (i == 0) {
        cur[j] = std::max(cur[j - 1], d);
      } else if (j == 0) {
        cur[j] = std::max(prev[j], d);
      } else {
        cur[j] = std::max(std::min({prev[j], cur[j - 1], prev[j - 1]}), d);
      }
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

double dtw_distance(const Trajectory& a, const Trajectory& b) {
  require_nonempty(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = (a[i] - b[j]).norm();
      if (i == 0 && j == 0) {
        cur[j] = d;
      } else if (i == 0) {
        cur[j] = cur[j - 1] + d;
      } else if (j == 0) {
        cur[j] = prev[j] + d;
      } else {
        cur[j] = d + std::min({prev[j], cur[j - 1], prev[j - 1]});
      }
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

std::vector<Vector> resample_by_arc_length(const std::vector<Vector>& points, std::size_t count) {
  if (points.empty() || count == 0) throw std::invalid_argument("cannot resample an empty curve");
  std::vector<double> cum(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) cum[i] = cum[i - 1] + (points[i] - points[i - 1]).norm();
  const double total = cum.back();
  std::vector<Vector> out;
  out.reserve(count);
  if (total <= 0.0) return std::vector<Vector>(count, points.front());
  if (count == 1) return {points.front()};
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    if (k + 1 == count) {
      out.push_back(points.back());
      break;
    }
    const double s = total * static_cast<double>(k) / static_cast<double>(count - 1);
    while (seg + 2 < points.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(points[seg] + f * (points[seg + 1] - points[seg]));
  }
  return out;
}

double area_between_curves(const Trajectory& a, const Trajectory& b) {
  require_nonempty(a, b);
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("area metric needs at least two points per curve");
  const std::size_t k = std::max(a.size(), b.size());
  const auto ra = resample_by_arc_length(a.positions(), k);
  const auto rb = resample_by_arc_length(b.positions(), k);
  double area = 0.0;
  // The smaller of the two diagonal splits is the exact area of any simple
  // quadrilateral, convex or not, and does not depend on the argument order.
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double d1 = triangle_area(ra[i], ra[i + 1], rb[i + 1]) + triangle_area(ra[i], rb[i + 1], rb[i]);
    const double d2 = triangle_area(ra[i], ra[i + 1], rb[i]) + triangle_area(ra[i + 1], rb[i + 1], rb[i]);
    area += std::min(d1, d2);
  }
  return area;
}

double final_position_error(const Trajectory& a, const Trajectory& b) {
  require_nonempty(a, b);
  return (a[a.size() - 1] - b[b.size() - 1]).norm();
}

double final_angle_error(const Trajectory& a, const Trajectory& b) {
  require_nonempty(a, b);
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("angle metric needs at least two points per curve");
  const Vector da = tail_direction(a);
  const Vector db = tail_direction(b);
  if (da.norm() == 0.0 || db.norm() == 0.0) throw std::invalid_argument("stationary tail");
  const double dot = da.dot(db);
  const double cross = std::sqrt(std::max(0.0, da.squaredNorm() * db.squaredNorm() - dot * dot));
  return std::atan2(cross, dot);
}

MetricReport compare_trajectories(const Trajectory& rollout, const Trajectory& reference) {
  MetricReport r;
  r.frechet = frechet_distance(rollout, reference);
  r.area_between = area_between_curves(rollout, reference);
  r.dtw = dtw_distance(rollout, reference);
  r.final_position_error = final_position_error(rollout, reference);
  r.final_angle_error = final_angle_error(rollout, reference);
  return r;
}

MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y, double alpha) {
  const std::size_t nx = x.size();
  const std::size_t ny = y.size();
  if (nx < 3 || ny < 3) throw std::invalid_argument("Mann-Whitney test needs at least 3 samples per group");
  const std::size_t n = nx + ny;

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : x) pooled.emplace_back(v, 0);
  for (double v : y) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(), [](const auto& l, const auto& r) { return l.first < r.first; });

  // Doubled mid-ranks keep every rank an integer.
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) rank2[k] = static_cast<long>(i + 1 + j);
    i = j;
  }
  long rx2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (pooled[k].second == 0) rx2 += rank2[k];
  }
  const double fx = static_cast<double>(nx);
  const double fy = static_cast<double>(ny);
  MannWhitneyResult res;
  res.u = 0.5 * static_cast<double>(rx2) - fx * (fx + 1.0) / 2.0;

  if (pooled.front().first == pooled.back().first) {
    res.p_value = 1.0;
    res.x_lower = false;
    return res;
  }

  if (nx <= kExactMannWhitneyMax && ny <= kExactMannWhitneyMax) {
    // counts[k][s]: subsets of size k whose doubled rank sum is s.
    const long max_sum = std::accumulate(rank2.begin(), rank2.end(), 0L);
    std::vector<std::vector<double>> counts(nx + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    counts[0][0] = 1.0;
    for (std::size_t item = 0; item < n; ++item) {
      const auto r = static_cast<std::size_t>(rank2[item]);
      for (std::size_t k = std::min(nx, item + 1); k >= 1; --k) {
        auto& dst = counts[k];
        const auto& src = counts[k - 1];
        for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) {
          if (src[s - r] != 0.0) dst[s] += src[s - r];
          if (s == r) break;
        }
      }
    }
    double below = 0.0;
    double total = 0.0;
    for (std::size_t s = 0; s < counts[nx].size(); ++s) {
      total += counts[nx][s];
      if (static_cast<long>(s) <= rx2) below += counts[nx][s];
    }
    res.p_value = below / total;
    res.exact = true;
  } else {
    const double nn = fx + fy;
    const double mean = fx * fy / 2.0;
    const double var = fx * fy / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) {
      res.p_value = 1.0;
    } else {
      const double z = (res.u - mean + 0.5) / std::sqrt(var);
      res.p_value = std::min(1.0, 0.5 * std::erfc(-z / std::sqrt(2.0)));
    }
    res.exact = false;
  }
  res.x_lower = res.p_value < alpha;
  return res;
}

RankingResult rank_methods(const MethodSamples& results, double alpha) {
  RankingResult out;
  std::set<std::string> metrics;
  for (const auto& [method, per_metric] : results) {
    out.total_points[method] = 0;
    for (const auto& [metric, samples] : per_metric) metrics.insert(metric);
  }
  for (const auto& metric : metrics) {
    MetricRanking mr;
    for (const auto& [method, per_metric] : results) mr.points[method] = 0;
    for (const auto& [mi, ri] : results) {
      const auto si = ri.find(metric);
      if (si == ri.end()) continue;
      for (const auto& [mj, rj] : results) {
        if (mi == mj) continue;
        const auto sj = rj.find(metric);
        if (sj == rj.end()) continue;
        if (mann_whitney_u(si->second, sj->second, alpha).x_lower) ++mr.points[mi];
      }
    }
    std::set<int, std::greater<>> levels;
    for (const auto& [method, pts] : mr.points) levels.insert(pts);
    for (const auto& [method, pts] : mr.points) {
      mr.rank[method] = 1 + static_cast<int>(std::distance(levels.begin(), levels.find(pts)));
      out.total_points[method] += pts;
    }
    out.per_metric[metric] = std::move(mr);
  }
  return out;
}

}  // namespace poltrans
