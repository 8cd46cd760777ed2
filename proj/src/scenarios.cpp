#include "poltrans/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace poltrans {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDemoPeriod = 10.0;
constexpr double kDemoHeight = 0.3;
constexpr double kFrameDemoDuration = 5.0;
constexpr double kDockingLength = 0.25;

Vector vec2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

Vector rotate(const Vector& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return vec2(c * v(0) - s * v(1), s * v(0) + c * v(1));
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vector heading_vector(double heading) { return vec2(std::cos(heading), std::sin(heading)); }

Vector frame_to_world(const FramePose& pose, const Vector& local) { return pose.position + rotate(local, pose.heading); }

}  // namespace

std::string to_string(SurfaceProfile p) {
  switch (p) {
    case SurfaceProfile::flat: return "flat";
    case SurfaceProfile::tilt: return "tilt";
    case SurfaceProfile::sine: return "sine";
    case SurfaceProfile::step: return "step";
    case SurfaceProfile::composite: return "composite";
  }
  return "unknown";
}

SurfaceProfile parse_surface_profile(const std::string& id) {
  if (id == "flat") return SurfaceProfile::flat;
  if (id == "tilt") return SurfaceProfile::tilt;
  if (id == "sine") return SurfaceProfile::sine;
  if (id == "step") return SurfaceProfile::step;
  if (id == "composite") return SurfaceProfile::composite;
  throw std::invalid_argument("unknown surface profile '" + id + "' (expected flat|tilt|sine|step|composite)");
}

Vector surface_point(SurfaceProfile profile, const ProfileParams& p, double x) {
  const double w = 2.0 * kPi * p.frequency / kBaselineLength;
  switch (profile) {
    case SurfaceProfile::flat:
      return vec2(x, 0.0);
    case SurfaceProfile::tilt:
      return rotate(vec2(x, 0.0), p.tilt);
    case SurfaceProfile::sine:
      return vec2(x, p.amplitude * std::sin(w * x));
    case SurfaceProfile::step:
      return vec2(x, p.height * logistic((x - 0.5 * kBaselineLength) / p.width));
    case SurfaceProfile::composite: {
      const double c = x - 0.5 * kBaselineLength;
      const double y = p.amplitude * std::sin(w * x) + p.height * std::exp(-c * c / (2.0 * p.width * p.width));
      return rotate(vec2(x, y), p.tilt);
    }
  }
  throw std::invalid_argument("unknown surface profile");
}

Vector surface_normal(SurfaceProfile profile, const ProfileParams& params, double x) {
  constexpr double h = 1e-6;
  const Vector tangent = (surface_point(profile, params, x + h) - surface_point(profile, params, x - h)) / (2.0 * h);
  return vec2(-tangent(1), tangent(0)).normalized();
}

ProfileParams random_profile_params(SurfaceProfile profile, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  ProfileParams p;
  switch (profile) {
    case SurfaceProfile::flat:
      break;
    case SurfaceProfile::tilt:
      p.tilt = uni(-0.6, 0.6);
      break;
    case SurfaceProfile::sine:
      p.amplitude = uni(0.04, 0.12);
      p.frequency = uni(0.75, 1.5);
      break;
    case SurfaceProfile::step:
      p.height = uni(0.08, 0.2);
      p.width = uni(0.03, 0.08);
      break;
    case SurfaceProfile::composite:
      p.tilt = uni(-0.3, 0.3);
      p.amplitude = uni(0.02, 0.06);
      p.frequency = uni(1.0, 2.0);
      p.height = uni(0.05, 0.12);
      p.width = uni(0.06, 0.12);
      break;
  }
  return p;
}

Trajectory surface_demonstration() {
  // Smooth max(0, sin) keeps the lower half of the loop on the baseline.
  constexpr double eps = 0.1;
  std::vector<Vector> pts;
  std::vector<double> times;
  pts.reserve(kDemonstrationSamples);
  times.reserve(kDemonstrationSamples);
  for (std::size_t k = 0; k < kDemonstrationSamples; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(kDemonstrationSamples);
    const double theta = 0.5 * kPi + 2.0 * kPi * s;
    const double sn = std::sin(theta);
    const double x = 0.5 * kBaselineLength - 0.45 * kBaselineLength * std::cos(theta);
    const double y = kDemoHeight * 0.5 * (sn + std::sqrt(sn * sn + eps * eps));
    pts.push_back(vec2(x, y));
    times.push_back(kDemoPeriod * s);
  }
  return Trajectory(2, std::move(pts), std::move(times));
}

SurfaceScenario make_surface_scenario(SurfaceProfile profile, std::size_t n_keypoints, std::uint64_t seed,
                                      std::optional<ProfileParams> params) {
  if (n_keypoints < 2) throw std::invalid_argument("surface scenario needs at least 2 keypoints");
  SurfaceScenario sc;
  sc.profile = profile;
  sc.params = params ? *params : random_profile_params(profile, seed);
  sc.seed = seed;
  sc.name = to_string(profile) + "_" + std::to_string(seed);
  std::vector<Vector> src, tgt;
  for (std::size_t i = 0; i < n_keypoints; ++i) {
    const double x = kBaselineLength * static_cast<double>(i) / static_cast<double>(n_keypoints - 1);
    src.push_back(vec2(x, 0.0));
    tgt.push_back(surface_point(profile, sc.params, x));
  }
  sc.keypoints = PairedKeypoints(PointSet(2, std::move(src)), PointSet(2, std::move(tgt)));
  sc.demonstration = surface_demonstration();
  return sc;
}

Trajectory surface_reference(const SurfaceScenario& sc) {
  std::vector<Vector> pts;
  pts.reserve(sc.demonstration.size());
  for (const auto& p : sc.demonstration.positions()) {
    pts.push_back(surface_point(sc.profile, sc.params, p(0)) + p(1) * surface_normal(sc.profile, sc.params, p(0)));
  }
  return Trajectory(2, std::move(pts), sc.demonstration.times());
}

FramePair canonical_frames() {
  return {{vec2(0.0, 0.0), 0.5 * kPi}, {vec2(1.0, 0.5), 0.0}};
}

std::vector<Vector> frame_keypoint_offsets(std::size_t count) {
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double angle = 0.4 + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(count);
    const double radius = (i % 2 == 0) ? 0.1 : 0.14;
    out.push_back(radius * heading_vector(angle));
  }
  return out;
}

Trajectory frame_demonstration(const FramePair& frames) {
  constexpr std::size_t arc_samples = 150;
  constexpr std::size_t dock_samples = 50;
  const Vector p0 = frames.start.position;
  const Vector hg = heading_vector(frames.goal.heading);
  const Vector p1 = frames.goal.position - kDockingLength * hg;
  const double span = (p1 - p0).norm();
  const Vector m0 = span * heading_vector(frames.start.heading);
  const Vector m1 = span * hg;

  std::vector<Vector> pts;
  pts.reserve(arc_samples + dock_samples);
  for (std::size_t k = 0; k < arc_samples; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(arc_samples);
    const double u2 = u * u;
    const double u3 = u2 * u;
    pts.push_back((2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m1);
  }
  for (std::size_t k = 0; k < dock_samples; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(dock_samples - 1);
    pts.push_back(p1 + u * kDockingLength * hg);
  }
  std::vector<double> times(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    times[k] = kFrameDemoDuration * static_cast<double>(k) / static_cast<double>(pts.size() - 1);
  }
  return Trajectory(2, std::move(pts), std::move(times));
}

FrameScenario make_frame_scenario(const FramePose& start, const FramePose& goal, std::size_t keypoints_per_frame,
                                  std::uint64_t seed, const FramePair& source) {
  if (start.position.size() != 2 || goal.position.size() != 2) throw std::invalid_argument("frame poses must be 2D");
  if ((start.position - goal.position).norm() < 1e-6) throw std::invalid_argument("start and goal frames coincide");
  if (keypoints_per_frame < 1) throw std::invalid_argument("need at least one keypoint per frame");
  FrameScenario sc;
  sc.source = source;
  sc.target = {start, goal};
  sc.keypoints_per_frame = keypoints_per_frame;
  sc.seed = seed;
  const auto offsets = frame_keypoint_offsets(keypoints_per_frame);
  std::vector<Vector> src, tgt;
  for (const FramePose FramePair::*which : {&FramePair::start, &FramePair::goal}) {
    for (const auto& off : offsets) {
      src.push_back(frame_to_world(source.*which, off));
      tgt.push_back(frame_to_world(sc.target.*which, off));
    }
  }
  sc.keypoints = PairedKeypoints(PointSet(2, std::move(src)), PointSet(2, std::move(tgt)));
  sc.demonstration = frame_demonstration(source);
  sc.reference = frame_demonstration(sc.target);
  return sc;
}

FramePair random_frame_pair(std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  auto uni = [&](double half) { return std::uniform_real_distribution<double>(-half, half)(rng) * spread; };
  FramePair f = canonical_frames();
  f.start.position += vec2(uni(0.15), uni(0.15));
  f.start.heading += uni(0.4);
  f.goal.position += vec2(uni(0.25), uni(0.25));
  f.goal.heading += uni(0.6);
  return f;
}

PairedKeypoints frame_keypoint_subset(const FrameScenario& sc, std::size_t per_frame) {
  const std::size_t k = sc.keypoints_per_frame;
  if (per_frame == 0 || per_frame > k) throw std::invalid_argument("invalid keypoint subset size");
  std::vector<Vector> src, tgt;
  for (std::size_t f = 0; f < 2; ++f) {
    for (std::size_t i = 0; i < per_frame; ++i) {
      src.push_back(sc.keypoints.source()[f * k + i]);
      tgt.push_back(sc.keypoints.target()[f * k + i]);
    }
  }
  return PairedKeypoints(PointSet(2, std::move(src)), PointSet(2, std::move(tgt)));
}

PointSet gridify_pointcloud(const PointSet& cloud, const GridSpec& grid, const std::array<Vector, 4>& corners,
                            std::size_t smoothing_half_window) {
  if (cloud.dim() != 3) throw std::invalid_argument("gridify expects a 3D point cloud");
  if (cloud.size() < 4) throw std::invalid_argument("gridify needs at least 4 points");
  if (grid.nx < 2 || grid.ny < 2) throw std::invalid_argument("grid must be at least 2 x 2");
  std::array<Vector, 4> c;
  for (std::size_t k = 0; k < 4; ++k) {
    if (corners[k].size() < 2) throw std::invalid_argument("corners need x and y");
    c[k] = corners[k].head(2);
  }
  double area2 = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& p = c[k];
    const auto& q = c[(k + 1) % 4];
    area2 += p(0) * q(1) - q(0) * p(1);
  }
  if (std::abs(area2) < 1e-12) throw std::invalid_argument("corners define a degenerate quadrilateral");

  const std::size_t nx = grid.nx;
  const std::size_t ny = grid.ny;
  const double rx = 0.5 * std::max((c[1] - c[0]).norm(), (c[2] - c[3]).norm()) / static_cast<double>(nx - 1);
  const double ry = 0.5 * std::max((c[3] - c[0]).norm(), (c[2] - c[1]).norm()) / static_cast<double>(ny - 1);
  const double radius = std::sqrt(rx * rx + ry * ry);

  std::vector<Vector> xy(nx * ny);
  std::vector<double> z(nx * ny, 0.0);
  std::vector<char> filled(nx * ny, 0);
  for (std::size_t j = 0; j < ny; ++j) {
    const double v = static_cast<double>(j) / static_cast<double>(ny - 1);
    for (std::size_t i = 0; i < nx; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(nx - 1);
      const std::size_t idx = j * nx + i;
      xy[idx] = (1 - u) * (1 - v) * c[0] + u * (1 - v) * c[1] + u * v * c[2] + (1 - u) * v * c[3];
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& p : cloud.points()) {
        if ((p.head(2) - xy[idx]).norm() <= radius) {
          sum += p(2);
          ++count;
        }
      }
      if (count > 0) {
        z[idx] = sum / static_cast<double>(count);
        filled[idx] = 1;
      }
    }
  }
  if (std::none_of(filled.begin(), filled.end(), [](char f) { return f != 0; })) {
    throw std::runtime_error("no cloud point falls near any grid node");
  }
  // Fill empty nodes from their filled 4-neighbours, sweeping until done.
  while (std::any_of(filled.begin(), filled.end(), [](char f) { return f == 0; })) {
    std::vector<char> next = filled;
    std::vector<double> nz = z;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t idx = j * nx + i;
        if (filled[idx]) continue;
        double sum = 0.0;
        int count = 0;
        auto take = [&](std::size_t n) {
          if (filled[n]) {
            sum += z[n];
            ++count;
          }
        };
        if (i > 0) take(idx - 1);
        if (i + 1 < nx) take(idx + 1);
        if (j > 0) take(idx - nx);
        if (j + 1 < ny) take(idx + nx);
        if (count > 0) {
          nz[idx] = sum / count;
          next[idx] = 1;
        }
      }
    }
    filled.swap(next);
    z.swap(nz);
  }

  const auto w = static_cast<long>(smoothing_half_window);
  std::vector<Vector> out;
  out.reserve(nx * ny);
  for (long j = 0; j < static_cast<long>(ny); ++j) {
    for (long i = 0; i < static_cast<long>(nx); ++i) {
      double sum = 0.0;
      int count = 0;
      for (long dj = -w; dj <= w; ++dj) {
        for (long di = -w; di <= w; ++di) {
          const long a = i + di;
          const long b = j + dj;
          if (a < 0 || b < 0 || a >= static_cast<long>(nx) || b >= static_cast<long>(ny)) continue;
          sum += z[static_cast<std::size_t>(b) * nx + static_cast<std::size_t>(a)];
          ++count;
        }
      }
      const Vector& p = xy[static_cast<std::size_t>(j) * nx + static_cast<std::size_t>(i)];
      Vector q(3);
      q << p(0), p(1), sum / count;
      out.push_back(std::move(q));
    }
  }
  return PointSet(3, std::move(out));
}

}  // namespace poltrans
