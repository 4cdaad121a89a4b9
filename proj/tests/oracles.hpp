#ifndef GAZEGUIDE_TESTS_ORACLES_HPP
#define GAZEGUIDE_TESTS_ORACLES_HPP

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. None of them call the code under test for the
// quantity they check.

#include "gazeguide/engine.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/geometry.hpp"
#include "gazeguide/simulation.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using gazeguide::Aabbd;
using gazeguide::Vec3d;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3d uniform_vec(std::mt19937_64& rng, double lo, double hi) {
  return Vec3d(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
}

inline Vec3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3d v;
  do {
    v = Vec3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Eigen::Quaterniond random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

/// First sample t = k*step (k = 0, 1, ...) whose point lies in the box.
/// Marching stops beyond the farthest point of the box.
inline std::optional<double> march_ray_box(const Vec3d& origin, const Vec3d& dir, const Aabbd& box,
                                           double step = 1e-4) {
  const double t_max = (box.center() - origin).norm() + box.half_extents().norm() + step;
  const Vec3d lo = box.min();
  const Vec3d hi = box.max();
  const long n = static_cast<long>(t_max / step) + 1;
  for (long k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * step;
    const Vec3d p = origin + t * dir;
    if (p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y() && p.z() >= lo.z() &&
        p.z() <= hi.z())
      return t;
  }
  return std::nullopt;
}

/// Direct angle test: in front of the apex and inside both half-angles.
inline bool frustum_contains_by_angles(const gazeguide::Frustumd& f, const Vec3d& p) {
  const Vec3d d = p - f.apex();
  const double z = d.dot(f.forward());
  if (z <= 0.0) return false;
  const double x = d.dot(f.forward().cross(f.up()));
  const double y = d.dot(f.up());
  const double yaw = std::atan2(std::abs(x), z) * 180.0 / M_PI;
  const double pitch = std::atan2(std::abs(y), z) * 180.0 / M_PI;
  return yaw <= f.hfov_deg() / 2.0 + 1e-12 && pitch <= f.vfov_deg() / 2.0 + 1e-12;
}

struct HitEvent {
  std::int64_t ts_us;
  bool hit;
};

/// Index of the first sample at which dwell is confirmed: the earliest hit
/// j for which some hit i <= j has ts[j] - ts[i] >= dwell and every miss
/// stretch between them is bracketed by hits no more than `tolerance`
/// apart. Scans every (i, j) pair.
inline std::optional<std::size_t> dwell_interval_scan(const std::vector<HitEvent>& ev, std::int64_t dwell_us,
                                                      std::int64_t tolerance_us) {
  const std::size_t n = ev.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (!ev[j].hit) continue;
    for (std::size_t i = 0; i <= j; ++i) {
      if (!ev[i].hit || ev[j].ts_us - ev[i].ts_us < dwell_us) continue;
      bool ok = true;
      std::size_t prev_hit = i;
      for (std::size_t k = i + 1; k <= j && ok; ++k) {
        if (!ev[k].hit) continue;
        if (k != prev_hit + 1 && ev[k].ts_us - ev[prev_hit].ts_us > tolerance_us) ok = false;
        prev_hit = k;
      }
      if (ok) return j;
    }
  }
  return std::nullopt;
}

/// Every window [i, j] of duration >= window_us whose maximum pairwise
/// angle is <= threshold and which cannot be extended to the right.
struct Window {
  std::size_t i, j;
  double dispersion;
};

inline double window_dispersion(const std::vector<Vec3d>& dirs, std::size_t i, std::size_t j) {
  double d = 0.0;
  for (std::size_t a = i; a <= j; ++a)
    for (std::size_t b = a + 1; b <= j; ++b) {
      const double c = std::clamp(dirs[a].dot(dirs[b]), -1.0, 1.0);
      d = std::max(d, std::acos(c) * 180.0 / M_PI);
    }
  return d;
}

inline bool valid_fixation_window(const std::vector<std::int64_t>& ts, const std::vector<Vec3d>& dirs,
                                  std::size_t i, std::size_t j, std::int64_t window_us, double threshold_deg) {
  return j < ts.size() && ts[j] - ts[i] >= window_us && window_dispersion(dirs, i, j) <= threshold_deg;
}

/// Closed-form duration of a zero-jitter episode: for each marker, the
/// reaction latency, the saccade at constant speed, then the dwell.
inline double predicted_episode_us(const std::vector<Vec3d>& marker_centers, const Vec3d& eye,
                                   const Vec3d& initial_dir, const gazeguide::AgentParams& a, int dwell_ms) {
  double total = 0.0;
  Vec3d gaze = initial_dir.normalized();
  for (const Vec3d& c : marker_centers) {
    const Vec3d target = (c - eye).normalized();
    const double angle = std::acos(std::clamp(gaze.dot(target), -1.0, 1.0)) * 180.0 / M_PI;
    total += a.latency_ms * 1000.0 + angle / a.saccade_speed_dps * 1e6 + dwell_ms * 1000.0;
    gaze = target;
  }
  return total;
}

/// Anchor of a plan made while looking along `gaze_dir` with the POI in
/// view: the gaze point at the POI's range.
inline Vec3d in_view_anchor(const Vec3d& eye, const Vec3d& gaze_dir, const Vec3d& poi) {
  return eye + (poi - eye).norm() * gaze_dir.normalized();
}

inline std::size_t expected_steps(double dist, double delta_d) {
  // Integer count of delta_d steps needed to cover dist, last one partial.
  std::size_t n = 0;
  double covered = 0.0;
  while (covered < dist - 1e-12) {
    covered += delta_d;
    ++n;
  }
  return std::max<std::size_t>(n, 1);
}

}  // namespace oracle

#endif  // GAZEGUIDE_TESTS_ORACLES_HPP
