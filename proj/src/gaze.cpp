#include "gazeguide/gaze.hpp"

#include <algorithm>
#include <cmath>

namespace gazeguide {

GazeTrack::GazeTrack(std::size_t capacity, double reference_depth_m) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("gaze track capacity must be positive");
  set_reference_depth(reference_depth_m);
}

bool GazeTrack::push_sample(const GazeSample& s) {
  if (!samples_.empty() && s.ts_us <= samples_.back().ts_us) return false;
  if (samples_.size() == capacity_) samples_.pop_front();
  samples_.push_back(s);
  return true;
}

void GazeTrack::set_reference_depth(double depth_m) {
  if (!std::isfinite(depth_m) || depth_m <= 0.0)
    throw std::invalid_argument("reference depth must be positive");
  reference_depth_m_ = depth_m;
}

Vec3d gaze_point(const GazeSample& s, double depth_m) {
  if (!std::isfinite(depth_m) || depth_m <= 0.0)
    throw GeometryError("gaze depth must be finite and positive");
  return point_at(s.ray, depth_m);
}

namespace {

// d/dt of the Lagrange interpolant through (t_k, p_k), evaluated at node c.
Vec3d lagrange_derivative(const std::vector<double>& t, const std::vector<Vec3d>& p, std::size_t c) {
  Vec3d out = Vec3d::Zero();
  double center_weight = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (j == c) continue;
    center_weight += 1.0 / (t[c] - t[j]);
    double w = 1.0 / (t[j] - t[c]);
    for (std::size_t m = 0; m < t.size(); ++m) {
      if (m == j || m == c) continue;
      w *= (t[c] - t[m]) / (t[j] - t[m]);
    }
    out += w * p[j];
  }
  out += center_weight * p[c];
  return out;
}

}  // namespace

GazeKinematics estimate_kinematics(const GazeTrack& track) {
  const std::size_t need = track.smoothing() ? 5 : 3;
  if (track.size() < need) throw InsufficientSamples("kinematics needs more gaze samples");

  // Raw window: up to 5 stencil points, plus one on each side for smoothing.
  const std::size_t raw_n = std::min(track.size(), track.smoothing() ? std::size_t{7} : std::size_t{5});
  const std::size_t first = track.size() - raw_n;
  const std::int64_t t0 = track[first].ts_us;
  std::vector<double> t;
  std::vector<Vec3d> p;
  for (std::size_t i = first; i < track.size(); ++i) {
    t.push_back(static_cast<double>(track[i].ts_us - t0) * 1e-6);
    p.push_back(gaze_point(track[i], track.reference_depth()));
  }
  if (track.smoothing()) {
    std::vector<double> ts;
    std::vector<Vec3d> ps;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      ts.push_back((t[i - 1] + t[i] + t[i + 1]) / 3.0);
      ps.push_back((p[i - 1] + p[i] + p[i + 1]) / 3.0);
    }
    t = std::move(ts);
    p = std::move(ps);
  }
  // Odd-sized centred stencil ending at the newest point.
  const std::size_t n = t.size() >= 5 ? 5 : 3;
  t.erase(t.begin(), t.end() - static_cast<std::ptrdiff_t>(n));
  p.erase(p.begin(), p.end() - static_cast<std::ptrdiff_t>(n));
  const std::size_t c = n / 2;

  GazeKinematics k;
  k.velocity = lagrange_derivative(t, p, c);
  k.speed = k.velocity.norm();
  k.ts_us = t0 + static_cast<std::int64_t>(std::llround(t[c] * 1e6));
  return k;
}

std::vector<FixationEvent> detect_fixations(const GazeTrack& track, int window_ms,
                                            double dispersion_threshold_deg) {
  std::vector<FixationEvent> out;
  const std::int64_t window_us = static_cast<std::int64_t>(window_ms) * 1000;
  const std::size_t n = track.size();
  auto dir = [&](std::size_t i) -> const Vec3d& { return track[i].ray.direction(); };

  std::size_t i = 0;
  while (i < n) {
    // Smallest window starting at i that spans the duration threshold.
    std::size_t j = i;
    while (j < n && track[j].ts_us - track[i].ts_us < window_us) ++j;
    if (j >= n) break;

    double dispersion = 0.0;
    for (std::size_t a = i; a <= j && dispersion <= dispersion_threshold_deg; ++a)
      for (std::size_t b = a + 1; b <= j; ++b) dispersion = std::max(dispersion, angular_distance(dir(a), dir(b)));
    if (dispersion > dispersion_threshold_deg) {
      ++i;
      continue;
    }
    // Grow while the new sample keeps the window within the threshold.
    while (j + 1 < n) {
      double grow = dispersion;
      for (std::size_t a = i; a <= j; ++a) grow = std::max(grow, angular_distance(dir(a), dir(j + 1)));
      if (grow > dispersion_threshold_deg) break;
      dispersion = grow;
      ++j;
    }
    Vec3d sum = Vec3d::Zero();
    for (std::size_t a = i; a <= j; ++a) sum += dir(a);
    FixationEvent f;
    f.start_us = track[i].ts_us;
    f.end_us = track[j].ts_us;
    f.centroid_dir = sum.norm() > 0.0 ? Vec3d(sum.normalized()) : dir(j);
    f.dispersion_deg = dispersion;
    out.push_back(f);
    i = j + 1;
  }
  return out;
}

std::optional<FixationEvent> detect_fixation(const GazeTrack& track, int window_ms,
                                             double dispersion_threshold_deg) {
  auto all = detect_fixations(track, window_ms, dispersion_threshold_deg);
  if (all.empty()) return std::nullopt;
  return all.back();
}

DwellState update_dwell(DwellState state, const GazeSample& s, const Aabbd& marker_box, int dwell_ms,
                        int gap_tolerance_ms) {
  const std::int64_t tolerance_us = static_cast<std::int64_t>(gap_tolerance_ms) * 1000;
  const bool hit = ray_aabb_intersect(s.ray, marker_box).has_value();

  if (hit) {
    // A gap is measured between the hits that bracket it.
    const bool in_run = state.run_start_us.has_value();
    const bool gap_broken = in_run && state.gap_us > 0 && s.ts_us - *state.last_hit_us > tolerance_us;
    if (!in_run || gap_broken) {
      state.run_start_us = s.ts_us;
      state.accumulated_us = 0;
    } else {
      state.accumulated_us = s.ts_us - *state.run_start_us;
    }
    state.gap_us = 0;
    state.last_hit_us = s.ts_us;
  } else if (state.run_start_us) {
    state.gap_us = s.ts_us - *state.last_hit_us;
    if (state.gap_us > tolerance_us) {
      state.run_start_us.reset();
      state.accumulated_us = 0;
    }
  }
  if (state.accumulated_us >= static_cast<std::int64_t>(dwell_ms) * 1000) state.confirmed = true;
  return state;
}

}  // namespace gazeguide
