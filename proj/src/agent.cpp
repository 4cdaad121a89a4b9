#include "gazeguide/simulation.hpp"

#include <cmath>

namespace gazeguide {

void AgentParams::validate() const {
  auto check = [](bool ok, const char* field) {
    if (!ok) throw ConfigError(std::string("invalid agent.") + field);
  };
  check(latency_ms >= 0, "latency_ms");
  check(saccade_speed_dps > 0.0 && std::isfinite(saccade_speed_dps), "saccade_speed_dps");
  check(jitter_sigma_deg >= 0.0 && jitter_sigma_deg < 45.0, "jitter_sigma_deg");
  check(fov_h_deg > 0.0 && fov_h_deg < 180.0, "fov_h_deg");
  check(fov_v_deg > 0.0 && fov_v_deg < 180.0, "fov_v_deg");
  check(head_lag_tau_ms >= 0, "head_lag_tau_ms");
  check(sample_hz > 0 && sample_hz <= 1000, "sample_hz");
  check(all_finite(eye), "eye");
  check(all_finite(initial_dir) && initial_dir.norm() > 1e-9, "initial_dir");
}

GazeAgent::GazeAgent(const AgentParams& params)
    : params_(params), rng_(params.seed), gaze_dir_(params.initial_dir.normalized()) {
  params_.validate();
}

// Box-Muller over the raw engine output so that sequences do not depend on
// the standard library's distribution implementation.
double GazeAgent::gaussian() {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = static_cast<double>(rng_() >> 11) * kScale;
  const double u2 = static_cast<double>(rng_() >> 11) * kScale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::optional<Frustumd> GazeAgent::frustum() const {
  if (!head_forward_) return std::nullopt;
  return Frustumd::looking_along(params_.eye, *head_forward_, params_.fov_h_deg, params_.fov_v_deg);
}

GazeSample GazeAgent::step(const std::optional<VisibleMarker>& marker, std::int64_t dt_us) {
  now_us_ += dt_us;
  const double dt_s = static_cast<double>(dt_us) * 1e-6;

  if (marker && head_forward_) {
    const auto view = frustum();
    const bool noticed = now_us_ - marker->placed_us >= std::int64_t{params_.latency_ms} * 1000;
    if (noticed && frustum_contains(*view, marker->center)) {
      const Vec3d target = (marker->center - params_.eye).normalized();
      gaze_dir_ = rotate_toward(gaze_dir_, target, params_.saccade_speed_dps * dt_s);
    }
  }

  Vec3d emitted = gaze_dir_;
  if (params_.jitter_sigma_deg > 0.0) {
    const Frustumd basis = Frustumd::looking_along(params_.eye, gaze_dir_, 90.0, 90.0);
    const double a = deg_to_rad(params_.jitter_sigma_deg * gaussian());
    const double b = deg_to_rad(params_.jitter_sigma_deg * gaussian());
    emitted = (gaze_dir_ + std::tan(a) * basis.lateral() + std::tan(b) * basis.up()).normalized();
  }

  if (!head_forward_) {
    head_forward_ = emitted;
  } else {
    head_forward_ = follow_direction(*head_forward_, emitted, dt_s, params_.head_lag_tau_ms * 1e-3);
  }
  return GazeSample{now_us_, Rayd(params_.eye, emitted)};
}

}  // namespace gazeguide
