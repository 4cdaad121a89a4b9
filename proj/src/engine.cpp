#include "gazeguide/engine.hpp"

#include <cmath>

namespace gazeguide {

namespace {

// Rotates unit `from` by exactly `angle_deg` in the plane toward `toward`.
Vec3d rotate_by_toward(const Vec3d& from, const Vec3d& toward, double angle_deg) {
  Vec3d axis = from.cross(toward);
  if (axis.norm() < 1e-12) {
    axis = from.cross(Vec3d::UnitY());
    if (axis.norm() < 1e-12) axis = from.cross(Vec3d::UnitX());
  }
  return (Eigen::AngleAxisd(deg_to_rad(angle_deg), axis.normalized()) * from).normalized();
}

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::idle: return "idle";
    case Phase::awaiting_gaze: return "awaiting_gaze";
    case Phase::advancing: return "advancing";
    case Phase::reached: return "reached";
    case Phase::timed_out: return "timed_out";
  }
  return "idle";
}

void EngineConfig::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw std::invalid_argument(std::string("invalid engine.") + field);
  };
  require(dwell_ms > 0, "dwell_ms");
  require(gap_tolerance_ms >= 0, "gap_tolerance_ms");
  require(timeout_ms > 0, "timeout_ms");
  require(max_timeouts >= 1, "max_timeouts");
  require(std::isfinite(delta_d_m) && delta_d_m > 0.0, "delta_d_m");
  require(delta_t_ms > 0, "delta_t_ms");
  require(delta_t_min_ms > 0, "delta_t_min_ms");
  require(delta_t_max_ms >= delta_t_min_ms, "delta_t_max_ms");
  require(ewma_alpha > 0.0 && ewma_alpha <= 1.0, "ewma_alpha");
  require(std::isfinite(beta) && beta > 0.0, "beta");
  require(std::isfinite(marker_half_extent_m) && marker_half_extent_m > 0.0, "marker_half_extent_m");
  require(eccentricity_deg > 0.0 && eccentricity_deg < 180.0, "eccentricity_deg");
  require(hfov_deg > 0.0 && hfov_deg < 180.0, "hfov_deg");
  require(vfov_deg > 0.0 && vfov_deg < 180.0, "vfov_deg");
  require(head_lag_tau_ms >= 0, "head_lag_tau_ms");
  require(std::isfinite(default_depth_m) && default_depth_m > 0.0, "default_depth_m");
  require(track_capacity >= 3, "track_capacity");
  require(fixation_window_ms > 0, "fixation_window_ms");
  require(fixation_threshold_deg > 0.0, "fixation_threshold_deg");
  require(fixation_recency_ms >= 0, "fixation_recency_ms");
}

Engine::Engine(EngineConfig config)
    : config_(std::move(config)), track_(config_.track_capacity, config_.default_depth_m) {
  config_.validate();
  track_.set_smoothing(config_.smoothing);
  delta_d_m_ = config_.delta_d_m;
  delta_t_ms_ = config_.delta_t_ms;
  mode_ = config_.mode;
}

WireMessage Engine::emit(Payload p) {
  WireMessage m;
  m.seq = ++seq_;
  m.ts = now_us_;
  m.payload = std::move(p);
  return m;
}

const GazeSample& Engine::latest_gaze() const {
  if (track_.empty()) throw EngineError("no-gaze", "no gaze sample received yet");
  return track_.back();
}

std::optional<Frustumd> Engine::view() const {
  if (track_.empty() || !head_forward_) return std::nullopt;
  return Frustumd::looking_along(track_.back().ray.origin(), *head_forward_, config_.hfov_deg, config_.vfov_deg);
}

Frustumd Engine::view_or_throw() const {
  auto v = view();
  if (!v) throw EngineError("no-gaze", "no gaze sample received yet");
  return *v;
}

std::optional<GazeKinematics> Engine::kinematics() const {
  try {
    return estimate_kinematics(track_);
  } catch (const InsufficientSamples&) {
    return std::nullopt;
  }
}

Emissions Engine::on_tick(std::int64_t now_us) {
  Emissions out;
  if (now_us > now_us_) now_us_ = now_us;

  if (phase_ == Phase::reached || phase_ == Phase::timed_out) {
    phase_ = Phase::idle;
    return out;
  }
  if ((phase_ != Phase::awaiting_gaze && phase_ != Phase::advancing) || !marker_) return out;

  const std::int64_t elapsed = now_us_ - marker_->placed_us;
  const bool schedule_due = mode_ == Mode::scheduled && !shifting_ && plan_ && !plan_->at_last() &&
                            elapsed >= delta_t_ms_ * 1000;
  if (schedule_due) {
    advance(out);
  } else if (phase_ == Phase::awaiting_gaze && elapsed >= static_cast<std::int64_t>(config_.timeout_ms) * 1000) {
    handle_timeout(out);
  }
  return out;
}

Emissions Engine::on_gaze(const GazeSample& s) {
  Emissions out;
  const std::optional<std::int64_t> prev_ts =
      track_.empty() ? std::nullopt : std::optional<std::int64_t>(track_.back().ts_us);
  if (!track_.push_sample(s)) return out;
  if (s.ts_us > now_us_) now_us_ = s.ts_us;

  if (!head_forward_ || !prev_ts) {
    head_forward_ = s.ray.direction();
  } else {
    head_forward_ = follow_direction(*head_forward_, s.ray.direction(),
                                     static_cast<double>(s.ts_us - *prev_ts) * 1e-6,
                                     config_.head_lag_tau_ms * 1e-3);
  }

  double depth = config_.default_depth_m;
  if (marker_) {
    const double r = (marker_->box.center() - s.ray.origin()).norm();
    if (r > 0.0) depth = r;
  }
  track_.set_reference_depth(depth);

  if (phase_ == Phase::awaiting_gaze && marker_ && s.ts_us >= marker_->placed_us) {
    dwell_ = update_dwell(dwell_, s, marker_->box, config_.dwell_ms, config_.gap_tolerance_ms);
    if (dwell_.confirmed) confirm_step(out);
  }
  return out;
}

void Engine::begin_episode(const std::string& poi_id, const EpisodeOptions& opts) {
  if (opts.delta_d_m && !(std::isfinite(*opts.delta_d_m) && *opts.delta_d_m > 0.0))
    throw std::invalid_argument("delta_d_m must be positive");
  if (opts.delta_t_ms && *opts.delta_t_ms <= 0) throw std::invalid_argument("delta_t_ms must be positive");
  mode_ = opts.mode.value_or(config_.mode);
  delta_d_m_ = opts.delta_d_m.value_or(config_.delta_d_m);
  delta_t_ms_ = opts.delta_t_ms.value_or(config_.delta_t_ms);
  policy_ = IntervalPolicy{config_.delta_t_min_ms, config_.delta_t_max_ms, config_.ewma_alpha, config_.beta, {}};
  consecutive_timeouts_ = 0;
  record_ = EpisodeRecord{};
  record_.poi_id = poi_id;
  record_.mode = mode_;
  record_.start_us = now_us_;
}

Emissions Engine::start_attraction(const Poi& poi, const EpisodeOptions& opts) {
  if (phase_ != Phase::idle) throw EngineError("busy", "an episode is already running");
  if (!view()) throw EngineError("no-gaze", "no gaze sample received yet");
  Emissions out;
  begin_episode(poi.id, opts);
  target_ = poi;
  shifting_ = false;
  place_plan_marker(out);
  return out;
}

Emissions Engine::start_shift(const Poi& poi, const EpisodeOptions& opts, std::optional<FixationEvent> fixation) {
  if (phase_ != Phase::idle) throw EngineError("busy", "an episode is already running");
  const GazeSample& gaze = latest_gaze();
  if (!fixation) {
    fixation = detect_fixation(track_, config_.fixation_window_ms, config_.fixation_threshold_deg);
    if (fixation && fixation->end_us < gaze.ts_us - static_cast<std::int64_t>(config_.fixation_recency_ms) * 1000)
      fixation.reset();
  }
  if (!fixation) throw EngineError("no-fixation", "no recent fixation to shift away from");

  const Vec3d origin = gaze.ray.origin();
  const Vec3d to_poi = poi.position - origin;
  const Vec3d poi_dir = to_poi.norm() > 0.0 ? Vec3d(to_poi.normalized()) : fixation->centroid_dir;
  const Vec3d dir = rotate_by_toward(fixation->centroid_dir, poi_dir, config_.eccentricity_deg);

  Emissions out;
  begin_episode(poi.id, opts);
  target_ = poi;
  shifting_ = true;
  plan_.reset();
  place_marker(origin + config_.default_depth_m * dir, MarkerKind::pulse, out);
  return out;
}

void Engine::place_plan_marker(Emissions& out) {
  const Rayd gaze = latest_gaze().ray;
  try {
    plan_ = plan_chain(gaze, view_or_throw(), *target_, delta_d_m_);
  } catch (const DegeneratePlan&) {
    AttractionPlan single;
    single.poi_id = target_->id;
    single.anchor = target_->position;
    single.waypoints = {target_->position};
    single.delta_d_m = delta_d_m_;
    plan_ = std::move(single);
  }
  place_marker(plan_->current(), plan_->at_last() ? MarkerKind::final : MarkerKind::guide, out);
}

void Engine::place_marker(const Vec3d& center, MarkerKind kind, Emissions& out) {
  Marker m;
  m.id = next_marker_id_++;
  m.box = Aabbd(center, Vec3d::Constant(config_.marker_half_extent_m));
  m.kind = kind;
  m.placed_us = now_us_;
  marker_ = m;
  dwell_ = DwellState{};
  dwell_.marker_id = m.id;

  StepRecord step;
  step.marker_id = m.id;
  step.placed_us = now_us_;
  step.kind = kind;
  record_.steps.push_back(step);

  out.push_back(emit(msg::MarkerPlace{m.id, center, m.box.half_extents(), kind}));
  phase_ = Phase::awaiting_gaze;
}

void Engine::confirm_step(Emissions& out) {
  StepRecord& step = record_.steps.back();
  const std::int64_t t_i = now_us_ - step.placed_us;
  step.confirmed_us = now_us_;
  step.t_i_us = t_i;
  marker_->state = MarkerState::confirmed;
  consecutive_timeouts_ = 0;
  out.push_back(emit(msg::GazeConfirmed{marker_->id, t_i}));
  if (config_.adaptive_interval) std::tie(policy_, delta_t_ms_) = adapt_interval(policy_, t_i);

  if (shifting_) {
    step.ended_us = now_us_;
    out.push_back(emit(msg::MarkerRemove{marker_->id}));
    marker_.reset();
    shifting_ = false;
    place_plan_marker(out);
  } else if (plan_->at_last()) {
    step.ended_us = now_us_;
    out.push_back(emit(msg::MarkerRemove{marker_->id}));
    marker_.reset();
    finish(true, out);
  } else if (mode_ == Mode::confirmation_gated) {
    advance(out);
  } else {
    phase_ = Phase::advancing;
  }
}

void Engine::advance(Emissions& out) {
  record_.steps.back().ended_us = now_us_;
  ++plan_->cursor;
  const MarkerKind kind = plan_->at_last() ? MarkerKind::final : MarkerKind::guide;
  marker_->box = marker_->box.recentered(plan_->current());
  marker_->kind = kind;
  marker_->placed_us = now_us_;
  marker_->state = MarkerState::visible;
  dwell_ = DwellState{};
  dwell_.marker_id = marker_->id;

  StepRecord step;
  step.marker_id = marker_->id;
  step.placed_us = now_us_;
  step.kind = kind;
  record_.steps.push_back(step);

  out.push_back(emit(msg::MarkerMove{marker_->id, plan_->current()}));
  phase_ = Phase::awaiting_gaze;
}

void Engine::handle_timeout(Emissions& out) {
  StepRecord& step = record_.steps.back();
  const std::int64_t elapsed = now_us_ - step.placed_us;
  ++record_.timeouts;
  ++consecutive_timeouts_;

  if (consecutive_timeouts_ >= config_.max_timeouts) {
    step.ended_us = now_us_;
    out.push_back(emit(msg::MarkerRemove{marker_->id}));
    marker_.reset();
    finish(false, out);
    return;
  }

  // Re-place halfway (in angle) between the current gaze and the marker.
  record_.recovery_us += elapsed;
  Vec3d center = marker_->box.center();
  if (!track_.empty()) {
    const Rayd& gaze = track_.back().ray;
    const Vec3d to_marker = center - gaze.origin();
    const double range = to_marker.norm();
    if (range > 0.0) {
      const Vec3d marker_dir = to_marker / range;
      const double half = angular_distance(gaze.direction(), marker_dir) / 2.0;
      center = gaze.origin() + range * rotate_toward(gaze.direction(), marker_dir, half);
    }
  }
  marker_->box = marker_->box.recentered(center);
  marker_->kind = MarkerKind::pulse;
  marker_->placed_us = now_us_;
  if (plan_ && !shifting_) plan_->waypoints[plan_->cursor] = center;
  dwell_ = DwellState{};
  dwell_.marker_id = marker_->id;
  step.placed_us = now_us_;
  step.kind = MarkerKind::pulse;
  out.push_back(emit(msg::MarkerPlace{marker_->id, center, marker_->box.half_extents(), MarkerKind::pulse}));
}

void Engine::finish(bool success, Emissions& out) {
  record_.success = success;
  record_.finished = true;
  record_.total_us = now_us_ - record_.start_us;
  out.push_back(emit(msg::EpisodeDone{record_.poi_id, record_.total_us,
                                      static_cast<std::int64_t>(record_.steps.size()), record_.timeouts,
                                      success}));
  phase_ = success ? Phase::reached : Phase::timed_out;
  history_.push_back(record_);
  plan_.reset();
  target_.reset();
  shifting_ = false;
}

Emissions Engine::on_poi_detected(const std::string& id, const Vec3d& pos_robot, const std::string& label) {
  Poi poi{id, robot_to_world_.apply(pos_robot), label};
  pois_[id] = poi;
  if (config_.auto_attract && phase_ == Phase::idle && !track_.empty()) return start_attraction(poi);
  return {};
}

Emissions Engine::handle(const WireMessage& m) {
  Emissions out = on_tick(m.ts);
  auto append = [&out](Emissions more) {
    for (auto& e : more) out.push_back(std::move(e));
  };
  auto refuse = [&](const std::string& code, const std::string& what) {
    out.push_back(emit(msg::Error{code, what}));
  };
  auto start = [&](const auto& cmd, bool shift) {
    auto it = pois_.find(cmd.poi_id);
    if (it == pois_.end()) {
      refuse("unknown-poi", "no POI with id '" + cmd.poi_id + "'");
      return;
    }
    const EpisodeOptions opts{cmd.mode, cmd.delta_d_m, cmd.delta_t_ms};
    try {
      append(shift ? start_shift(it->second, opts) : start_attraction(it->second, opts));
    } catch (const EngineError& e) {
      refuse(e.code(), e.what());
    }
  };

  if (m.is<msg::Gaze>()) {
    const auto& g = m.as<msg::Gaze>();
    append(on_gaze(GazeSample{m.ts, Rayd(g.origin, g.dir)}));
  } else if (m.is<msg::PoiDetected>()) {
    const auto& p = m.as<msg::PoiDetected>();
    try {
      append(on_poi_detected(p.poi_id, p.pos_robot, p.label));
    } catch (const EngineError& e) {
      refuse(e.code(), e.what());
    }
  } else if (m.is<msg::Align>()) {
    try {
      set_alignment(align_frames<double>(m.as<msg::Align>().pairs));
    } catch (const DegenerateCorrespondences& e) {
      refuse("degenerate-align", e.what());
    }
  } else if (m.is<msg::StartAttraction>()) {
    start(m.as<msg::StartAttraction>(), false);
  } else if (m.is<msg::StartShift>()) {
    start(m.as<msg::StartShift>(), true);
  }
  return out;
}

}  // namespace gazeguide
