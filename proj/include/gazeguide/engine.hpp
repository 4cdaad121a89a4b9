#ifndef GAZEGUIDE_ENGINE_HPP
#define GAZEGUIDE_ENGINE_HPP

// The attention engine: plans marker chains toward points of interest,
// confirms each marker by gaze dwell and advances the chain, recording the
// per-marker acquisition time t_i. Time is injected by the caller; the
// engine never reads a clock.

#include "gazeguide/gaze.hpp"
#include "gazeguide/geometry.hpp"
#include "gazeguide/protocol.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gazeguide {

struct Poi {
  std::string id;
  Vec3d position = Vec3d::Zero();
  std::string label;
};

enum class MarkerState { visible, confirmed, removed };
enum class Phase { idle, awaiting_gaze, advancing, reached, timed_out };

std::string_view to_string(Phase p);

struct Marker {
  std::uint64_t id = 0;
  Aabbd box{Vec3d::Zero(), Vec3d::Constant(0.15)};
  MarkerKind kind = MarkerKind::guide;
  std::int64_t placed_us = 0;
  MarkerState state = MarkerState::visible;
};

class DegeneratePlan : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Markers spaced at most delta_d_m apart from the gaze anchor to a POI.
struct AttractionPlan {
  std::string poi_id;
  Vec3d anchor = Vec3d::Zero();
  std::vector<Vec3d> waypoints;
  double delta_d_m = 1.0;
  std::size_t cursor = 0;

  bool at_last() const { return cursor + 1 >= waypoints.size(); }
  const Vec3d& current() const { return waypoints.at(cursor); }
};

/// Anchors at the gaze point at POI range (pulled into the view when
/// outside it) and walks toward the POI in steps of delta_d_m; the last
/// waypoint is the POI itself. Throws DegeneratePlan when the anchor
/// already coincides with the POI.
AttractionPlan plan_chain(const Rayd& gaze, const Frustumd& frustum, const Poi& poi, double delta_d_m);

/// Clamped EWMA of observed acquisition times, scaled by beta.
struct IntervalPolicy {
  std::int64_t delta_t_min_ms = 200;
  std::int64_t delta_t_max_ms = 3000;
  double ewma_alpha = 0.5;
  double beta = 1.2;
  std::optional<std::int64_t> ewma_us;
};

std::pair<IntervalPolicy, std::int64_t> adapt_interval(IntervalPolicy policy, std::int64_t t_i_us);

struct StepRecord {
  std::uint64_t marker_id = 0;
  std::int64_t placed_us = 0;
  std::optional<std::int64_t> confirmed_us;
  std::optional<std::int64_t> t_i_us;
  std::int64_t ended_us = 0;
  MarkerKind kind = MarkerKind::guide;
};

struct EpisodeRecord {
  std::string poi_id;
  Mode mode = Mode::confirmation_gated;
  std::vector<StepRecord> steps;
  std::int64_t timeouts = 0;
  std::int64_t start_us = 0;
  std::int64_t recovery_us = 0;
  std::int64_t total_us = 0;
  bool success = false;
  bool finished = false;
};

struct EngineConfig {
  int dwell_ms = 250;
  int gap_tolerance_ms = 50;
  int timeout_ms = 5000;
  int max_timeouts = 3;
  double delta_d_m = 1.0;
  std::int64_t delta_t_ms = 1000;
  std::int64_t delta_t_min_ms = 200;
  std::int64_t delta_t_max_ms = 3000;
  double ewma_alpha = 0.5;
  double beta = 1.2;
  bool adaptive_interval = true;
  double marker_half_extent_m = 0.15;
  double eccentricity_deg = 8.0;
  Mode mode = Mode::confirmation_gated;
  double hfov_deg = 43.0;
  double vfov_deg = 29.0;
  int head_lag_tau_ms = 300;
  double default_depth_m = kDefaultReferenceDepthM;
  std::size_t track_capacity = 512;
  int fixation_window_ms = 150;
  double fixation_threshold_deg = 1.5;
  int fixation_recency_ms = 100;
  bool smoothing = false;
  bool auto_attract = false;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

/// Refusal of a command; `code` is the wire ERROR code.
class EngineError : public std::runtime_error {
 public:
  EngineError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// Per-episode overrides of the configured defaults.
struct EpisodeOptions {
  std::optional<Mode> mode;
  std::optional<double> delta_d_m;
  std::optional<std::int64_t> delta_t_ms;
};

using Emissions = std::vector<WireMessage>;

class Engine {
 public:
  explicit Engine(EngineConfig config = {});

  /// Advances engine time and applies schedule and timeout rules.
  Emissions on_tick(std::int64_t now_us);
  /// Records a gaze sample; while a marker is shown, updates its dwell.
  Emissions on_gaze(const GazeSample& s);

  Emissions start_attraction(const Poi& poi, const EpisodeOptions& opts = {});
  /// Places a distractor next to the current fixation; when it is
  /// confirmed the engine chains into an attraction toward `poi`.
  Emissions start_shift(const Poi& poi, const EpisodeOptions& opts = {},
                        std::optional<FixationEvent> fixation = std::nullopt);

  void set_alignment(const RigidTransformd& robot_to_world) { robot_to_world_ = robot_to_world; }
  const RigidTransformd& alignment() const { return robot_to_world_; }
  /// Registers (or moves) a POI reported in the robot frame.
  Emissions on_poi_detected(const std::string& id, const Vec3d& pos_robot, const std::string& label);
  void add_poi(const Poi& poi) { pois_[poi.id] = poi; }
  const std::map<std::string, Poi>& pois() const { return pois_; }

  /// Ticks to `m.ts`, then dispatches an inbound message. Refused commands
  /// come back as an ERROR message addressed to the sender.
  Emissions handle(const WireMessage& m);

  Phase phase() const { return phase_; }
  std::int64_t now() const { return now_us_; }
  const EngineConfig& config() const { return config_; }
  const std::optional<AttractionPlan>& active_plan() const { return plan_; }
  const std::optional<Marker>& active_marker() const { return marker_; }
  const DwellState& dwell() const { return dwell_; }
  const EpisodeRecord& record() const { return record_; }
  const std::vector<EpisodeRecord>& history() const { return history_; }
  const IntervalPolicy& policy() const { return policy_; }
  std::int64_t current_delta_t_ms() const { return delta_t_ms_; }
  const GazeTrack& track() const { return track_; }
  std::optional<GazeKinematics> kinematics() const;
  std::optional<Frustumd> view() const;
  std::int64_t emitted_count() const { return seq_; }

 private:
  WireMessage emit(Payload p);
  void begin_episode(const std::string& poi_id, const EpisodeOptions& opts);
  void place_plan_marker(Emissions& out);
  void place_marker(const Vec3d& center, MarkerKind kind, Emissions& out);
  void confirm_step(Emissions& out);
  void advance(Emissions& out);
  void finish(bool success, Emissions& out);
  void handle_timeout(Emissions& out);
  const GazeSample& latest_gaze() const;
  Frustumd view_or_throw() const;

  EngineConfig config_;
  Phase phase_ = Phase::idle;
  std::int64_t now_us_ = 0;
  std::int64_t seq_ = 0;
  std::uint64_t next_marker_id_ = 1;

  GazeTrack track_;
  std::optional<Vec3d> head_forward_;
  RigidTransformd robot_to_world_;
  std::map<std::string, Poi> pois_;

  // Active episode.
  Mode mode_ = Mode::confirmation_gated;
  double delta_d_m_ = 1.0;
  std::int64_t delta_t_ms_ = 1000;
  std::optional<Poi> target_;
  bool shifting_ = false;
  std::optional<AttractionPlan> plan_;
  std::optional<Marker> marker_;
  DwellState dwell_;
  int consecutive_timeouts_ = 0;
  IntervalPolicy policy_;
  EpisodeRecord record_;
  std::vector<EpisodeRecord> history_;
};

}  // namespace gazeguide

#endif  // GAZEGUIDE_ENGINE_HPP
