#ifndef GAZEGUIDE_SIMULATION_HPP
#define GAZEGUIDE_SIMULATION_HPP

// Deterministic stand-ins for the headset wearer and the robot, wired to an
// in-process engine on a simulated clock.

#include "gazeguide/engine.hpp"
#include "gazeguide/protocol.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazeguide {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentParams {
  int latency_ms = 200;
  double saccade_speed_dps = 300.0;
  double jitter_sigma_deg = 0.5;
  double fov_h_deg = 43.0;
  double fov_v_deg = 29.0;
  int head_lag_tau_ms = 300;
  int sample_hz = 60;
  std::uint64_t seed = 1;
  Vec3d eye = Vec3d(0.0, 1.6, 0.0);
  Vec3d initial_dir = Vec3d::UnitZ();

  std::int64_t sample_period_us() const { return 1'000'000 / sample_hz; }
  void validate() const;
};

struct VisibleMarker {
  std::uint64_t id = 0;
  Vec3d center = Vec3d::Zero();
  std::int64_t placed_us = 0;
};

/// Constant-speed saccades toward a visible marker after a reaction
/// latency, Gaussian angular jitter, and a head that lags the gaze.
class GazeAgent {
 public:
  explicit GazeAgent(const AgentParams& params);

  /// Advances the clock by dt_us and returns the emitted sample.
  GazeSample step(const std::optional<VisibleMarker>& marker, std::int64_t dt_us);

  const Vec3d& true_direction() const { return gaze_dir_; }
  std::optional<Frustumd> frustum() const;
  std::int64_t now_us() const { return now_us_; }

 private:
  double gaussian();

  AgentParams params_;
  std::mt19937_64 rng_;
  std::int64_t now_us_ = 0;
  Vec3d gaze_dir_;
  std::optional<Vec3d> head_forward_;
};

struct ExperimentConfig {
  std::vector<double> delta_d_grid{0.5, 1.0};
  std::vector<std::int64_t> delta_t_grid{500, 1000};
  int episodes_per_cell = 10;
  Mode mode = Mode::confirmation_gated;
  std::vector<Poi> world{{"poi-1", Vec3d(1.8, 1.3, 5.0), "crate"}, {"poi-2", Vec3d(-1.5, 2.0, 4.5), "doorway"}};
  AgentParams agent;
  EngineConfig engine;
  /// Ground-truth robot-to-world transform used to fabricate robot reports.
  RigidTransformd robot_pose{Eigen::Quaterniond(Eigen::AngleAxisd(deg_to_rad(30.0), Vec3d::UnitY())),
                             Vec3d(2.0, 0.0, -1.0)};
  int alignment_points = 6;
  std::int64_t max_episode_us = 120'000'000;

  void validate() const;
};

struct MetricsRow {
  std::int64_t episode_id = 0;
  std::string poi_id;
  double delta_d_m = 0.0;
  std::int64_t delta_t_ms = 0;
  Mode mode = Mode::confirmation_gated;
  std::size_t step_index = 0;
  std::uint64_t marker_id = 0;
  std::optional<std::int64_t> t_i_us;
  std::int64_t cumulative_us = 0;
  std::int64_t timeouts = 0;
  double scanpath_len_deg = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const MetricsRow&) const = default;
};

/// Which grid cell an episode belongs to.
struct CellParams {
  std::int64_t episode_id = 0;
  double delta_d_m = 1.0;
  std::int64_t delta_t_ms = 1000;
};

struct EpisodeResult {
  EpisodeRecord record;
  std::vector<MetricsRow> rows;
  /// Exact wire lines in engine order, both directions.
  std::vector<std::string> log;
  std::vector<GazeKinematics> kinematics;
  std::vector<Vec3d> gaze_dirs;
  std::vector<Vec3d> marker_positions;
  std::int64_t confirmations = 0;
  double scanpath_len_deg = 0.0;
};

EpisodeResult run_episode(const ExperimentConfig& cfg, const Poi& poi, std::uint64_t seed, const CellParams& cell);

/// Convenience overload using the first grid cell.
EpisodeResult run_episode(const ExperimentConfig& cfg, const Poi& poi, std::uint64_t seed);

inline constexpr const char* kMetricsHeader =
    "episode_id,poi_id,delta_d_m,delta_t_ms,mode,step_index,marker_id,t_i_us,cumulative_us,timeouts,"
    "scanpath_len_deg,seed";

std::string format_csv_row(const MetricsRow& row);

struct SweepOptions {
  /// Directory for one NDJSON session log per episode; empty for none.
  std::string log_dir;
  /// Optional CSV of the G(t) speed series; empty for none.
  std::string kinematics_path;
  unsigned threads = 0;
};

struct SweepSummary {
  std::int64_t episodes = 0;
  std::int64_t successes = 0;
  std::size_t rows = 0;
  std::optional<double> median_t_i_us;
  std::vector<std::int64_t> steps_per_episode;
};

/// Runs every (delta_d, delta_t, episode) cell and writes the metrics CSV
/// in cell-major, episode, step order. Partial output is removed on error.
SweepSummary run_sweep(const ExperimentConfig& cfg, const std::string& out_path, const SweepOptions& options = {});

/// Replay of a session log diverged from the logged emissions.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t line, const std::string& what) : std::runtime_error(what), line_(line) {}
  /// 1-based line number in the log.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ReplayReport {
  std::size_t lines = 0;
  std::size_t inputs = 0;
  std::size_t emissions = 0;
};

/// Feeds the logged engine inputs into a fresh engine and checks that its
/// emissions match the logged ones byte for byte. Handshake and
/// session-layer lines are skipped.
ReplayReport replay(const std::vector<std::string>& lines, const EngineConfig& cfg = {},
                    const std::vector<Poi>& world = {});

std::vector<std::string> read_lines(const std::string& path);

}  // namespace gazeguide

#endif  // GAZEGUIDE_SIMULATION_HPP
