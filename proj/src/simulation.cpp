#include "gazeguide/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <atomic>
#include <future>
#include <thread>

namespace gazeguide {

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& field) {
    if (!ok) throw ConfigError("invalid experiment." + field);
  };
  check(!delta_d_grid.empty(), "delta_d_grid (empty)");
  for (double d : delta_d_grid) check(std::isfinite(d) && d > 0.0, "delta_d_grid");
  check(!delta_t_grid.empty(), "delta_t_grid (empty)");
  for (std::int64_t t : delta_t_grid) check(t > 0, "delta_t_grid");
  check(episodes_per_cell > 0, "episodes_per_cell");
  check(!world.empty(), "world (empty)");
  for (const Poi& p : world) check(!p.id.empty() && all_finite(p.position), "world");
  check(alignment_points >= 3, "alignment_points");
  check(max_episode_us > 0, "max_episode_us");
  check(all_finite(robot_pose.translation) && std::abs(robot_pose.rotation.norm() - 1.0) < 1e-9, "robot_pose");
  agent.validate();
  try {
    engine.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// Drives one engine the way the server would: every line is encoded,
// logged, decoded again and handed to the engine in order.
class Harness {
 public:
  Harness(const ExperimentConfig& cfg, std::uint64_t seed) : engine_(cfg.engine), agent_(agent_params(cfg, seed)) {}

  void send(Payload p, std::int64_t& seq, std::int64_t ts) {
    WireMessage m;
    m.seq = seq++;
    m.ts = ts;
    m.payload = std::move(p);
    const std::string line = encode(m);
    result.log.push_back(line);
    if (!is_engine_input(m)) return;
    for (const WireMessage& e : engine_.handle(decode(line))) observe(e);
  }

  void observe(const WireMessage& e) {
    result.log.push_back(encode(e));
    if (e.is<msg::MarkerPlace>()) {
      const auto& p = e.as<msg::MarkerPlace>();
      marker_ = VisibleMarker{p.marker_id, p.pos, e.ts};
      result.marker_positions.push_back(p.pos);
    } else if (e.is<msg::MarkerMove>()) {
      const auto& p = e.as<msg::MarkerMove>();
      marker_ = VisibleMarker{p.marker_id, p.pos, e.ts};
      result.marker_positions.push_back(p.pos);
    } else if (e.is<msg::MarkerRemove>()) {
      marker_.reset();
    } else if (e.is<msg::GazeConfirmed>()) {
      ++result.confirmations;
    } else if (e.is<msg::EpisodeDone>()) {
      done_ = true;
    }
  }

  static AgentParams agent_params(const ExperimentConfig& cfg, std::uint64_t seed) {
    AgentParams p = cfg.agent;
    p.seed = seed;
    return p;
  }

  Engine engine_;
  GazeAgent agent_;
  std::optional<VisibleMarker> marker_;
  bool done_ = false;
  EpisodeResult result;
};

}  // namespace

std::string format_csv_row(const MetricsRow& r) {
  std::string out;
  out += std::to_string(r.episode_id) + ',' + r.poi_id + ',' + format_double(r.delta_d_m) + ',' +
         std::to_string(r.delta_t_ms) + ',' + std::string(to_string(r.mode)) + ',' + std::to_string(r.step_index) +
         ',' + std::to_string(r.marker_id) + ',' + (r.t_i_us ? std::to_string(*r.t_i_us) : std::string()) + ',' +
         std::to_string(r.cumulative_us) + ',' + std::to_string(r.timeouts) + ',' +
         format_double(r.scanpath_len_deg) + ',' + std::to_string(r.seed);
  return out;
}

EpisodeResult run_episode(const ExperimentConfig& cfg, const Poi& poi, std::uint64_t seed, const CellParams& cell) {
  Harness h(cfg, seed);
  const std::int64_t dt = cfg.agent.sample_period_us();
  std::int64_t robot_seq = 0, headset_seq = 0, observer_seq = 0;

  h.send(msg::Hello{Role::robot}, robot_seq, 0);
  h.send(msg::Hello{Role::headset}, headset_seq, 0);
  h.send(msg::Hello{Role::observer}, observer_seq, 0);

  // Correspondences from the ground-truth pose, points spread around the room.
  const RigidTransformd world_to_robot = cfg.robot_pose.inverse();
  std::mt19937_64 layout(seed ^ 0x9e3779b97f4a7c15ULL);
  msg::Align align;
  for (int i = 0; i < cfg.alignment_points; ++i) {
    Vec3d w;
    for (int k = 0; k < 3; ++k) w[k] = static_cast<double>(layout() % 10001) / 1000.0 - 5.0;
    align.pairs.emplace_back(world_to_robot.apply(w), w);
  }
  h.send(std::move(align), robot_seq, 0);
  h.send(msg::PoiDetected{poi.id, world_to_robot.apply(poi.position), poi.label}, robot_seq, 0);

  auto sample = [&] {
    const GazeSample s = h.agent_.step(h.marker_, dt);
    h.send(msg::Gaze{s.ray.origin(), s.ray.direction()}, headset_seq, s.ts_us);
    if (!h.result.gaze_dirs.empty())
      h.result.scanpath_len_deg += angular_distance(h.result.gaze_dirs.back(), s.ray.direction());
    h.result.gaze_dirs.push_back(s.ray.direction());
    if (auto k = h.engine_.kinematics()) h.result.kinematics.push_back(*k);
    return s.ts_us;
  };

  std::int64_t now = sample();
  h.send(msg::StartAttraction{poi.id, cfg.mode, cell.delta_d_m, cell.delta_t_ms}, observer_seq, now);
  const std::int64_t start_us = now;
  while (!h.done_ && now - start_us < cfg.max_episode_us) now = sample();

  EpisodeResult result = std::move(h.result);
  const Engine& engine = h.engine_;
  if (!engine.history().empty()) {
    result.record = engine.history().back();
  } else {
    result.record = engine.record();
  }
  const EpisodeRecord& rec = result.record;
  for (std::size_t i = 0; i < rec.steps.size(); ++i) {
    const StepRecord& s = rec.steps[i];
    MetricsRow row;
    row.episode_id = cell.episode_id;
    row.poi_id = poi.id;
    row.delta_d_m = cell.delta_d_m;
    row.delta_t_ms = cell.delta_t_ms;
    row.mode = cfg.mode;
    row.step_index = i;
    row.marker_id = s.marker_id;
    row.t_i_us = s.t_i_us;
    row.cumulative_us = (s.ended_us != 0 ? s.ended_us : engine.now()) - rec.start_us;
    row.timeouts = rec.timeouts;
    row.scanpath_len_deg = result.scanpath_len_deg;
    row.seed = seed;
    result.rows.push_back(std::move(row));
  }
  return result;
}

EpisodeResult run_episode(const ExperimentConfig& cfg, const Poi& poi, std::uint64_t seed) {
  CellParams cell;
  cell.delta_d_m = cfg.delta_d_grid.front();
  cell.delta_t_ms = cfg.delta_t_grid.front();
  return run_episode(cfg, poi, seed, cell);
}

namespace {

struct Job {
  CellParams cell;
  const Poi* poi = nullptr;
  std::uint64_t seed = 0;
};

}  // namespace

SweepSummary run_sweep(const ExperimentConfig& cfg, const std::string& out_path, const SweepOptions& options) {
  cfg.validate();
  namespace fs = std::filesystem;

  std::vector<Job> jobs;
  std::int64_t episode_id = 0;
  for (double dd : cfg.delta_d_grid) {
    for (std::int64_t dt : cfg.delta_t_grid) {
      for (int e = 0; e < cfg.episodes_per_cell; ++e) {
        Job j;
        j.cell = CellParams{episode_id, dd, dt};
        j.poi = &cfg.world[static_cast<std::size_t>(e) % cfg.world.size()];
        j.seed = cfg.agent.seed + static_cast<std::uint64_t>(episode_id);
        jobs.push_back(j);
        ++episode_id;
      }
    }
  }

  std::vector<EpisodeResult> results(jobs.size());
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      results[i] = run_episode(cfg, *jobs[i].poi, jobs[i].seed, jobs[i].cell);
  };
  std::vector<std::future<void>> pool;
  for (unsigned t = 1; t < threads; ++t) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();

  const fs::path out(out_path);
  const fs::path tmp = out.string() + ".part";
  std::vector<fs::path> written;
  try {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream csv(tmp, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + tmp.string());
    csv << kMetricsHeader << '\n';
    for (const auto& r : results)
      for (const auto& row : r.rows) csv << format_csv_row(row) << '\n';
    csv.close();
    if (!csv) throw std::runtime_error("failed writing " + tmp.string());

    if (!options.kinematics_path.empty()) {
      const fs::path kpath(options.kinematics_path);
      if (kpath.has_parent_path()) fs::create_directories(kpath.parent_path());
      std::ofstream k(kpath, std::ios::binary | std::ios::trunc);
      if (!k) throw std::runtime_error("cannot write " + kpath.string());
      written.push_back(kpath);
      k << "episode_id,ts_us,vx,vy,vz,speed_mps\n";
      for (std::size_t i = 0; i < results.size(); ++i)
        for (const auto& g : results[i].kinematics)
          k << jobs[i].cell.episode_id << ',' << g.ts_us << ',' << format_double(g.velocity.x()) << ','
            << format_double(g.velocity.y()) << ',' << format_double(g.velocity.z()) << ','
            << format_double(g.speed) << '\n';
      if (!k) throw std::runtime_error("failed writing " + kpath.string());
    }

    if (!options.log_dir.empty()) {
      fs::create_directories(options.log_dir);
      for (std::size_t i = 0; i < results.size(); ++i) {
        const fs::path p = fs::path(options.log_dir) / ("episode-" + std::to_string(jobs[i].cell.episode_id) + ".ndjson");
        std::ofstream log(p, std::ios::binary | std::ios::trunc);
        if (!log) throw std::runtime_error("cannot write " + p.string());
        written.push_back(p);
        for (const auto& line : results[i].log) log << line;
        if (!log) throw std::runtime_error("failed writing " + p.string());
      }
    }
    fs::rename(tmp, out);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }

  SweepSummary summary;
  std::vector<std::int64_t> t_i;
  for (const auto& r : results) {
    ++summary.episodes;
    if (r.record.success) ++summary.successes;
    summary.rows += r.rows.size();
    summary.steps_per_episode.push_back(static_cast<std::int64_t>(r.record.steps.size()));
    for (const auto& row : r.rows)
      if (row.t_i_us) t_i.push_back(*row.t_i_us);
  }
  if (!t_i.empty()) {
    std::sort(t_i.begin(), t_i.end());
    const std::size_t n = t_i.size();
    summary.median_t_i_us =
        n % 2 ? static_cast<double>(t_i[n / 2]) : 0.5 * static_cast<double>(t_i[n / 2 - 1] + t_i[n / 2]);
  }
  return summary;
}

}  // namespace gazeguide
