// gazeguide: serve | sweep | replay | align-check
//
// Exit codes: 0 ok, 1 config or input error, 2 environment error (bind),
// 3 replay divergence.

#include "gazeguide/config.hpp"
#include "gazeguide/session.hpp"
#include "gazeguide/simulation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>

using namespace gazeguide;

namespace {

enum Exit { kOk = 0, kInput = 1, kEnvironment = 2, kDivergence = 3 };

AppConfig base_config(const std::string& path) { return path.empty() ? AppConfig{} : load_config(path); }

int cmd_serve(const AppConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.net.log_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create log directory " << cfg.net.log_dir << ": " << ec.message() << '\n';
    return kEnvironment;
  }
  const auto stamp =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count();
  SessionOptions opts;
  opts.log_path = (fs::path(cfg.net.log_dir) / ("session-" + std::to_string(stamp) + ".ndjson")).string();
  opts.max_queued = cfg.net.max_queued;
  opts.max_gaze_hz = cfg.net.max_gaze_hz;

  // Signals are taken synchronously on this thread; every thread started
  // below inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<SessionHub> hub;
  try {
    hub = std::make_unique<SessionHub>(cfg.engine(), opts, cfg.experiment.world);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEnvironment;
  }
  hub->start();
  NetServer server(*hub);
  try {
    server.start(cfg.net.port, cfg.net.ws_port, cfg.net.address);
  } catch (const BindError& e) {
    std::cerr << "error: port " << e.port() << ": " << e.what() << '\n';
    hub->stop();
    return kEnvironment;
  }
  std::cout << "listening tcp=" << server.tcp_port() << " ws=" << server.ws_port() << " session=" << hub->session_id()
            << " log=" << opts.log_path << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  hub->stop();
  std::cout << "stopped on signal " << sig << "; dropped gaze samples: " << hub->dropped_gaze() << std::endl;
  return kOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& out, const SweepOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepSummary s = run_sweep(cfg, out, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("episodes: %lld\n", static_cast<long long>(s.episodes));
  std::printf("success rate: %.3f (%lld/%lld)\n", s.episodes ? double(s.successes) / double(s.episodes) : 0.0,
              static_cast<long long>(s.successes), static_cast<long long>(s.episodes));
  if (s.median_t_i_us)
    std::printf("median t_i: %.1f ms\n", *s.median_t_i_us / 1000.0);
  else
    std::printf("median t_i: n/a\n");
  std::printf("rows: %zu -> %s (%.2f s)\n", s.rows, out.c_str(), secs);
  return kOk;
}

int cmd_replay(const std::string& path, const AppConfig& cfg) {
  std::vector<std::string> lines;
  try {
    lines = read_lines(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  }
  try {
    const ReplayReport r = replay(lines, cfg.engine(), cfg.experiment.world);
    std::printf("MATCH (%zu inputs, %zu emissions)\n", r.inputs, r.emissions);
    return kOk;
  } catch (const DivergenceError& e) {
    std::printf("DIVERGENCE at line %zu: %s\n", e.line(), e.what());
    return kDivergence;
  }
}

int cmd_align_check(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << path << '\n';
    return kInput;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    const auto pairs = parse_pairs(ss.str());
    const RigidTransformd t = align_frames<double>(pairs);
    const double rms = alignment_rms<double>(t, pairs);
    const Eigen::Matrix3d r = t.rotation.toRotationMatrix();
    const Eigen::AngleAxisd aa(t.rotation);
    std::printf("pairs: %zu\n", pairs.size());
    std::printf("rotation:\n");
    for (int i = 0; i < 3; ++i) std::printf("  % .9f % .9f % .9f\n", r(i, 0), r(i, 1), r(i, 2));
    std::printf("rotation angle: %.9f deg\n", rad_to_deg(aa.angle()));
    std::printf("translation: % .9f % .9f % .9f\n", t.translation.x(), t.translation.y(), t.translation.z());
    std::printf("rms residual: %.3e m\n", rms);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const DegenerateCorrespondences& e) {
    std::cerr << "error: degenerate correspondences: " << e.what() << '\n';
    return kInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze-contingent attention guidance engine"};
  app.require_subcommand(1);

  std::string config_path;

  auto* serve = app.add_subcommand("serve", "Run the session server (NDJSON over TCP and WebSocket /ws)");
  std::optional<std::uint16_t> port, ws_port;
  std::optional<std::string> address, log_dir;
  serve->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port for NDJSON clients (0 picks a free port)");
  serve->add_option("--ws-port", ws_port, "WebSocket port, endpoint /ws (0 picks a free port)");
  serve->add_option("--address", address, "Listen address");
  serve->add_option("--log-dir", log_dir, "Directory for session logs");

  auto* sweep = app.add_subcommand("sweep", "Run the simulated delta_d x delta_t experiment grid");
  std::string out_path = "metrics.csv";
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<std::string> mode;
  std::vector<double> dd_grid;
  std::vector<std::int64_t> dt_grid;
  std::string sweep_log_dir, kinematics_path;
  unsigned threads = 0;
  sweep->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  sweep->add_option("--out,-o", out_path, "Metrics CSV output path")->capture_default_str();
  sweep->add_option("--seed", seed, "Base seed; episode k uses seed + k");
  sweep->add_option("--episodes", episodes, "Episodes per grid cell");
  sweep->add_option("--mode", mode, "confirmation_gated or scheduled");
  sweep->add_option("--delta-d", dd_grid, "Marker spacing grid in meters");
  sweep->add_option("--delta-t", dt_grid, "Marker interval grid in ms");
  sweep->add_option("--log-dir", sweep_log_dir, "Write one session log per episode here");
  sweep->add_option("--kinematics", kinematics_path, "Write the gaze-point velocity series to this CSV");
  sweep->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  auto* rep = app.add_subcommand("replay", "Re-run a session log and compare engine emissions");
  std::string log_path;
  rep->add_option("log", log_path, "NDJSON session log")->required();
  rep->add_option("--config", config_path, "JSON config file the session ran with")->check(CLI::ExistingFile);

  auto* align = app.add_subcommand("align-check", "Recover the robot-to-world transform from point pairs");
  std::string pairs_path;
  align->add_option("pairs", pairs_path, "JSON file {\"pairs\": [[[rx,ry,rz],[wx,wy,wz]], ...]}")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*serve) {
      AppConfig cfg = base_config(config_path);
      if (port) cfg.net.port = *port;
      if (ws_port) cfg.net.ws_port = *ws_port;
      if (address) cfg.net.address = *address;
      if (log_dir) cfg.net.log_dir = *log_dir;
      return cmd_serve(cfg);
    }
    if (*sweep) {
      AppConfig cfg = base_config(config_path);
      ExperimentConfig& x = cfg.experiment;
      if (seed) x.agent.seed = *seed;
      if (episodes) x.episodes_per_cell = *episodes;
      if (mode) {
        auto m = parse_mode(*mode);
        if (!m) throw ConfigError("unknown mode '" + *mode + "'");
        x.mode = *m;
      }
      if (!dd_grid.empty()) x.delta_d_grid = dd_grid;
      if (!dt_grid.empty()) x.delta_t_grid = dt_grid;
      x.validate();
      SweepOptions opts{sweep_log_dir, kinematics_path, threads};
      return cmd_sweep(x, out_path, opts);
    }
    if (*rep) return cmd_replay(log_path, base_config(config_path));
    if (*align) return cmd_align_check(pairs_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  }
  return kOk;
}
