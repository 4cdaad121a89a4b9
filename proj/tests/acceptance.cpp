// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include "fuzz.hpp"
#include "gazeguide/engine.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/geometry.hpp"
#include "gazeguide/protocol.hpp"
#include "gazeguide/simulation.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using namespace gazeguide;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict raycast() {
  std::mt19937_64 rng(1001);
  struct Case {
    Rayd ray;
    Aabbd box;
  };
  std::vector<Case> cases;
  for (int n = 0; n < 10000; ++n) {
    const Aabbd box(oracle::uniform_vec(rng, -2, 2), oracle::uniform_vec(rng, 0.05, 0.5));
    const Vec3d o = oracle::uniform_vec(rng, -2, 2);
    const Vec3d aim = box.center() + oracle::uniform_vec(rng, -1.5, 1.5).cwiseProduct(box.half_extents());
    const Vec3d dir = n % 4 == 0 ? oracle::random_unit(rng) : Vec3d((aim - o).normalized());
    cases.push_back({Rayd(o, dir), box});
  }
  const auto t0 = Clock::now();
  std::vector<std::optional<double>> got;
  got.reserve(cases.size());
  for (const auto& c : cases) got.push_back(ray_aabb_intersect(c.ray, c.box));
  const double elapsed = seconds_since(t0);

  int disagree = 0, hits = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto m = oracle::march_ray_box(cases[i].ray.origin(), cases[i].ray.direction(), cases[i].box);
    if (m.has_value() != got[i].has_value()) {
      ++disagree;
      continue;
    }
    if (m) {
      ++hits;
      worst = std::max(worst, std::abs(*m - *got[i]));
    }
  }
  return {disagree == 0 && worst <= 1e-3 && elapsed < 5.0,
          fmt("10000 cases, %d hits, %d disagreements, max |dt| %.2e, %.3f s", hits, disagree, worst, elapsed)};
}

double rms(const RigidTransformd& t, const std::vector<std::pair<Vec3d, Vec3d>>& pairs) {
  double ss = 0.0;
  for (const auto& [r, w] : pairs) ss += (t.rotation * r + t.translation - w).squaredNorm();
  return std::sqrt(ss / static_cast<double>(pairs.size()));
}

Verdict alignment() {
  std::mt19937_64 rng(1002);
  std::normal_distribution<double> noise(0.0, 0.01);
  double worst_clean = 0.0, worst_noisy = 0.0;
  for (int n = 0; n < 100; ++n) {
    const RigidTransformd truth{oracle::random_rotation(rng), oracle::uniform_vec(rng, -10, 10)};
    std::vector<std::pair<Vec3d, Vec3d>> clean, noisy;
    for (int k = 0; k < 10; ++k) {
      const Vec3d r = oracle::uniform_vec(rng, -5, 5);
      const Vec3d w = truth.rotation * r + truth.translation;
      clean.emplace_back(r, w);
      noisy.emplace_back(r, w + Vec3d(noise(rng), noise(rng), noise(rng)));
    }
    worst_clean = std::max(worst_clean, rms(align_frames<double>(clean), clean));
    worst_noisy = std::max(worst_noisy, rms(align_frames<double>(noisy), noisy));
  }
  return {worst_clean < 1e-9 && worst_noisy <= 0.03,
          fmt("100 transforms x 10 points, max rms noiseless %.2e m, sigma 0.01 %.4f m", worst_clean, worst_noisy)};
}

GazeSample sample(std::int64_t ts, const Vec3d& origin) { return GazeSample{ts, Rayd(origin, Vec3d::UnitZ())}; }

Verdict kinematics() {
  std::mt19937_64 rng(1003);
  double worst_linear = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3d a = oracle::uniform_vec(rng, -2, 2), b = oracle::uniform_vec(rng, -3, 3);
    GazeTrack track;
    std::int64_t ts = 0;
    for (int i = 0; i < 30; ++i) {
      ts += 1000 + static_cast<std::int64_t>(rng() % 40000);
      track.push_sample(sample(ts, a + b * (ts * 1e-6)));
      if (track.size() >= 3) worst_linear = std::max(worst_linear, (estimate_kinematics(track).velocity - b).norm());
    }
  }
  GazeTrack track;
  double worst_sine = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double t = i * 0.01;
    track.push_sample(sample(i * 10000, Vec3d(std::sin(2 * M_PI * t), 0, 0)));
    if (track.size() < 5) continue;
    const auto k = estimate_kinematics(track);
    const double tk = k.ts_us * 1e-6;
    const Vec3d truth(2 * M_PI * std::cos(2 * M_PI * tk), 0, 0);
    worst_sine = std::max(worst_sine, (k.velocity - truth).norm());
  }
  return {worst_linear <= 1e-6 && worst_sine <= 2e-3,
          fmt("linear max error %.2e m/s, 1 Hz sinusoid at 100 Hz max error %.2e m/s", worst_linear, worst_sine)};
}

Verdict dwell() {
  std::mt19937_64 rng(1004);
  const Aabbd box(Vec3d(0, 0, 5), Vec3d::Constant(0.15));
  const Vec3d hit(0, 0, 1), miss = Vec3d(1, 0, 5).normalized();
  int mismatches = 0, confirmed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<oracle::HitEvent> ev;
    std::int64_t ts = static_cast<std::int64_t>(rng() % 1000);
    bool h = rng() % 2;
    const int n = 20 + static_cast<int>(rng() % 100);
    for (int i = 0; i < n; ++i) {
      ts += 2000 + static_cast<std::int64_t>(rng() % 30000);
      if (rng() % 100 < 25) h = !h;
      ev.push_back({ts, h});
    }
    const int dwell_ms = 50 + static_cast<int>(rng() % 300);
    const int gap_ms = static_cast<int>(rng() % 80);
    DwellState st;
    std::optional<std::size_t> got;
    for (std::size_t k = 0; k < ev.size(); ++k) {
      st = update_dwell(st, GazeSample{ev[k].ts_us, Rayd(Vec3d::Zero(), ev[k].hit ? hit : miss)}, box, dwell_ms,
                        gap_ms);
      if (st.confirmed && !got) got = k;
    }
    const auto want = oracle::dwell_interval_scan(ev, dwell_ms * 1000LL, gap_ms * 1000LL);
    if (got != want) ++mismatches;
    if (want) ++confirmed;
  }
  return {mismatches == 0, fmt("1000 sequences (%d confirming), %d mismatches", confirmed, mismatches)};
}

ExperimentConfig still_config() {
  ExperimentConfig cfg;
  cfg.agent.jitter_sigma_deg = 0.0;
  return cfg;
}

Verdict marker_sequence() {
  const ExperimentConfig cfg = still_config();
  int episodes = 0, failures = 0;
  std::int64_t min_ti = std::numeric_limits<std::int64_t>::max();
  for (const Poi& poi : cfg.world) {
    for (double dd : {0.3, 0.5, 1.0, 2.5}) {
      ++episodes;
      const auto r = run_episode(cfg, poi, 1, CellParams{0, dd, 1000});
      const Vec3d anchor = oracle::in_view_anchor(cfg.agent.eye, cfg.agent.initial_dir, poi.position);
      const auto n = static_cast<std::int64_t>(std::ceil((poi.position - anchor).norm() / dd));
      bool ok = static_cast<std::int64_t>(r.marker_positions.size()) == n && r.confirmations == n &&
                r.record.success;
      for (const auto& s : r.record.steps) {
        if (!s.t_i_us) {
          ok = false;
          continue;
        }
        min_ti = std::min(min_ti, *s.t_i_us);
        if (*s.t_i_us < cfg.engine.dwell_ms * 1000) ok = false;
      }
      if (!ok) ++failures;
    }
  }
  return {failures == 0, fmt("%d episodes, %d off the expected sequence, min t_i %lld us", episodes, failures,
                             static_cast<long long>(min_ti))};
}

Verdict sweep_law() {
  ExperimentConfig cfg = still_config();
  cfg.delta_d_grid = {0.3, 0.5, 0.8, 1.3};
  cfg.delta_t_grid = {1000};
  cfg.episodes_per_cell = 2;
  const fs::path dir = fs::temp_directory_path() / ("gazeguide-acceptance-law-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto s = run_sweep(cfg, (dir / "m.csv").string(), SweepOptions{{}, {}, 1});
  fs::remove_all(dir);
  int bad = 0;
  std::size_t k = 0;
  std::string steps;
  for (double dd : cfg.delta_d_grid) {
    for (int e = 0; e < cfg.episodes_per_cell; ++e, ++k) {
      const Poi& poi = cfg.world[static_cast<std::size_t>(e) % cfg.world.size()];
      const Vec3d anchor = oracle::in_view_anchor(cfg.agent.eye, cfg.agent.initial_dir, poi.position);
      const auto want = static_cast<std::int64_t>(oracle::expected_steps((poi.position - anchor).norm(), dd));
      if (k >= s.steps_per_episode.size() || s.steps_per_episode[k] != want) ++bad;
      if (k < s.steps_per_episode.size()) steps += std::to_string(s.steps_per_episode[k]) + " ";
    }
  }
  return {bad == 0 && s.successes == s.episodes,
          fmt("delta_d {0.3,0.5,0.8,1.3} x 2 episodes, steps %s, %d mismatches", steps.c_str(), bad)};
}

Verdict adaptive_interval() {
  std::mt19937_64 rng(1007);
  IntervalPolicy defaults;
  std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = 0;
  int oracle_mismatch = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    IntervalPolicy p;
    double ewma = -1.0;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      std::int64_t t_i = static_cast<std::int64_t>(rng() % 10'000'001);
      if (rng() % 4 == 0) t_i = static_cast<std::int64_t>(rng() % 200'000);
      auto [next_p, dt] = adapt_interval(p, t_i);
      p = next_p;
      lo = std::min(lo, dt);
      hi = std::max(hi, dt);
      ewma = ewma < 0 ? static_cast<double>(t_i) : 0.5 * static_cast<double>(t_i) + 0.5 * ewma;
      const double want = std::clamp(1.2 * ewma / 1000.0, 200.0, 3000.0);
      if (std::abs(static_cast<double>(dt) - want) > 1.0) ++oracle_mismatch;
    }
  }
  auto [p1, d1] = adapt_interval(defaults, 400'000);
  auto [p2, d2] = adapt_interval(p1, 400'000);
  (void)d1;
  (void)p2;
  return {lo >= 200 && hi <= 3000 && d2 == 480 && oracle_mismatch == 0,
          fmt("1000 sequences, delta_t range [%lld, %lld] ms, %d off the EWMA oracle, (400, 400 ms) -> %lld ms",
              static_cast<long long>(lo), static_cast<long long>(hi), oracle_mismatch, static_cast<long long>(d2))};
}

Verdict protocol_roundtrip() {
  fuzz::MessageFuzzer fuzz(1008);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const WireMessage m = fuzz.message();
    try {
      const std::string line = encode(m);
      const WireMessage back = decode(line);
      if (!(back == m) || encode(back) != line || line.find('\n') != line.size() - 1) ++bad;
    } catch (const std::exception&) {
      ++bad;
    }
  }
  ExperimentConfig cfg;
  int logs = 0, diverged = 0;
  std::size_t emissions = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    cfg.mode = seed % 3 == 0 ? Mode::scheduled : Mode::confirmation_gated;
    cfg.agent.jitter_sigma_deg = seed % 4 == 0 ? 0.0 : 0.5;
    const double dd = seed % 2 ? 0.5 : 1.0;
    const std::int64_t dt = seed % 3 == 1 ? 500 : 1000;
    const auto r = run_episode(cfg, cfg.world[seed % cfg.world.size()], seed, CellParams{0, dd, dt});
    ++logs;
    try {
      emissions += replay(r.log, cfg.engine).emissions;
    } catch (const DivergenceError&) {
      ++diverged;
    }
  }
  return {bad == 0 && diverged == 0,
          fmt("10000 fuzzed messages, %d failed round-trip; %d simulated logs replayed, %d diverged, %zu emissions "
              "matched",
              bad, logs, diverged, emissions)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GAZEGUIDE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / ("gazeguide-acceptance-det-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto t0 = Clock::now();
  const int a = run_cli("sweep --seed 42 --out '" + (dir / "a.csv").string() + "'");
  const double first = seconds_since(t0);
  const int b = run_cli("sweep --seed 42 --out '" + (dir / "b.csv").string() + "'");
  const std::string ca = slurp(dir / "a.csv"), cb = slurp(dir / "b.csv");
  fs::remove_all(dir);
  const bool same = a == 0 && b == 0 && !ca.empty() && ca == cb;
  return {same && first < 60.0,
          fmt("two 'sweep --seed 42' runs %s (%zu bytes), default 2x2x10 sweep took %.2f s",
              same ? "byte-identical" : "differ", ca.size(), first)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"raycast-oracle-equivalence", raycast},
      {"alignment-recovery", alignment},
      {"kinematics-correctness", kinematics},
      {"dwell-oracle-equivalence", dwell},
      {"marker-sequence-reproduction", marker_sequence},
      {"delta-d-sweep-law", sweep_law},
      {"adaptive-interval-bounds", adaptive_interval},
      {"protocol-roundtrip-and-replay", protocol_roundtrip},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
