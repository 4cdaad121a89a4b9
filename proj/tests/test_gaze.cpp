#include "gazeguide/gaze.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace gazeguide;

namespace {

GazeSample sample(std::int64_t ts, Vec3d origin, Vec3d dir) { return GazeSample{ts, Rayd(origin, dir)}; }

}  // namespace

TEST_CASE("push_sample ordering and capacity") {
  GazeTrack track;
  CHECK(track.push_sample(sample(10, Vec3d::Zero(), Vec3d::UnitZ())));
  CHECK_FALSE(track.push_sample(sample(10, Vec3d::Zero(), Vec3d::UnitZ())));
  CHECK_FALSE(track.push_sample(sample(5, Vec3d::Zero(), Vec3d::UnitZ())));
  CHECK(track.size() == 1);

  GazeTrack ring(512);
  for (int i = 0; i < 600; ++i) ring.push_sample(sample(i + 1, Vec3d::Zero(), Vec3d::UnitZ()));
  CHECK(ring.size() == 512);
  CHECK(ring.front().ts_us == 89);  // the oldest 88 are gone
  CHECK(ring.back().ts_us == 600);
}

TEST_CASE("push_sample keeps strict ordering under arbitrary input") {
  std::mt19937_64 rng(1);
  GazeTrack track(64);
  for (int i = 0; i < 5000; ++i) {
    track.push_sample(sample(static_cast<std::int64_t>(rng() % 20000), Vec3d::Zero(), Vec3d::UnitZ()));
    for (std::size_t k = 1; k < track.size(); ++k) REQUIRE(track[k - 1].ts_us < track[k].ts_us);
    REQUIRE(track.size() <= 64);
  }
}

TEST_CASE("gaze_point") {
  const auto s = sample(0, Vec3d::Zero(), Vec3d(0, 0, 1));
  CHECK(gaze_point(s, 2.0).isApprox(Vec3d(0, 0, 2)));
  CHECK_THROWS(gaze_point(s, 0.0));
  CHECK_THROWS(gaze_point(s, -1.0));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto r = sample(0, oracle::uniform_vec(rng, -3, 3), oracle::random_unit(rng));
    const double d = oracle::uniform(rng, 0.1, 10);
    CHECK(std::abs((gaze_point(r, d) - r.ray.origin()).norm() - d) < 1e-9);
  }
  // Looking straight at a marker with depth set to its range lands on it.
  const Vec3d eye(0, 1.6, 0), marker(1, 1.2, 4);
  const auto look = sample(0, eye, marker - eye);
  CHECK((gaze_point(look, (marker - eye).norm()) - marker).norm() < 1e-9);
}

TEST_CASE("kinematics needs three samples") {
  GazeTrack track;
  track.push_sample(sample(0, Vec3d::Zero(), Vec3d::UnitZ()));
  track.push_sample(sample(10000, Vec3d::Zero(), Vec3d::UnitZ()));
  CHECK_THROWS_AS(estimate_kinematics(track), InsufficientSamples);
  track.push_sample(sample(20000, Vec3d::Zero(), Vec3d::UnitZ()));
  const auto k = estimate_kinematics(track);
  CHECK(k.velocity.norm() == 0.0);
  CHECK(k.speed == 0.0);
}

TEST_CASE("kinematics is exact for linear motion at any spacing") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3d a = oracle::uniform_vec(rng, -2, 2), b = oracle::uniform_vec(rng, -3, 3);
    const Vec3d dir = oracle::random_unit(rng);
    GazeTrack track(512, oracle::uniform(rng, 0.5, 5));
    std::int64_t ts = 1000;
    const int n = 3 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      ts += 1000 + static_cast<std::int64_t>(rng() % 40000);
      const double t = ts * 1e-6;
      track.push_sample(sample(ts, a + b * t, dir));
    }
    const auto k = estimate_kinematics(track);
    CHECK((k.velocity - b).norm() <= 1e-6);
    CHECK(std::abs(k.speed - k.velocity.norm()) <= 1e-9);
  }
}

TEST_CASE("kinematics of a linear sweep at 100 Hz") {
  GazeTrack track(512, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double t = i * 0.01;
    track.push_sample(sample(i * 10000, Vec3d(t, 0, 0), Vec3d::UnitZ()));
    if (track.size() >= 3) CHECK((estimate_kinematics(track).velocity - Vec3d(1, 0, 0)).norm() <= 1e-6);
  }
}

TEST_CASE("kinematics of a sinusoid against the analytic derivative") {
  GazeTrack track(512, 2.0);
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double t = i * 0.01;
    track.push_sample(sample(i * 10000, Vec3d(std::sin(2 * M_PI * t), 0, 0), Vec3d::UnitZ()));
    if (track.size() < 5) continue;
    const auto k = estimate_kinematics(track);
    const double tk = k.ts_us * 1e-6;
    worst = std::max(worst, std::abs(k.velocity.x() - 2 * M_PI * std::cos(2 * M_PI * tk)));
  }
  CHECK(worst < 2e-3);
}

TEST_CASE("smoothing keeps linear motion exact") {
  GazeTrack track(512, 2.0);
  track.set_smoothing(true);
  for (int i = 0; i < 4; ++i) track.push_sample(sample(i * 10000, Vec3d(0.5 * i * 0.01, 0, 0), Vec3d::UnitZ()));
  CHECK_THROWS_AS(estimate_kinematics(track), InsufficientSamples);
  for (int i = 4; i < 12; ++i) {
    track.push_sample(sample(i * 10000, Vec3d(0.5 * i * 0.01, 0, 0), Vec3d::UnitZ()));
    CHECK((estimate_kinematics(track).velocity - Vec3d(0.5, 0, 0)).norm() <= 1e-9);
  }
}

TEST_CASE("fixation on a steady gaze") {
  GazeTrack track;
  for (int i = 0; i <= 20; ++i) track.push_sample(sample(i * 10000, Vec3d::Zero(), Vec3d::UnitZ()));
  const auto f = detect_fixation(track, 150, 1.5);
  REQUIRE(f);
  CHECK(f->dispersion_deg == 0.0);
  CHECK(f->end_us - f->start_us >= 150000);
  CHECK(f->centroid_dir.isApprox(Vec3d::UnitZ()));
}

TEST_CASE("no fixation while sweeping") {
  GazeTrack track;
  // 5 degrees over each 150 ms.
  for (int i = 0; i <= 40; ++i) {
    const double a = deg_to_rad(i * 5.0 / 15.0);
    track.push_sample(sample(i * 10000, Vec3d::Zero(), Vec3d(std::sin(a), 0, std::cos(a))));
  }
  CHECK_FALSE(detect_fixation(track, 150, 1.5));
}

TEST_CASE("fixations in a synthetic scanpath match the exhaustive scan") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    // saccade, fixation A, saccade, fixation B, saccade; 100 Hz.
    const Vec3d fa = oracle::random_unit(rng);
    Vec3d fb = oracle::random_unit(rng);
    while (angular_distance(fa, fb) < 20.0) fb = oracle::random_unit(rng);
    const int a0 = 10 + static_cast<int>(rng() % 10), a1 = a0 + 20 + static_cast<int>(rng() % 20);
    const int b0 = a1 + 10 + static_cast<int>(rng() % 10), b1 = b0 + 20 + static_cast<int>(rng() % 20);
    const int n = b1 + 10;
    GazeTrack track;
    std::vector<std::int64_t> ts;
    std::vector<Vec3d> dirs;
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (int i = 0; i < n; ++i) {
      Vec3d d;
      if (i >= a0 && i <= a1) {
        d = rotate_toward(fa, oracle::random_unit(rng), std::abs(jitter(rng)));
      } else if (i >= b0 && i <= b1) {
        d = rotate_toward(fb, oracle::random_unit(rng), std::abs(jitter(rng)));
      } else {
        d = oracle::random_unit(rng);  // scattered saccade samples
      }
      ts.push_back(i * 10000);
      dirs.push_back(d);
      track.push_sample(sample(ts.back(), Vec3d::Zero(), d));
    }
    const auto found = detect_fixations(track, 150, 1.5);
    for (const auto& f : found) {
      std::size_t i = 0, j = 0;
      while (ts[i] != f.start_us) ++i;
      while (ts[j] != f.end_us) ++j;
      CHECK(oracle::valid_fixation_window(ts, dirs, i, j, 150000, 1.5));
      CHECK(f.dispersion_deg <= 1.5);
      CHECK(std::abs(f.dispersion_deg - oracle::window_dispersion(dirs, i, j)) < 1e-9);
      if (j + 1 < ts.size()) CHECK_FALSE(oracle::window_dispersion(dirs, i, j + 1) <= 1.5);
    }
    auto matches = [&](int s, int e) {
      for (const auto& f : found)
        if (std::abs(f.start_us - ts[s]) <= 10000 && std::abs(f.end_us - ts[e]) <= 10000) return true;
      return false;
    };
    CHECK(matches(a0, a1));
    CHECK(matches(b0, b1));
  }
}

namespace {

const Aabbd kBox(Vec3d(0, 0, 5), Vec3d::Constant(0.15));
const Vec3d kHitDir(0, 0, 1);
const Vec3d kMissDir = Vec3d(1, 0, 5).normalized();

std::optional<std::size_t> run_dwell(const std::vector<oracle::HitEvent>& ev, int dwell_ms, int gap_ms) {
  DwellState st;
  std::optional<std::size_t> first;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    const bool was = st.confirmed;
    st = update_dwell(st, sample(ev[k].ts_us, Vec3d::Zero(), ev[k].hit ? kHitDir : kMissDir), kBox, dwell_ms, gap_ms);
    if (was) REQUIRE(st.confirmed);  // latches
    if (st.confirmed && !first) first = k;
  }
  return first;
}

std::vector<oracle::HitEvent> block(std::vector<oracle::HitEvent> ev, std::int64_t from, std::int64_t to, bool hit,
                                    std::int64_t step = 10000) {
  for (std::int64_t t = from; t < to; t += step) ev.push_back({t, hit});
  return ev;
}

}  // namespace

TEST_CASE("dwell examples") {
  auto ev = block({}, 0, 310000, true);
  auto c = run_dwell(ev, 250, 50);
  REQUIRE(c);
  CHECK(ev[*c].ts_us == 250000);

  auto broken = block(block(block({}, 0, 200000, true), 200000, 300000, false), 300000, 500000, true);
  CHECK_FALSE(run_dwell(broken, 250, 50));

  auto blink = block(block(block({}, 0, 150000, true), 150000, 190000, false), 190000, 400000, true);
  auto b = run_dwell(blink, 250, 50);
  REQUIRE(b);
  CHECK(blink[*b].ts_us == 250000);
}

TEST_CASE("dwell decisions match the interval-scan oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<oracle::HitEvent> ev;
    std::int64_t ts = static_cast<std::int64_t>(rng() % 1000);
    bool hit = rng() % 2;
    const int n = 20 + static_cast<int>(rng() % 100);
    for (int i = 0; i < n; ++i) {
      ts += 2000 + static_cast<std::int64_t>(rng() % 30000);
      if (rng() % 100 < 25) hit = !hit;
      ev.push_back({ts, hit});
    }
    const int dwell = 50 + static_cast<int>(rng() % 300);
    const int gap = static_cast<int>(rng() % 80);
    const auto got = run_dwell(ev, dwell, gap);
    const auto want = oracle::dwell_interval_scan(ev, dwell * 1000LL, gap * 1000LL);
    REQUIRE(got == want);
  }
}
