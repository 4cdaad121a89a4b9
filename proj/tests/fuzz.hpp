#ifndef GAZEGUIDE_TESTS_FUZZ_HPP
#define GAZEGUIDE_TESTS_FUZZ_HPP

// Random wire messages covering every type and optional field.

#include "gazeguide/protocol.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace fuzz {

using namespace gazeguide;

class MessageFuzzer {
 public:
  explicit MessageFuzzer(std::uint64_t seed) : rng_(seed) {}

  WireMessage message() {
    WireMessage m;
    m.seq = static_cast<std::int64_t>(rng_() % (1ULL << 53));
    m.ts = static_cast<std::int64_t>(rng_() >> 12) - (1LL << 50);
    switch (rng_() % 13) {
      case 0: m.payload = msg::Hello{static_cast<Role>(rng_() % 3)}; break;
      case 1: m.payload = msg::Welcome{text(), integer()}; break;
      case 2: m.payload = msg::Gaze{vec(), unit()}; break;
      case 3: m.payload = msg::PoiDetected{text(), vec(), text()}; break;
      case 4: {
        msg::Align a;
        const auto n = rng_() % 6;
        for (std::uint64_t i = 0; i < n; ++i) a.pairs.emplace_back(vec(), vec());
        m.payload = a;
        break;
      }
      case 5:
        m.payload = msg::MarkerPlace{rng_(), vec(), Vec3d(positive(), positive(), positive()),
                                     static_cast<MarkerKind>(rng_() % 3)};
        break;
      case 6: m.payload = msg::MarkerMove{rng_(), vec()}; break;
      case 7: m.payload = msg::MarkerRemove{rng_()}; break;
      case 8: m.payload = msg::GazeConfirmed{rng_(), integer()}; break;
      case 9: m.payload = msg::EpisodeDone{text(), integer(), integer(), integer(), rng_() % 2 == 0}; break;
      case 10: m.payload = msg::Error{text(), text()}; break;
      case 11: m.payload = msg::StartAttraction{text(), mode(), opt_positive(), opt_ms()}; break;
      default: m.payload = msg::StartShift{text(), mode(), opt_positive(), opt_ms()}; break;
    }
    return m;
  }

 private:
  double real() {
    switch (rng_() % 5) {
      case 0: return static_cast<double>(static_cast<std::int64_t>(rng_() % 2001) - 1000);
      case 1: return std::ldexp(oracle::uniform(rng_, -1, 1), static_cast<int>(rng_() % 200) - 100);
      case 2: return 0.0;
      default: return oracle::uniform(rng_, -100, 100);
    }
  }
  double positive() {
    double x = std::abs(real());
    return x > 0.0 ? x : 0.25;
  }
  Vec3d vec() { return Vec3d(real(), real(), real()); }
  Vec3d unit() { return oracle::random_unit(rng_); }
  std::int64_t integer() { return static_cast<std::int64_t>(rng_() >> 11) - (1LL << 52); }
  std::string text() {
    static const std::vector<std::string> pieces{"a", "Z", "0", " ", "\"", "\\", "\n", "\t", "/", "é", "中", "😀", "{", "}", ","};
    std::string s;
    const auto n = rng_() % 12;
    for (std::uint64_t i = 0; i < n; ++i) s += pieces[rng_() % pieces.size()];
    return s;
  }
  std::optional<Mode> mode() {
    const auto r = rng_() % 3;
    if (r == 0) return std::nullopt;
    return r == 1 ? Mode::scheduled : Mode::confirmation_gated;
  }
  std::optional<double> opt_positive() {
    if (rng_() % 2) return std::nullopt;
    return positive();
  }
  std::optional<std::int64_t> opt_ms() {
    if (rng_() % 2) return std::nullopt;
    return 1 + static_cast<std::int64_t>(rng_() % 100000);
  }

  std::mt19937_64 rng_;
};

}  // namespace fuzz

#endif  // GAZEGUIDE_TESTS_FUZZ_HPP
