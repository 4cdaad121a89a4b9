#ifndef GAZEGUIDE_PROTOCOL_HPP
#define GAZEGUIDE_PROTOCOL_HPP

// Version-1 wire format: one compact JSON object per LF-terminated line.
// Every message carries v, type, seq and ts (microseconds since the session
// epoch) followed by its type-specific payload fields.

#include "gazeguide/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace gazeguide {

inline constexpr int kProtocolVersion = 1;

enum class Role { headset, robot, observer };
enum class Mode { confirmation_gated, scheduled };
enum class MarkerKind { guide, pulse, final };

std::string_view to_string(Role r);
std::string_view to_string(Mode m);
std::string_view to_string(MarkerKind k);
std::optional<Role> parse_role(std::string_view s);
std::optional<Mode> parse_mode(std::string_view s);
std::optional<MarkerKind> parse_marker_kind(std::string_view s);

namespace msg {

struct Hello {
  Role role = Role::observer;
  bool operator==(const Hello&) const = default;
};
struct Welcome {
  std::string session_id;
  std::int64_t epoch_ts = 0;
  bool operator==(const Welcome&) const = default;
};
struct Gaze {
  Vec3d origin = Vec3d::Zero();
  Vec3d dir = Vec3d::UnitZ();
  bool operator==(const Gaze&) const = default;
};
struct PoiDetected {
  std::string poi_id;
  Vec3d pos_robot = Vec3d::Zero();
  std::string label;
  bool operator==(const PoiDetected&) const = default;
};
struct Align {
  std::vector<std::pair<Vec3d, Vec3d>> pairs;
  bool operator==(const Align&) const = default;
};
struct MarkerPlace {
  std::uint64_t marker_id = 0;
  Vec3d pos = Vec3d::Zero();
  Vec3d half = Vec3d::Ones();
  MarkerKind kind = MarkerKind::guide;
  bool operator==(const MarkerPlace&) const = default;
};
struct MarkerMove {
  std::uint64_t marker_id = 0;
  Vec3d pos = Vec3d::Zero();
  bool operator==(const MarkerMove&) const = default;
};
struct MarkerRemove {
  std::uint64_t marker_id = 0;
  bool operator==(const MarkerRemove&) const = default;
};
struct GazeConfirmed {
  std::uint64_t marker_id = 0;
  std::int64_t t_i_us = 0;
  bool operator==(const GazeConfirmed&) const = default;
};
struct EpisodeDone {
  std::string poi_id;
  std::int64_t total_us = 0;
  std::int64_t steps = 0;
  std::int64_t timeouts = 0;
  bool success = false;
  bool operator==(const EpisodeDone&) const = default;
};
struct Error {
  std::string code;
  std::string msg;
  bool operator==(const Error&) const = default;
};
// Operator commands. Optional fields fall back to engine defaults.
struct StartAttraction {
  std::string poi_id;
  std::optional<Mode> mode;
  std::optional<double> delta_d_m;
  std::optional<std::int64_t> delta_t_ms;
  bool operator==(const StartAttraction&) const = default;
};
struct StartShift {
  std::string poi_id;
  std::optional<Mode> mode;
  std::optional<double> delta_d_m;
  std::optional<std::int64_t> delta_t_ms;
  bool operator==(const StartShift&) const = default;
};

}  // namespace msg

using Payload = std::variant<msg::Hello, msg::Welcome, msg::Gaze, msg::PoiDetected, msg::Align,
                             msg::MarkerPlace, msg::MarkerMove, msg::MarkerRemove, msg::GazeConfirmed,
                             msg::EpisodeDone, msg::Error, msg::StartAttraction, msg::StartShift>;

struct WireMessage {
  int v = kProtocolVersion;
  std::int64_t seq = 0;
  std::int64_t ts = 0;
  Payload payload;

  std::string_view type() const;

  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(payload);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(payload);
  }

  bool operator==(const WireMessage&) const = default;
};

/// Wire names of every message type, in schema order.
const std::array<std::string_view, std::variant_size_v<Payload>>& message_types();

enum class ProtocolErrorCode { bad_version, unknown_type, schema_violation, non_monotonic_seq };

std::string_view to_string(ProtocolErrorCode c);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ProtocolErrorCode code() const { return code_; }

 private:
  ProtocolErrorCode code_;
};

/// One line of compact JSON, LF-terminated.
std::string encode(const WireMessage& m);

/// Parses and validates one line (a trailing LF or CRLF is accepted).
/// Unknown fields are ignored. Throws ProtocolError.
WireMessage decode(std::string_view line);

/// Messages the engine consumes, as opposed to session handshakes and
/// engine emissions.
bool is_engine_input(const WireMessage& m);
bool is_engine_emission(const WireMessage& m);

}  // namespace gazeguide

#endif  // GAZEGUIDE_PROTOCOL_HPP
