#include "gazeguide/protocol.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace gazeguide {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, std::variant_size_v<Payload>> kTypeNames = {
    "HELLO",         "WELCOME",     "GAZE",           "POI_DETECTED",     "ALIGN",
    "MARKER_PLACE",  "MARKER_MOVE", "MARKER_REMOVE",  "GAZE_CONFIRMED",   "EPISODE_DONE",
    "ERROR",         "START_ATTRACTION", "START_SHIFT"};

constexpr double kMaxExactInteger = 9007199254740992.0;  // 2^53

ProtocolError schema(const std::string& what) {
  return ProtocolError(ProtocolErrorCode::schema_violation, what);
}

// Integral values are written without a fraction so that 0.0 reads "0".
ordered_json number(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("cannot encode a non-finite number");
  if (x == std::trunc(x) && std::abs(x) < kMaxExactInteger) return static_cast<std::int64_t>(x);
  return x;
}

ordered_json vec(const Vec3d& v) { return ordered_json::array({number(v.x()), number(v.y()), number(v.z())}); }

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw schema(std::string("missing field '") + key + "'");
  return *it;
}

std::int64_t read_int(const json& j, const char* key) {
  const json& f = field(j, key);
  if (f.is_number_integer()) return f.get<std::int64_t>();
  throw schema(std::string("field '") + key + "' must be an integer");
}

std::uint64_t read_uint(const json& j, const char* key) {
  const json& f = field(j, key);
  if (f.is_number_unsigned()) return f.get<std::uint64_t>();
  throw schema(std::string("field '") + key + "' must be a non-negative integer");
}

double read_number(const json& f, const char* key) {
  if (!f.is_number()) throw schema(std::string("field '") + key + "' must be a number");
  const double x = f.get<double>();
  if (!std::isfinite(x)) throw schema(std::string("field '") + key + "' must be finite");
  return x;
}

std::string read_string(const json& j, const char* key) {
  const json& f = field(j, key);
  if (!f.is_string()) throw schema(std::string("field '") + key + "' must be a string");
  return f.get<std::string>();
}

bool read_bool(const json& j, const char* key) {
  const json& f = field(j, key);
  if (!f.is_boolean()) throw schema(std::string("field '") + key + "' must be a boolean");
  return f.get<bool>();
}

Vec3d read_vec(const json& f, const char* key) {
  if (!f.is_array() || f.size() != 3) throw schema(std::string("field '") + key + "' must be [x,y,z]");
  return {read_number(f[0], key), read_number(f[1], key), read_number(f[2], key)};
}

Vec3d read_vec(const json& j, const char* key, int) { return read_vec(field(j, key), key); }

template <typename Start>
void write_start(ordered_json& j, const Start& s) {
  j["poi_id"] = s.poi_id;
  if (s.mode) j["mode"] = std::string(to_string(*s.mode));
  if (s.delta_d_m) j["delta_d_m"] = number(*s.delta_d_m);
  if (s.delta_t_ms) j["delta_t_ms"] = *s.delta_t_ms;
}

template <typename Start>
Start read_start(const json& j) {
  Start s;
  s.poi_id = read_string(j, "poi_id");
  if (auto it = j.find("mode"); it != j.end()) {
    if (!it->is_string()) throw schema("field 'mode' must be a string");
    s.mode = parse_mode(it->get<std::string>());
    if (!s.mode) throw schema("unknown mode");
  }
  if (auto it = j.find("delta_d_m"); it != j.end()) {
    s.delta_d_m = read_number(*it, "delta_d_m");
    if (*s.delta_d_m <= 0.0) throw schema("delta_d_m must be positive");
  }
  if (j.contains("delta_t_ms")) {
    s.delta_t_ms = read_int(j, "delta_t_ms");
    if (*s.delta_t_ms <= 0) throw schema("delta_t_ms must be positive");
  }
  return s;
}

}  // namespace

std::string_view to_string(Role r) {
  switch (r) {
    case Role::headset: return "headset";
    case Role::robot: return "robot";
    case Role::observer: return "observer";
  }
  return "observer";
}

std::string_view to_string(Mode m) {
  return m == Mode::scheduled ? "scheduled" : "confirmation_gated";
}

std::string_view to_string(MarkerKind k) {
  switch (k) {
    case MarkerKind::guide: return "guide";
    case MarkerKind::pulse: return "pulse";
    case MarkerKind::final: return "final";
  }
  return "guide";
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "headset") return Role::headset;
  if (s == "robot") return Role::robot;
  if (s == "observer") return Role::observer;
  return std::nullopt;
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "confirmation_gated") return Mode::confirmation_gated;
  if (s == "scheduled") return Mode::scheduled;
  return std::nullopt;
}

std::optional<MarkerKind> parse_marker_kind(std::string_view s) {
  if (s == "guide") return MarkerKind::guide;
  if (s == "pulse") return MarkerKind::pulse;
  if (s == "final") return MarkerKind::final;
  return std::nullopt;
}

std::string_view to_string(ProtocolErrorCode c) {
  switch (c) {
    case ProtocolErrorCode::bad_version: return "bad-version";
    case ProtocolErrorCode::unknown_type: return "unknown-type";
    case ProtocolErrorCode::schema_violation: return "schema-violation";
    case ProtocolErrorCode::non_monotonic_seq: return "non-monotonic-seq";
  }
  return "schema-violation";
}

const std::array<std::string_view, std::variant_size_v<Payload>>& message_types() { return kTypeNames; }

std::string_view WireMessage::type() const { return kTypeNames[payload.index()]; }

std::string encode(const WireMessage& m) {
  ordered_json j;
  j["v"] = m.v;
  j["type"] = std::string(m.type());
  j["seq"] = m.seq;
  j["ts"] = m.ts;
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, msg::Hello>) {
          j["role"] = std::string(to_string(p.role));
        } else if constexpr (std::is_same_v<T, msg::Welcome>) {
          j["session_id"] = p.session_id;
          j["epoch_ts"] = p.epoch_ts;
        } else if constexpr (std::is_same_v<T, msg::Gaze>) {
          j["origin"] = vec(p.origin);
          j["dir"] = vec(p.dir);
        } else if constexpr (std::is_same_v<T, msg::PoiDetected>) {
          j["poi_id"] = p.poi_id;
          j["pos_robot"] = vec(p.pos_robot);
          j["label"] = p.label;
        } else if constexpr (std::is_same_v<T, msg::Align>) {
          ordered_json pairs = ordered_json::array();
          for (const auto& [r, w] : p.pairs) pairs.push_back(ordered_json::array({vec(r), vec(w)}));
          j["pairs"] = std::move(pairs);
        } else if constexpr (std::is_same_v<T, msg::MarkerPlace>) {
          j["marker_id"] = p.marker_id;
          j["pos"] = vec(p.pos);
          j["half"] = vec(p.half);
          j["kind"] = std::string(to_string(p.kind));
        } else if constexpr (std::is_same_v<T, msg::MarkerMove>) {
          j["marker_id"] = p.marker_id;
          j["pos"] = vec(p.pos);
        } else if constexpr (std::is_same_v<T, msg::MarkerRemove>) {
          j["marker_id"] = p.marker_id;
        } else if constexpr (std::is_same_v<T, msg::GazeConfirmed>) {
          j["marker_id"] = p.marker_id;
          j["t_i_us"] = p.t_i_us;
        } else if constexpr (std::is_same_v<T, msg::EpisodeDone>) {
          j["poi_id"] = p.poi_id;
          j["total_us"] = p.total_us;
          j["steps"] = p.steps;
          j["timeouts"] = p.timeouts;
          j["success"] = p.success;
        } else if constexpr (std::is_same_v<T, msg::Error>) {
          j["code"] = p.code;
          j["msg"] = p.msg;
        } else {
          write_start(j, p);
        }
      },
      m.payload);
  std::string line = j.dump();
  line.push_back('\n');
  return line;
}

WireMessage decode(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  const json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) throw schema("line is not valid JSON");
  if (!j.is_object()) throw schema("message must be a JSON object");

  const json& v = field(j, "v");
  if (!v.is_number_integer()) throw schema("field 'v' must be an integer");
  if (v.get<std::int64_t>() != kProtocolVersion)
    throw ProtocolError(ProtocolErrorCode::bad_version, "unsupported protocol version");

  const std::string type = read_string(j, "type");
  std::size_t index = kTypeNames.size();
  for (std::size_t i = 0; i < kTypeNames.size(); ++i)
    if (kTypeNames[i] == type) index = i;
  if (index == kTypeNames.size())
    throw ProtocolError(ProtocolErrorCode::unknown_type, "unknown message type '" + type + "'");

  WireMessage m;
  m.seq = read_int(j, "seq");
  if (m.seq < 0) throw schema("field 'seq' must be non-negative");
  m.ts = read_int(j, "ts");

  switch (index) {
    case 0: {
      auto role = parse_role(read_string(j, "role"));
      if (!role) throw schema("unknown role");
      m.payload = msg::Hello{*role};
      break;
    }
    case 1:
      m.payload = msg::Welcome{read_string(j, "session_id"), read_int(j, "epoch_ts")};
      break;
    case 2: {
      msg::Gaze g{read_vec(j, "origin", 0), read_vec(j, "dir", 0)};
      if (g.dir.norm() == 0.0) throw schema("gaze direction must be non-zero");
      m.payload = g;
      break;
    }
    case 3:
      m.payload = msg::PoiDetected{read_string(j, "poi_id"), read_vec(j, "pos_robot", 0),
                                   read_string(j, "label")};
      break;
    case 4: {
      const json& pairs = field(j, "pairs");
      if (!pairs.is_array()) throw schema("field 'pairs' must be an array");
      msg::Align a;
      for (const json& pr : pairs) {
        if (!pr.is_array() || pr.size() != 2) throw schema("each pair must be [robot, world]");
        a.pairs.emplace_back(read_vec(pr[0], "pairs"), read_vec(pr[1], "pairs"));
      }
      m.payload = std::move(a);
      break;
    }
    case 5: {
      msg::MarkerPlace p;
      p.marker_id = read_uint(j, "marker_id");
      p.pos = read_vec(j, "pos", 0);
      p.half = read_vec(j, "half", 0);
      if ((p.half.array() <= 0.0).any()) throw schema("marker half extents must be positive");
      auto kind = parse_marker_kind(read_string(j, "kind"));
      if (!kind) throw schema("unknown marker kind");
      p.kind = *kind;
      m.payload = p;
      break;
    }
    case 6:
      m.payload = msg::MarkerMove{read_uint(j, "marker_id"), read_vec(j, "pos", 0)};
      break;
    case 7:
      m.payload = msg::MarkerRemove{read_uint(j, "marker_id")};
      break;
    case 8:
      m.payload = msg::GazeConfirmed{read_uint(j, "marker_id"), read_int(j, "t_i_us")};
      break;
    case 9:
      m.payload = msg::EpisodeDone{read_string(j, "poi_id"), read_int(j, "total_us"), read_int(j, "steps"),
                                   read_int(j, "timeouts"), read_bool(j, "success")};
      break;
    case 10:
      m.payload = msg::Error{read_string(j, "code"), read_string(j, "msg")};
      break;
    case 11:
      m.payload = read_start<msg::StartAttraction>(j);
      break;
    default:
      m.payload = read_start<msg::StartShift>(j);
      break;
  }
  return m;
}

bool is_engine_input(const WireMessage& m) {
  return m.is<msg::Gaze>() || m.is<msg::PoiDetected>() || m.is<msg::Align>() ||
         m.is<msg::StartAttraction>() || m.is<msg::StartShift>();
}

bool is_engine_emission(const WireMessage& m) {
  if (m.is<msg::Error>()) {
    // Session-layer rejections carry protocol codes; the engine's own
    // refusals use the codes below.
    const auto& code = m.as<msg::Error>().code;
    return code == "busy" || code == "unknown-poi" || code == "no-fixation" || code == "no-gaze" ||
           code == "degenerate-align";
  }
  return m.is<msg::MarkerPlace>() || m.is<msg::MarkerMove>() || m.is<msg::MarkerRemove>() ||
         m.is<msg::GazeConfirmed>() || m.is<msg::EpisodeDone>();
}

}  // namespace gazeguide
