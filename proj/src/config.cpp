#include "gazeguide/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace gazeguide {

using nlohmann::json;

namespace {

// Reads the keys of one object section, rejecting anything it does not know.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  void read_vec(const char* key, Vec3d& out) {
    std::vector<double> v;
    read(key, v);
    if (!j_.contains(key)) return;
    if (v.size() != 3) throw ConfigError("config key '" + name_ + "." + key + "' must be [x, y, z]");
    out = Vec3d(v[0], v[1], v[2]);
  }

  void read_mode(const char* key, Mode& out) {
    std::string s;
    read(key, s);
    if (!j_.contains(key)) return;
    auto m = parse_mode(s);
    if (!m) throw ConfigError("config key '" + name_ + "." + key + "' is not a mode: " + s);
    out = *m;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const std::string& name() const { return name_; }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_engine(const json& j, EngineConfig& e) {
  Section s(j, "engine");
  s.read("dwell_ms", e.dwell_ms);
  s.read("gap_tolerance_ms", e.gap_tolerance_ms);
  s.read("timeout_ms", e.timeout_ms);
  s.read("max_timeouts", e.max_timeouts);
  s.read("delta_d_m", e.delta_d_m);
  s.read("delta_t_ms", e.delta_t_ms);
  s.read("delta_t_min_ms", e.delta_t_min_ms);
  s.read("delta_t_max_ms", e.delta_t_max_ms);
  s.read("ewma_alpha", e.ewma_alpha);
  s.read("beta", e.beta);
  s.read("adaptive_interval", e.adaptive_interval);
  s.read("marker_half_extent_m", e.marker_half_extent_m);
  s.read("eccentricity_deg", e.eccentricity_deg);
  s.read_mode("mode", e.mode);
  s.read("hfov_deg", e.hfov_deg);
  s.read("vfov_deg", e.vfov_deg);
  s.read("head_lag_tau_ms", e.head_lag_tau_ms);
  s.read("default_depth_m", e.default_depth_m);
  s.read("track_capacity", e.track_capacity);
  s.read("fixation_window_ms", e.fixation_window_ms);
  s.read("fixation_threshold_deg", e.fixation_threshold_deg);
  s.read("fixation_recency_ms", e.fixation_recency_ms);
  s.read("smoothing", e.smoothing);
  s.read("auto_attract", e.auto_attract);
}

void read_agent(const json& j, AgentParams& a) {
  Section s(j, "agent");
  s.read("latency_ms", a.latency_ms);
  s.read("saccade_speed_dps", a.saccade_speed_dps);
  s.read("jitter_sigma_deg", a.jitter_sigma_deg);
  s.read("fov_h_deg", a.fov_h_deg);
  s.read("fov_v_deg", a.fov_v_deg);
  s.read("head_lag_tau_ms", a.head_lag_tau_ms);
  s.read("sample_hz", a.sample_hz);
  s.read("seed", a.seed);
  s.read_vec("eye", a.eye);
  s.read_vec("initial_dir", a.initial_dir);
}

void read_experiment(const json& j, ExperimentConfig& x) {
  Section s(j, "experiment");
  s.read("delta_d_grid", x.delta_d_grid);
  s.read("delta_t_grid", x.delta_t_grid);
  s.read("episodes_per_cell", x.episodes_per_cell);
  s.read_mode("mode", x.mode);
  s.read("alignment_points", x.alignment_points);
  s.read("max_episode_us", x.max_episode_us);
  if (const json* w = s.child("world")) {
    if (!w->is_array()) throw ConfigError("config key 'experiment.world' must be a list");
    x.world.clear();
    for (const json& item : *w) {
      Poi p;
      Section ps(item, "experiment.world[]");
      ps.read("id", p.id);
      ps.read_vec("position", p.position);
      ps.read("label", p.label);
      x.world.push_back(std::move(p));
    }
  }
  if (const json* r = s.child("robot_pose")) {
    Section rs(*r, "experiment.robot_pose");
    double yaw_deg = 0.0;
    Vec3d t = Vec3d::Zero();
    rs.read("yaw_deg", yaw_deg);
    rs.read_vec("translation", t);
    x.robot_pose = RigidTransformd{Eigen::Quaterniond(Eigen::AngleAxisd(deg_to_rad(yaw_deg), Vec3d::UnitY())), t};
  }
}

void read_net(const json& j, NetConfig& n) {
  Section s(j, "net");
  s.read("port", n.port);
  s.read("ws_port", n.ws_port);
  s.read("address", n.address);
  s.read("log_dir", n.log_dir);
  s.read("max_queued", n.max_queued);
  s.read("max_gaze_hz", n.max_gaze_hz);
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

AppConfig parse_config(std::string_view json_text) {
  const json j = parse_json(json_text);
  AppConfig cfg;
  {
    Section root(j, "config");
    if (const json* e = root.child("engine")) read_engine(*e, cfg.experiment.engine);
    if (const json* a = root.child("agent")) read_agent(*a, cfg.experiment.agent);
    if (const json* x = root.child("experiment")) read_experiment(*x, cfg.experiment);
    if (const json* n = root.child("net")) read_net(*n, cfg.net);
  }
  cfg.experiment.validate();
  if (cfg.net.max_queued == 0) throw ConfigError("invalid net.max_queued");
  if (!(cfg.net.max_gaze_hz >= 0.0)) throw ConfigError("invalid net.max_gaze_hz");
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::pair<Vec3d, Vec3d>> parse_pairs(std::string_view json_text) {
  const json j = parse_json(json_text);
  const json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("pairs")) throw ConfigError("expected an object with a 'pairs' list");
    arr = &j.at("pairs");
  }
  if (!arr->is_array()) throw ConfigError("'pairs' must be a list");
  std::vector<std::pair<Vec3d, Vec3d>> pairs;
  auto vec = [](const json& v) {
    if (!v.is_array() || v.size() != 3) throw ConfigError("each point must be [x, y, z]");
    Vec3d p;
    for (int k = 0; k < 3; ++k) {
      if (!v[static_cast<std::size_t>(k)].is_number()) throw ConfigError("point coordinates must be numbers");
      p[k] = v[static_cast<std::size_t>(k)].get<double>();
    }
    return p;
  };
  for (const json& pr : *arr) {
    if (!pr.is_array() || pr.size() != 2) throw ConfigError("each pair must be [[robot], [world]]");
    pairs.emplace_back(vec(pr[0]), vec(pr[1]));
  }
  return pairs;
}

}  // namespace gazeguide
