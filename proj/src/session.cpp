#include "gazeguide/session.hpp"

#include <cstdio>
#include <random>

namespace gazeguide {

bool role_may_send(Role role, const WireMessage& m) {
  if (m.is<msg::StartAttraction>() || m.is<msg::StartShift>()) return true;
  switch (role) {
    case Role::headset: return m.is<msg::Gaze>();
    case Role::robot: return m.is<msg::PoiDetected>() || m.is<msg::Align>();
    case Role::observer: return false;
  }
  return false;
}

namespace {

std::string make_session_id(std::int64_t epoch_ts) {
  std::random_device rd;
  char buf[40];
  std::snprintf(buf, sizeof buf, "s-%llx-%04x", static_cast<unsigned long long>(epoch_ts), rd() & 0xffffu);
  return buf;
}

}  // namespace

SessionHub::SessionHub(EngineConfig engine_config, SessionOptions options, const std::vector<Poi>& world)
    : options_(std::move(options)), engine_(std::move(engine_config)) {
  epoch_ = std::chrono::steady_clock::now();
  epoch_ts_ = std::chrono::duration_cast<std::chrono::microseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
  session_id_ = make_session_id(epoch_ts_);
  for (const Poi& p : world) engine_.add_poi(p);
  if (!options_.log_path.empty()) {
    log_.open(options_.log_path, std::ios::out | std::ios::app | std::ios::binary);
    if (!log_) throw std::runtime_error("cannot open session log " + options_.log_path);
  }
}

SessionHub::~SessionHub() { stop(); }

void SessionHub::start() {
  std::lock_guard lock(queue_mutex_);
  if (worker_.joinable()) return;
  stopping_ = false;
  worker_ = std::thread([this] { loop(); });
}

void SessionHub::stop() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  std::lock_guard lock(log_mutex_);
  if (log_.is_open()) {
    log_.flush();
    log_.close();
  }
}

void SessionHub::drain() {
  std::unique_lock lock(queue_mutex_);
  const std::uint64_t target = enqueued_;
  idle_cv_.wait(lock, [&] { return processed_ >= target || !worker_.joinable(); });
}

std::size_t SessionHub::connection_count() const {
  std::lock_guard lock(peers_mutex_);
  return peers_.size();
}

std::int64_t SessionHub::session_now_us() const {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - epoch_).count();
}

WireMessage SessionHub::session_message(Payload p) const {
  WireMessage m;
  m.seq = 0;
  m.ts = session_now_us();
  m.payload = std::move(p);
  return m;
}

void SessionHub::log_line(const std::string& line) {
  std::lock_guard lock(log_mutex_);
  if (!log_.is_open()) return;
  log_ << line;
  log_.flush();
}

std::uint64_t SessionHub::attach(std::shared_ptr<Connection> conn) {
  std::lock_guard lock(peers_mutex_);
  const std::uint64_t id = next_id_++;
  peers_[id] = Peer{std::move(conn), {}, {}, {}};
  return id;
}

void SessionHub::detach(std::uint64_t id) {
  std::lock_guard lock(peers_mutex_);
  peers_.erase(id);
}

void SessionHub::reply_locked(std::uint64_t id, Peer& peer, const WireMessage& m) {
  const std::string line = encode(m);
  log_line(line);
  if (!peer.conn->deliver(line)) {
    peer.conn->close();
    peers_.erase(id);
  }
}

void SessionHub::fail_locked(std::uint64_t id, Peer& peer, const std::string& code, const std::string& what,
                             bool close) {
  auto conn = peer.conn;
  reply_locked(id, peer, session_message(msg::Error{code, what}));
  if (close) {
    conn->close();
    peers_.erase(id);
  }
}

void SessionHub::reject_oversized(std::uint64_t id) {
  std::lock_guard lock(peers_mutex_);
  auto it = peers_.find(id);
  if (it == peers_.end()) return;
  fail_locked(id, it->second, "line-too-long", "line exceeds the maximum message size", true);
}

void SessionHub::receive(std::uint64_t id, std::string_view line) {
  std::lock_guard lock(peers_mutex_);
  auto it = peers_.find(id);
  if (it == peers_.end()) return;
  Peer& peer = it->second;

  if (line.size() > options_.max_line_bytes) {
    fail_locked(id, peer, "line-too-long", "line exceeds the maximum message size", true);
    return;
  }

  WireMessage m;
  try {
    m = decode(line);
  } catch (const ProtocolError& e) {
    fail_locked(id, peer, std::string(to_string(e.code())), e.what(), false);
    return;
  }
  if (peer.last_seq && m.seq <= *peer.last_seq) {
    fail_locked(id, peer, std::string(to_string(ProtocolErrorCode::non_monotonic_seq)),
                "seq must increase on every message", false);
    return;
  }
  peer.last_seq = m.seq;

  std::string raw(line);
  if (raw.empty() || raw.back() != '\n') raw.push_back('\n');

  if (!peer.role) {
    if (!m.is<msg::Hello>()) {
      fail_locked(id, peer, "no-hello", "first message must be HELLO", true);
      return;
    }
    const Role role = m.as<msg::Hello>().role;
    if (role != Role::observer) {
      for (const auto& [other_id, other] : peers_) {
        if (other_id != id && other.role == role) {
          fail_locked(id, peer, "role-taken", std::string("a ") + std::string(to_string(role)) + " is already connected",
                      true);
          return;
        }
      }
    }
    peer.role = role;
    log_line(raw);
    reply_locked(id, peer, session_message(msg::Welcome{session_id_, epoch_ts_}));
    return;
  }

  if (!role_may_send(*peer.role, m)) {
    fail_locked(id, peer, "role-violation",
                std::string(m.type()) + " is not allowed from a " + std::string(to_string(*peer.role)), true);
    return;
  }

  if (m.is<msg::Gaze>() && options_.max_gaze_hz > 0.0) {
    const auto min_gap = static_cast<std::int64_t>(1e6 / options_.max_gaze_hz);
    if (peer.last_gaze_ts && m.ts - *peer.last_gaze_ts < min_gap) {
      ++dropped_gaze_;
      return;
    }
    peer.last_gaze_ts = m.ts;
  }

  {
    std::lock_guard qlock(queue_mutex_);
    queue_.push_back(Event{id, std::move(raw), std::move(m)});
    ++enqueued_;
  }
  queue_cv_.notify_one();
}

void SessionHub::loop() {
  for (;;) {
    Event e;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) break;
      e = std::move(queue_.front());
      queue_.pop_front();
    }
    process(e);
    {
      std::lock_guard lock(queue_mutex_);
      ++processed_;
    }
    idle_cv_.notify_all();
  }
  idle_cv_.notify_all();
}

void SessionHub::process(const Event& e) {
  Emissions out;
  {
    std::lock_guard lock(engine_mutex_);
    out = engine_.handle(e.message);
  }
  log_line(e.line);

  std::lock_guard lock(peers_mutex_);
  for (const WireMessage& m : out) {
    const std::string line = encode(m);
    log_line(line);
    const bool to_headset = m.is<msg::MarkerPlace>() || m.is<msg::MarkerMove>() || m.is<msg::MarkerRemove>();
    std::vector<std::uint64_t> slow;
    for (auto& [id, peer] : peers_) {
      bool wanted = false;
      if (m.is<msg::Error>()) {
        wanted = id == e.from;
      } else if (peer.role == Role::observer) {
        wanted = true;
      } else if (peer.role == Role::headset) {
        wanted = to_headset;
      }
      if (wanted && !peer.conn->deliver(line)) slow.push_back(id);
    }
    for (std::uint64_t id : slow) {
      peers_.at(id).conn->close();
      peers_.erase(id);
    }
  }
}

}  // namespace gazeguide
