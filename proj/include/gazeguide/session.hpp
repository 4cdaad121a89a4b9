#ifndef GAZEGUIDE_SESSION_HPP
#define GAZEGUIDE_SESSION_HPP

// Session layer: handshake, role checks and rate limiting per connection,
// one ordered event queue into the engine, and fan-out of engine emissions.
// Transports plug in through the Connection interface.

#include "gazeguide/engine.hpp"
#include "gazeguide/protocol.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace gazeguide {

/// Outbound side of one client connection.
class Connection {
 public:
  virtual ~Connection() = default;
  /// Queues one encoded line. Returns false when the queue is full.
  virtual bool deliver(const std::string& line) = 0;
  /// Closes after the lines already queued have been written.
  virtual void close() = 0;
};

struct SessionOptions {
  std::string log_path;
  std::size_t max_queued = 1000;
  double max_gaze_hz = 120.0;
  std::size_t max_line_bytes = 64 * 1024;
};

bool role_may_send(Role role, const WireMessage& m);

class SessionHub {
 public:
  SessionHub(EngineConfig engine_config, SessionOptions options, const std::vector<Poi>& world = {});
  ~SessionHub();

  SessionHub(const SessionHub&) = delete;
  SessionHub& operator=(const SessionHub&) = delete;

  /// Starts the engine loop thread.
  void start();
  /// Processes everything already queued, then stops the loop and closes
  /// the log.
  void stop();
  /// Blocks until every event queued so far has been processed.
  void drain();

  std::uint64_t attach(std::shared_ptr<Connection> conn);
  void detach(std::uint64_t id);
  /// Handles one inbound line (without or with its trailing LF). Safe to
  /// call from any thread.
  void receive(std::uint64_t id, std::string_view line);
  /// Rejects an over-long line and closes the connection.
  void reject_oversized(std::uint64_t id);

  const std::string& session_id() const { return session_id_; }
  std::int64_t epoch_ts() const { return epoch_ts_; }
  std::uint64_t dropped_gaze() const { return dropped_gaze_.load(); }
  std::size_t max_line_bytes() const { return options_.max_line_bytes; }
  std::size_t connection_count() const;

  /// Runs `fn` on the engine under the loop's lock (for inspection).
  template <typename Fn>
  auto with_engine(Fn&& fn) const {
    std::lock_guard lock(engine_mutex_);
    return fn(engine_);
  }

 private:
  struct Peer {
    std::shared_ptr<Connection> conn;
    std::optional<Role> role;
    std::optional<std::int64_t> last_seq;
    std::optional<std::int64_t> last_gaze_ts;
  };
  struct Event {
    std::uint64_t from = 0;
    std::string line;
    WireMessage message;
  };

  void loop();
  void process(const Event& e);
  std::int64_t session_now_us() const;
  WireMessage session_message(Payload p) const;
  void reply_locked(std::uint64_t id, Peer& peer, const WireMessage& m);
  void fail_locked(std::uint64_t id, Peer& peer, const std::string& code, const std::string& what, bool close);
  void log_line(const std::string& line);

  SessionOptions options_;
  std::string session_id_;
  std::int64_t epoch_ts_ = 0;
  std::chrono::steady_clock::time_point epoch_;

  mutable std::mutex engine_mutex_;
  Engine engine_;

  mutable std::mutex peers_mutex_;
  std::map<std::uint64_t, Peer> peers_;
  std::uint64_t next_id_ = 1;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<Event> queue_;
  std::uint64_t enqueued_ = 0;
  std::uint64_t processed_ = 0;
  bool stopping_ = false;
  std::thread worker_;

  std::mutex log_mutex_;
  std::ofstream log_;

  std::atomic<std::uint64_t> dropped_gaze_{0};
};

class BindError : public std::runtime_error {
 public:
  BindError(std::uint16_t port, const std::string& what) : std::runtime_error(what), port_(port) {}
  std::uint16_t port() const { return port_; }

 private:
  std::uint16_t port_;
};

/// Plain socket listener (NDJSON over TCP) plus a WebSocket endpoint at
/// `/ws` carrying the same lines as text frames. Port 0 picks a free port.
class NetServer {
 public:
  explicit NetServer(SessionHub& hub);
  ~NetServer();

  NetServer(const NetServer&) = delete;
  NetServer& operator=(const NetServer&) = delete;

  /// Binds both listeners and starts serving. Throws BindError.
  void start(std::uint16_t tcp_port, std::uint16_t ws_port, const std::string& address = "0.0.0.0");
  void stop();

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gazeguide

#endif  // GAZEGUIDE_SESSION_HPP
