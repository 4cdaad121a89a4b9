#include "gazeguide/session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <deque>
#include <istream>
#include <mutex>
#include <set>

namespace gazeguide {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// Outbound queue shared by both transports; all socket work happens on the
// io_context thread.
class QueuedConnection : public Connection {
 public:
  QueuedConnection(asio::io_context& io, std::size_t max_queued) : io_(io), max_queued_(max_queued) {}

  bool deliver(const std::string& line) override {
    if (queued_.load() >= max_queued_) return false;
    ++queued_;
    asio::post(io_, [self = self_ptr(), line] {
      self->outq_.push_back(line);
      if (!self->writing_) self->write_next();
    });
    return true;
  }

  void close() override {
    asio::post(io_, [self = self_ptr()] {
      self->closing_ = true;
      if (!self->writing_ && self->outq_.empty()) self->shutdown();
    });
  }

  virtual void shutdown() = 0;
  /// Drops the socket without any closing handshake.
  virtual void kill() = 0;

 protected:
  virtual std::shared_ptr<QueuedConnection> self_ptr() = 0;
  virtual void write_front() = 0;

  void write_next() {
    if (outq_.empty()) {
      writing_ = false;
      if (closing_) shutdown();
      return;
    }
    writing_ = true;
    write_front();
  }

  void on_written(const boost::system::error_code& ec) {
    outq_.pop_front();
    --queued_;
    if (ec) {
      writing_ = false;
      shutdown();
      return;
    }
    write_next();
  }

  asio::io_context& io_;
  std::size_t max_queued_;
  std::atomic<std::size_t> queued_{0};
  std::deque<std::string> outq_;
  bool writing_ = false;
  bool closing_ = false;
};

class TcpSession : public QueuedConnection, public std::enable_shared_from_this<TcpSession> {
 public:
  TcpSession(tcp::socket socket, SessionHub& hub, asio::io_context& io, std::size_t max_queued)
      : QueuedConnection(io, max_queued), socket_(std::move(socket)), hub_(hub), buf_(hub.max_line_bytes() + 1) {}

  void start() {
    id_ = hub_.attach(shared_from_this());
    read_next();
  }

  void shutdown() override { kill(); }

  void kill() override {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

 protected:
  std::shared_ptr<QueuedConnection> self_ptr() override { return shared_from_this(); }

  void write_front() override {
    asio::async_write(socket_, asio::buffer(outq_.front()),
                      [self = shared_from_this()](const boost::system::error_code& ec, std::size_t) {
                        self->on_written(ec);
                      });
  }

 private:
  void read_next() {
    asio::async_read_until(socket_, buf_, '\n',
                           [self = shared_from_this()](const boost::system::error_code& ec, std::size_t n) {
                             self->on_read(ec, n);
                           });
  }

  void on_read(const boost::system::error_code& ec, std::size_t n) {
    if (ec == asio::error::not_found) {
      hub_.reject_oversized(id_);
      return;
    }
    if (ec) {
      hub_.detach(id_);
      shutdown();
      return;
    }
    std::string line(asio::buffers_begin(buf_.data()), asio::buffers_begin(buf_.data()) + static_cast<std::ptrdiff_t>(n));
    buf_.consume(n);
    if (line.find_first_not_of("\r\n") != std::string::npos) hub_.receive(id_, line);
    read_next();
  }

  tcp::socket socket_;
  SessionHub& hub_;
  asio::streambuf buf_;
  std::uint64_t id_ = 0;
};

class WsSession : public QueuedConnection, public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, SessionHub& hub, asio::io_context& io, std::size_t max_queued)
      : QueuedConnection(io, max_queued), ws_(std::move(socket)), hub_(hub) {}

  void start() {
    http::async_read(ws_.next_layer(), buf_, request_,
                     [self = shared_from_this()](const beast::error_code& ec, std::size_t) { self->on_request(ec); });
  }

  void kill() override {
    beast::error_code ec;
    ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ec);
    ws_.next_layer().socket().close(ec);
  }

  void shutdown() override {
    if (!accepted_) {
      kill();
      return;
    }
    if (close_started_) return;
    close_started_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](const beast::error_code&) {
      beast::error_code ec;
      self->ws_.next_layer().socket().close(ec);
    });
  }

 protected:
  std::shared_ptr<QueuedConnection> self_ptr() override { return shared_from_this(); }

  void write_front() override {
    ws_.text(true);
    ws_.async_write(asio::buffer(outq_.front()),
                    [self = shared_from_this()](const beast::error_code& ec, std::size_t) { self->on_written(ec); });
  }

 private:
  void on_request(const beast::error_code& ec) {
    if (ec) return;
    if (!websocket::is_upgrade(request_) || request_.target() != "/ws") {
      auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
      res->prepare_payload();
      http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](const beast::error_code&, std::size_t) {
        beast::error_code ignored;
        self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ignored);
        self->ws_.next_layer().socket().close(ignored);
      });
      return;
    }
    ws_.read_message_max(hub_.max_line_bytes());
    ws_.async_accept(request_, [self = shared_from_this()](const beast::error_code& e) { self->on_accept(e); });
  }

  void on_accept(const beast::error_code& ec) {
    if (ec) return;
    accepted_ = true;
    buf_.consume(buf_.size());
    id_ = hub_.attach(shared_from_this());
    read_next();
  }

  void read_next() {
    ws_.async_read(buf_, [self = shared_from_this()](const beast::error_code& ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(const beast::error_code& ec) {
    if (ec == websocket::error::message_too_big) {
      hub_.reject_oversized(id_);
      return;
    }
    if (ec) {
      hub_.detach(id_);
      return;
    }
    const std::string frame = beast::buffers_to_string(buf_.data());
    buf_.consume(buf_.size());
    // One line per frame is expected; tolerate several.
    std::size_t start = 0;
    while (start < frame.size()) {
      std::size_t end = frame.find('\n', start);
      if (end == std::string::npos) end = frame.size();
      std::string_view line(frame.data() + start, end - start);
      if (line.find_first_not_of("\r") != std::string_view::npos) hub_.receive(id_, line);
      start = end + 1;
    }
    read_next();
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionHub& hub_;
  beast::flat_buffer buf_;
  http::request<http::string_body> request_;
  std::uint64_t id_ = 0;
  bool accepted_ = false;
  bool close_started_ = false;
};

}  // namespace

struct NetServer::Impl {
  explicit Impl(SessionHub& h) : hub(h), tcp_acceptor(io), ws_acceptor(io) {}

  SessionHub& hub;
  asio::io_context io;
  tcp::acceptor tcp_acceptor;
  tcp::acceptor ws_acceptor;
  std::thread thread;
  std::mutex mutex;
  std::vector<std::weak_ptr<QueuedConnection>> sessions;
  std::size_t max_queued = 1000;
  std::uint16_t tcp_port = 0;
  std::uint16_t ws_port = 0;

  void bind(tcp::acceptor& acceptor, const std::string& address, std::uint16_t port) {
    boost::system::error_code ec;
    const tcp::endpoint ep(asio::ip::make_address(address, ec), port);
    if (ec) throw BindError(port, "invalid listen address '" + address + "'");
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
      boost::system::error_code ignored;
      acceptor.close(ignored);
      throw BindError(port, "cannot listen on port " + std::to_string(port) + ": " + ec.message());
    }
  }

  template <typename Session>
  void accept_loop(tcp::acceptor& acceptor) {
    acceptor.async_accept([this, &acceptor](const boost::system::error_code& ec, tcp::socket socket) {
      if (ec) return;
      auto s = std::make_shared<Session>(std::move(socket), hub, io, max_queued);
      {
        std::lock_guard lock(mutex);
        sessions.push_back(s);
      }
      s->start();
      accept_loop<Session>(acceptor);
    });
  }
};

NetServer::NetServer(SessionHub& hub) : impl_(std::make_unique<Impl>(hub)) {}

NetServer::~NetServer() { stop(); }

void NetServer::start(std::uint16_t tcp_port, std::uint16_t ws_port, const std::string& address) {
  impl_->bind(impl_->tcp_acceptor, address, tcp_port);
  try {
    impl_->bind(impl_->ws_acceptor, address, ws_port);
  } catch (...) {
    boost::system::error_code ignored;
    impl_->tcp_acceptor.close(ignored);
    throw;
  }
  impl_->tcp_port = impl_->tcp_acceptor.local_endpoint().port();
  impl_->ws_port = impl_->ws_acceptor.local_endpoint().port();
  impl_->accept_loop<TcpSession>(impl_->tcp_acceptor);
  impl_->accept_loop<WsSession>(impl_->ws_acceptor);
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void NetServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  asio::post(impl_->io, [this] {
    boost::system::error_code ignored;
    impl_->tcp_acceptor.close(ignored);
    impl_->ws_acceptor.close(ignored);
    std::lock_guard lock(impl_->mutex);
    for (auto& weak : impl_->sessions)
      if (auto s = weak.lock()) s->kill();
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  impl_->io.stop();
  impl_->thread.join();
}

std::uint16_t NetServer::tcp_port() const { return impl_->tcp_port; }
std::uint16_t NetServer::ws_port() const { return impl_->ws_port; }

}  // namespace gazeguide
