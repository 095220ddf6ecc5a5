#include "asab/bridge_server.hpp"

#include <array>
#include <atomic>
#include <deque>
#include <map>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace asab::bridge {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;
using Bytes = std::shared_ptr<const std::vector<std::uint8_t>>;

namespace {

std::uint64_t wall_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
}

Bytes heartbeat_frame() {
  return std::make_shared<const std::vector<std::uint8_t>>(wire::encode(wire::make_heartbeat(wall_ns())));
}

bool is_data(wire::MessageType t) {
  using wire::MessageType;
  return t == MessageType::PointCloud || t == MessageType::Pose || t == MessageType::TagObservation ||
         t == MessageType::StreamFrame;
}

}  // namespace

class Connection;

struct Shared {
  Shared(Hub& h, ServerOptions o) : hub(h), options(std::move(o)) {}
  Hub& hub;
  ServerOptions options;
  std::atomic<std::uint64_t> accepted{0};
  std::atomic<std::uint64_t> silent_drops{0};
  std::atomic<std::uint64_t> bad_frames{0};
  std::mutex mu;
  std::map<Connection*, std::weak_ptr<Connection>> live;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(Shared& shared, net::any_io_executor ex, TransportKind kind)
      : shared_(shared), ex_(std::move(ex)), timer_(ex_), kind_(kind) {}
  virtual ~Connection() {
    if (session_) shared_.hub.close_session(session_->id());
  }

  void start() {
    session_ = shared_.hub.open_session(peer_, wire::Role::Both, kind_);
    std::weak_ptr<Connection> weak = shared_from_this();
    session_->mailbox().set_notify([weak] {
      if (auto self = weak.lock()) net::post(self->ex_, [self] { self->kick(); });
    });
    {
      std::lock_guard lock(shared_.mu);
      shared_.live[this] = weak;
    }
    last_heartbeat_ = Clock::now();
    spdlog::info("session {} connected over {} from {}", session_->id(), transport_name(kind_), peer_);
    schedule_heartbeat();
    begin();
  }

  /// Safe from any thread.
  void close_async() {
    net::post(ex_, [self = shared_from_this()] { self->close("server stopping"); });
  }

 protected:
  virtual void begin() = 0;
  virtual void write(const Bytes& bytes, bool text) = 0;
  virtual void close_transport() = 0;

  void close(std::string_view reason) {
    if (closed_) return;
    closed_ = true;
    timer_.cancel();
    spdlog::info("session {} closed: {}", session_ ? session_->id() : 0, reason);
    if (session_) {
      shared_.hub.close_session(session_->id());
      session_.reset();
    }
    close_transport();
    std::lock_guard lock(shared_.mu);
    shared_.live.erase(this);
  }

  void on_written(const beast::error_code& ec) {
    writing_ = false;
    if (ec) {
      close(ec.message());
      return;
    }
    kick();
  }

  void kick() {
    if (writing_ || closed_ || !session_) return;
    Bytes next;
    bool text = false;
    if (!control_.empty()) {
      next = control_.front().first;
      text = control_.front().second;
      control_.pop_front();
    } else if (auto e = session_->mailbox().pop()) {
      next = e->frame;
    } else {
      return;
    }
    writing_ = true;
    write(next, text);
  }

  void send_control(Bytes bytes, bool text = false) {
    control_.emplace_back(std::move(bytes), text);
    kick();
  }

  void on_frame(std::span<const std::uint8_t> bytes) {
    wire::WireMessage msg;
    try {
      msg = wire::decode(bytes);
    } catch (const wire::ProtocolError& e) {
      shared_.bad_frames.fetch_add(1);
      spdlog::warn("session {}: dropped bad frame ({})", session_->id(), e.what());
      return;
    }
    handle(msg);
  }

  void handle(const wire::WireMessage& msg) {
    using wire::MessageType;
    try {
      switch (msg.type()) {
        case MessageType::Heartbeat:
          last_heartbeat_ = Clock::now();
          return;
        case MessageType::Hello: {
          const auto& h = std::get<wire::Hello>(msg.body);
          session_->set_identity(h.client_name, h.role);
          spdlog::info("session {} is '{}'", session_->id(), h.client_name);
          return;
        }
        case MessageType::Subscribe: {
          const auto& s = std::get<wire::Subscribe>(msg.body);
          if (s.subscribe) {
            shared_.hub.subscribe(session_->id(), s.topic);
          } else {
            shared_.hub.unsubscribe(session_->id(), s.topic);
          }
          return;
        }
        case MessageType::Twist:
          shared_.hub.route_teleop(msg);
          return;
        default:
          break;
      }
      if (is_data(msg.type()) && session_->role() == wire::Role::Subscriber) {
        spdlog::warn("session {}: subscriber tried to publish {}", session_->id(), wire::type_name(msg.type()));
        return;
      }
      if (const auto topic = shared_.hub.topic_for(msg.type())) shared_.hub.publish(*topic, msg);
    } catch (const std::exception& e) {
      spdlog::warn("session {}: {}", session_->id(), e.what());
      report_error(e.what());
    }
  }

  virtual void report_error(std::string_view) {}

  void schedule_heartbeat() {
    timer_.expires_after(shared_.options.heartbeat_interval);
    timer_.async_wait([self = shared_from_this()](const beast::error_code& ec) {
      if (ec || self->closed_) return;
      const auto limit = shared_limit(self->shared_.options);
      if (Clock::now() - self->last_heartbeat_ > limit) {
        self->shared_.silent_drops.fetch_add(1);
        self->close("missed heartbeats");
        return;
      }
      // A stalled peer must not pile up heartbeats.
      if (self->control_.size() < 2) self->send_control(heartbeat_frame());
      self->schedule_heartbeat();
    });
  }

  static Clock::duration shared_limit(const ServerOptions& o) {
    return o.heartbeat_interval * o.missed_heartbeats;
  }

  Shared& shared_;
  net::any_io_executor ex_;
  net::steady_timer timer_;
  TransportKind kind_;
  std::string peer_;
  std::shared_ptr<Session> session_;
  std::deque<std::pair<Bytes, bool>> control_;
  bool writing_ = false;
  bool closed_ = false;
  Clock::time_point last_heartbeat_;
};

class TcpConnection final : public Connection {
 public:
  TcpConnection(Shared& shared, tcp::socket socket)
      : Connection(shared, socket.get_executor(), TransportKind::FramedStream), socket_(std::move(socket)) {
    beast::error_code ec;
    const auto ep = socket_.remote_endpoint(ec);
    peer_ = ec ? "?" : ep.address().to_string() + ":" + std::to_string(ep.port());
    socket_.set_option(tcp::no_delay(true), ec);
  }

 private:
  void begin() override { read(); }

  void read() {
    socket_.async_read_some(net::buffer(buf_), [self = shared(), this](const beast::error_code& ec, std::size_t n) {
      if (closed_) return;
      if (ec) {
        close(ec == net::error::eof ? "peer disconnected" : ec.message());
        return;
      }
      reader_.feed(std::span<const std::uint8_t>(buf_.data(), n));
      try {
        while (auto frame = reader_.next_frame()) {
          on_frame(*frame);
          if (closed_) return;
        }
      } catch (const wire::ProtocolError& e) {
        shared_.bad_frames.fetch_add(1);
        close(fmt::format("unrecoverable stream error: {}", e.what()));
        return;
      }
      read();
    });
  }

  void write(const Bytes& bytes, bool) override {
    net::async_write(socket_, net::buffer(*bytes),
                     [self = shared(), bytes](const beast::error_code& ec, std::size_t) { self->on_written(ec); });
  }

  void close_transport() override {
    beast::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

  std::shared_ptr<TcpConnection> shared() { return std::static_pointer_cast<TcpConnection>(shared_from_this()); }

  tcp::socket socket_;
  std::array<std::uint8_t, 64 * 1024> buf_{};
  wire::FrameReader reader_;
};

class WsConnection final : public Connection {
 public:
  WsConnection(Shared& shared, tcp::socket socket)
      : Connection(shared, socket.get_executor(), TransportKind::BrowserGateway), ws_(std::move(socket)) {
    beast::error_code ec;
    const auto ep = beast::get_lowest_layer(ws_).socket().remote_endpoint(ec);
    peer_ = ec ? "?" : ep.address().to_string() + ":" + std::to_string(ep.port());
  }

 private:
  void begin() override {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(wire::kMaxPayload + wire::kHeaderSize);
    ws_.async_accept([self = shared(), this](const beast::error_code& ec) {
      if (closed_) return;
      if (ec) {
        close(fmt::format("handshake failed: {}", ec.message()));
        return;
      }
      accepted_ = true;
      read();
      kick();
    });
  }

  void read() {
    ws_.async_read(rbuf_, [self = shared(), this](const beast::error_code& ec, std::size_t) {
      if (closed_) return;
      if (ec) {
        close(ec == websocket::error::closed ? "peer disconnected" : ec.message());
        return;
      }
      const auto data = rbuf_.cdata();
      if (ws_.got_text()) {
        handle_json(beast::buffers_to_string(data));
      } else {
        on_frame(std::span<const std::uint8_t>(static_cast<const std::uint8_t*>(data.data()), data.size()));
      }
      rbuf_.consume(rbuf_.size());
      if (!closed_) read();
    });
  }

  void handle_json(const std::string& text) {
    using nlohmann::json;
    try {
      const json j = json::parse(text);
      const std::string op = j.at("op").get<std::string>();
      if (op == "heartbeat") {
        last_heartbeat_ = Clock::now();
      } else if (op == "subscribe" || op == "unsubscribe") {
        handle({wall_ns(), "", 0, wire::Subscribe{j.at("topic").get<std::string>(), op == "subscribe"}});
      } else if (op == "twist") {
        handle({wall_ns(), "viewer", 0, wire::Twist{j.at("linear").get<double>(), j.at("angular").get<double>()}});
      } else if (op == "mode") {
        const ModeKind kind = ShadingMode::kind_from_name(j.at("mode").get<std::string>());
        ShadingMode mode = ShadingMode::defaults(kind);
        if (j.contains("params")) {
          const auto values = j.at("params").get<std::vector<double>>();
          mode = ShadingMode::from_parameters(kind, values);
        }
        handle({wall_ns(), "viewer", 0, wire::ModeChange{mode}});
      } else {
        report_error(fmt::format("unknown op '{}'", op));
      }
    } catch (const std::exception& e) {
      spdlog::warn("session {}: bad control message: {}", session_ ? session_->id() : 0, e.what());
      report_error(e.what());
    }
  }

  void report_error(std::string_view what) override {
    const std::string body = nlohmann::json{{"error", std::string(what)}}.dump();
    send_control(std::make_shared<const std::vector<std::uint8_t>>(body.begin(), body.end()), true);
  }

  void write(const Bytes& bytes, bool text) override {
    if (!accepted_) {
      // Handshake still running: put it back and retry once it completes.
      writing_ = false;
      control_.emplace_front(bytes, text);
      return;
    }
    ws_.text(text);
    ws_.binary(!text);
    ws_.async_write(net::buffer(*bytes),
                    [self = shared(), bytes](const beast::error_code& ec, std::size_t) { self->on_written(ec); });
  }

  void close_transport() override {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  std::shared_ptr<WsConnection> shared() { return std::static_pointer_cast<WsConnection>(shared_from_this()); }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer rbuf_;
  bool accepted_ = false;
};

template <class Conn>
class Listener : public std::enable_shared_from_this<Listener<Conn>> {
 public:
  Listener(net::io_context& io, Shared& shared, const tcp::endpoint& ep) : io_(io), shared_(shared), acceptor_(io) {
    beast::error_code ec;
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
      throw std::runtime_error(fmt::format("cannot listen on {}:{}: {}", ep.address().to_string(), ep.port(),
                                           ec.message()));
    }
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void run() { accept(); }

  void close() {
    net::post(acceptor_.get_executor(), [self = this->shared_from_this()] {
      beast::error_code ec;
      self->acceptor_.close(ec);
    });
  }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(io_), [self = this->shared_from_this()](const beast::error_code& ec,
                                                                                    tcp::socket socket) {
      if (!ec) {
        self->shared_.accepted.fetch_add(1);
        std::make_shared<Conn>(self->shared_, std::move(socket))->start();
      } else if (ec == net::error::operation_aborted) {
        return;
      }
      if (self->acceptor_.is_open()) self->accept();
    });
  }

  net::io_context& io_;
  Shared& shared_;
  tcp::acceptor acceptor_;
};

struct BridgeServer::Impl {
  Impl(Hub& hub, ServerOptions options) : shared(hub, std::move(options)) {}

  // Declared first so pending handlers, which reference it, die before it.
  Shared shared;
  net::io_context io;
  std::shared_ptr<Listener<TcpConnection>> tcp_listener;
  std::shared_ptr<Listener<WsConnection>> ws_listener;
  std::uint16_t tcp_port = 0;
  std::uint16_t ws_port = 0;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> guard;
  std::vector<std::thread> threads;
  bool running = false;
};

BridgeServer::BridgeServer(Hub& hub, ServerOptions options) : impl_(std::make_unique<Impl>(hub, std::move(options))) {}

BridgeServer::~BridgeServer() { stop(); }

void BridgeServer::start() {
  if (impl_->running) return;
  const ServerOptions& o = impl_->shared.options;
  if (o.heartbeat_interval.count() <= 0 || o.missed_heartbeats < 1 || o.io_threads < 1) {
    throw std::invalid_argument("heartbeat interval, missed heartbeat limit and io threads must be positive");
  }
  const auto address = net::ip::make_address(o.bind_address);
  impl_->tcp_listener = std::make_shared<Listener<TcpConnection>>(impl_->io, impl_->shared, tcp::endpoint{address, o.tcp_port});
  impl_->tcp_port = impl_->tcp_listener->port();
  if (o.enable_gateway) {
    impl_->ws_listener = std::make_shared<Listener<WsConnection>>(impl_->io, impl_->shared, tcp::endpoint{address, o.ws_port});
    impl_->ws_port = impl_->ws_listener->port();
  }
  impl_->tcp_listener->run();
  if (impl_->ws_listener) impl_->ws_listener->run();
  impl_->guard.emplace(impl_->io.get_executor());
  for (std::size_t i = 0; i < o.io_threads; ++i) {
    impl_->threads.emplace_back([this] { impl_->io.run(); });
  }
  impl_->running = true;
  spdlog::info("bridge listening on {}:{} (framed){}", o.bind_address, impl_->tcp_port,
               o.enable_gateway ? fmt::format(" and {}:{} (gateway)", o.bind_address, impl_->ws_port) : "");
}

void BridgeServer::stop() {
  if (!impl_->running) return;
  impl_->running = false;
  impl_->tcp_listener->close();
  if (impl_->ws_listener) impl_->ws_listener->close();
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(impl_->shared.mu);
    for (auto& [ptr, weak] : impl_->shared.live) {
      if (auto c = weak.lock()) conns.push_back(c);
    }
  }
  for (auto& c : conns) c->close_async();
  conns.clear();
  impl_->guard.reset();
  const auto deadline = Clock::now() + std::chrono::seconds(2);
  while (!impl_->io.stopped() && Clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  impl_->io.stop();
  for (auto& t : impl_->threads) t.join();
  impl_->threads.clear();
}

std::uint16_t BridgeServer::tcp_port() const { return impl_->tcp_port; }
std::uint16_t BridgeServer::ws_port() const { return impl_->ws_port; }
Hub& BridgeServer::hub() { return impl_->shared.hub; }

ServerStats BridgeServer::stats() const {
  ServerStats s;
  {
    std::lock_guard lock(impl_->shared.mu);
    s.open_connections = impl_->shared.live.size();
  }
  s.accepted = impl_->shared.accepted.load();
  s.dropped_for_silence = impl_->shared.silent_drops.load();
  s.bad_frames = impl_->shared.bad_frames.load();
  return s;
}

}  // namespace asab::bridge
