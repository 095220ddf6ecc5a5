#include "asab/bridge_client.hpp"

#include <array>

#include <boost/asio.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace asab::bridge {

namespace net = boost::asio;
using tcp = net::ip::tcp;

struct BridgeClient::Io {
  net::io_context io;
  tcp::socket socket{io};
};

namespace {

std::uint64_t wall_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
}

}  // namespace

BridgeClient::BridgeClient(ClientOptions options) : options_(std::move(options)) {}

BridgeClient::~BridgeClient() { close(); }

void BridgeClient::connect() {
  close();
  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, options_.connect_attempts); ++attempt) {
    auto io = std::make_unique<Io>();
    boost::system::error_code ec;
    tcp::resolver resolver(io->io);
    const auto endpoints = resolver.resolve(options_.host, std::to_string(options_.port), ec);
    if (!ec) net::connect(io->socket, endpoints, ec);
    if (!ec) {
      io->socket.set_option(tcp::no_delay(true), ec);
      io_ = std::move(io);
      {
        std::lock_guard lock(mu_);
        connected_ = true;
        stopping_ = false;
      }
      send({wall_ns(), "", 0, wire::Hello{options_.role, options_.name}});
      reader_ = std::thread([this] { reader_loop(); });
      if (options_.send_heartbeats) heartbeat_ = std::thread([this] { heartbeat_loop(); });
      spdlog::debug("{} connected to {}:{}", options_.name, options_.host, options_.port);
      return;
    }
    last_error = ec.message();
    if (attempt < options_.connect_attempts) {
      spdlog::warn("{}: bridge {}:{} unreachable ({}), retrying in {} ms", options_.name, options_.host, options_.port,
                   last_error, backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, options_.max_backoff);
    }
  }
  throw BridgeError(fmt::format("cannot reach bridge at {}:{} after {} attempts: {}", options_.host, options_.port,
                                options_.connect_attempts, last_error));
}

void BridgeClient::close() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    connected_ = false;
  }
  cv_.notify_all();
  if (io_) {
    boost::system::error_code ec;
    io_->socket.shutdown(tcp::socket::shutdown_both, ec);
  }
  if (reader_.joinable()) reader_.join();
  if (heartbeat_.joinable()) heartbeat_.join();
  if (io_) {
    boost::system::error_code ec;
    io_->socket.close(ec);
    io_.reset();
  }
}

bool BridgeClient::connected() const {
  std::lock_guard lock(mu_);
  return connected_;
}

void BridgeClient::send(const wire::WireMessage& msg) {
  const auto bytes = wire::encode(msg);
  send_raw(bytes);
}

void BridgeClient::send_raw(std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(write_mu_);
  if (!io_ || !connected()) throw BridgeError("bridge client is not connected");
  boost::system::error_code ec;
  net::write(io_->socket, net::buffer(bytes.data(), bytes.size()), ec);
  if (ec) {
    {
      std::lock_guard l(mu_);
      connected_ = false;
    }
    cv_.notify_all();
    throw BridgeError(fmt::format("write to bridge failed: {}", ec.message()));
  }
}

void BridgeClient::subscribe(const std::string& topic) { send({wall_ns(), "", 0, wire::Subscribe{topic, true}}); }

void BridgeClient::unsubscribe(const std::string& topic) { send({wall_ns(), "", 0, wire::Subscribe{topic, false}}); }

std::optional<wire::WireMessage> BridgeClient::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !inbox_.empty() || !connected_ || stopping_; });
  if (inbox_.empty()) return std::nullopt;
  wire::WireMessage m = std::move(inbox_.front());
  inbox_.pop_front();
  return m;
}

ClientStats BridgeClient::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void BridgeClient::reader_loop() {
  wire::FrameReader reader;
  std::vector<std::uint8_t> buf(64 * 1024);
  for (;;) {
    boost::system::error_code ec;
    const std::size_t n = io_->socket.read_some(net::buffer(buf), ec);
    if (ec) break;
    reader.feed(std::span<const std::uint8_t>(buf.data(), n));
    try {
      while (auto frame = reader.next_frame()) {
        try {
          wire::WireMessage m = wire::decode(*frame);
          std::lock_guard lock(mu_);
          if (m.type() == wire::MessageType::Heartbeat) {
            ++stats_.heartbeats;
            continue;
          }
          ++stats_.received;
          if (inbox_.size() >= options_.inbox_limit) {
            inbox_.pop_front();
            ++stats_.inbox_dropped;
          }
          inbox_.push_back(std::move(m));
        } catch (const wire::ProtocolError& e) {
          std::lock_guard lock(mu_);
          ++stats_.bad_frames;
          spdlog::warn("{}: bad frame from bridge: {}", options_.name, e.what());
        }
        cv_.notify_all();
      }
    } catch (const wire::ProtocolError& e) {
      spdlog::warn("{}: unrecoverable stream from bridge: {}", options_.name, e.what());
      break;
    }
  }
  {
    std::lock_guard lock(mu_);
    connected_ = false;
  }
  cv_.notify_all();
}

void BridgeClient::heartbeat_loop() {
  std::unique_lock lock(mu_);
  while (!stopping_ && connected_) {
    cv_.wait_for(lock, options_.heartbeat_interval, [&] { return stopping_ || !connected_; });
    if (stopping_ || !connected_) break;
    lock.unlock();
    try {
      send(wire::make_heartbeat(wall_ns()));
    } catch (const BridgeError&) {
      lock.lock();
      break;
    }
    lock.lock();
  }
}

}  // namespace asab::bridge
