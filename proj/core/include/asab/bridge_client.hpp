#pragma once

// Blocking client for the framed TCP transport. A background thread reads
// frames into an inbox; another sends heartbeats.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>

#include "asab/hub.hpp"
#include "asab/wire.hpp"

namespace asab::bridge {

struct ClientOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 9870;
  std::string name = "client";
  wire::Role role = wire::Role::Both;
  std::chrono::milliseconds heartbeat_interval{1000};
  bool send_heartbeats = true;
  int connect_attempts = 10;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds max_backoff{2000};
  std::size_t inbox_limit = 4096;  // oldest messages are dropped beyond this
};

struct ClientStats {
  std::uint64_t received = 0;
  std::uint64_t heartbeats = 0;
  std::uint64_t bad_frames = 0;
  std::uint64_t inbox_dropped = 0;
};

class BridgeClient {
 public:
  explicit BridgeClient(ClientOptions options);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  /// Connects and sends Hello, retrying with exponential backoff. Throws
  /// BridgeError once the attempts are exhausted.
  void connect();
  void close();
  bool connected() const;

  /// Thread-safe. Throws BridgeError if not connected.
  void send(const wire::WireMessage& msg);
  void send_raw(std::span<const std::uint8_t> bytes);
  void subscribe(const std::string& topic);
  void unsubscribe(const std::string& topic);

  /// Next non-heartbeat message, waiting up to `timeout`.
  std::optional<wire::WireMessage> receive(std::chrono::milliseconds timeout);

  ClientStats stats() const;
  const ClientOptions& options() const { return options_; }

 private:
  struct Io;

  void reader_loop();
  void heartbeat_loop();

  ClientOptions options_;
  std::unique_ptr<Io> io_;
  std::mutex write_mu_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<wire::WireMessage> inbox_;
  ClientStats stats_;
  bool connected_ = false;
  bool stopping_ = false;
  std::thread reader_;
  std::thread heartbeat_;
};

}  // namespace asab::bridge
