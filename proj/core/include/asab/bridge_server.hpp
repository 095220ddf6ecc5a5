#pragma once

// Network front ends for the hub: a framed TCP listener and a WebSocket
// gateway for browsers. Both run on one Asio io_context.
//
// Gateway messages: binary = exactly one wire frame (both directions);
// text = control JSON:
//   {"op":"subscribe","topic":"map/cloud"}   {"op":"unsubscribe","topic":...}
//   {"op":"twist","linear":0.5,"angular":0.0}
//   {"op":"mode","mode":"natural","params":[2.0,4.0]}   (params optional)
//   {"op":"heartbeat"}

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "asab/hub.hpp"

namespace asab::bridge {

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t tcp_port = 9870;  // 0 picks a free port
  std::uint16_t ws_port = 9871;
  bool enable_gateway = true;
  std::chrono::milliseconds heartbeat_interval{1000};
  int missed_heartbeats = 5;
  std::size_t io_threads = 1;
};

struct ServerStats {
  std::size_t open_connections = 0;
  std::uint64_t accepted = 0;
  std::uint64_t dropped_for_silence = 0;
  std::uint64_t bad_frames = 0;
};

/// Owns the listeners and the io threads. Sessions are registered with the
/// hub on connect and closed on disconnect or after `missed_heartbeats`
/// heartbeat intervals without a heartbeat from the peer.
class BridgeServer {
 public:
  BridgeServer(Hub& hub, ServerOptions options);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  /// Binds and starts serving. Throws std::runtime_error if a port is unavailable.
  void start();
  void stop();

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;
  ServerStats stats() const;
  Hub& hub();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace asab::bridge
