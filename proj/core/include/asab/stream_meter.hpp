#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <span>
#include <vector>

namespace asab::wire {

struct FrameEvent {
  std::uint32_t seq = 0;
  std::uint64_t send_ts_ns = 0;
  std::uint64_t recv_ts_ns = 0;
};

struct StreamStats {
  double fps = 0.0;
  double latency_mean_s = 0.0;
  double latency_p95_s = 0.0;
  double loss_fraction = 0.0;
  std::size_t frames = 0;
};

/// Stats over the events whose recv_ts falls in the `window_ns` ending at the
/// latest receive time. fps = frames / window length; loss comes from gaps in
/// the seq range seen inside the window.
StreamStats meter(std::span<const FrameEvent> events, std::uint64_t window_ns);

/// Single-writer accumulator; snapshot() hands out copies.
class StreamMeter {
 public:
  explicit StreamMeter(std::uint64_t window_ns = 1'000'000'000, std::size_t max_events = 1 << 16);

  void record(const FrameEvent& e);
  StreamStats snapshot() const;
  std::vector<FrameEvent> events() const;

 private:
  std::uint64_t window_ns_;
  std::size_t max_events_;
  mutable std::mutex mu_;
  std::deque<FrameEvent> events_;
};

/// Nearest-rank percentile (q in [0, 1]) of unsorted values; 0 for empty input.
double percentile(std::vector<double> values, double q);

}  // namespace asab::wire
