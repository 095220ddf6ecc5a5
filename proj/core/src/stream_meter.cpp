#include "asab/stream_meter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace asab::wire {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) {
    return 0.0;
  }
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size()));
  const auto idx = static_cast<std::size_t>(std::max(rank, 1.0)) - 1;
  return values[std::min(idx, values.size() - 1)];
}

StreamStats meter(std::span<const FrameEvent> events, std::uint64_t window_ns) {
  StreamStats s;
  if (events.empty() || window_ns == 0) {
    return s;
  }
  std::uint64_t latest = 0;
  for (const FrameEvent& e : events) latest = std::max(latest, e.recv_ts_ns);

  std::vector<double> latencies;
  std::set<std::uint32_t> seqs;
  for (const FrameEvent& e : events) {
    if (latest - e.recv_ts_ns < window_ns) {
      latencies.push_back(e.recv_ts_ns >= e.send_ts_ns
                              ? static_cast<double>(e.recv_ts_ns - e.send_ts_ns) * 1e-9
                              : 0.0);
      seqs.insert(e.seq);
    }
  }
  s.frames = latencies.size();
  s.fps = static_cast<double>(s.frames) / (static_cast<double>(window_ns) * 1e-9);
  double sum = 0.0;
  for (double l : latencies) sum += l;
  s.latency_mean_s = sum / static_cast<double>(latencies.size());
  s.latency_p95_s = percentile(latencies, 0.95);
  const double span = static_cast<double>(*seqs.rbegin()) - static_cast<double>(*seqs.begin()) + 1.0;
  s.loss_fraction = std::clamp(1.0 - static_cast<double>(seqs.size()) / span, 0.0, 1.0);
  return s;
}

StreamMeter::StreamMeter(std::uint64_t window_ns, std::size_t max_events)
    : window_ns_(window_ns), max_events_(std::max<std::size_t>(max_events, 1)) {}

void StreamMeter::record(const FrameEvent& e) {
  std::lock_guard lock(mu_);
  events_.push_back(e);
  while (events_.size() > max_events_) events_.pop_front();
}

StreamStats StreamMeter::snapshot() const {
  std::lock_guard lock(mu_);
  const std::vector<FrameEvent> copy(events_.begin(), events_.end());
  return meter(copy, window_ns_);
}

std::vector<FrameEvent> StreamMeter::events() const {
  std::lock_guard lock(mu_);
  return {events_.begin(), events_.end()};
}

}  // namespace asab::wire
