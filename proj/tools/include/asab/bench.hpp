#pragma once

// Desk-scale benchmarks: streaming transport comparison and render batching.

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "asab/datagram.hpp"
#include "asab/render_batch.hpp"
#include "asab/shading.hpp"

namespace asab::bench {

struct BenchReport {
  std::string bench;
  std::string variant;
  std::string quantity;  // what the samples measure, with unit
  std::map<std::string, std::string> config;
  std::vector<double> samples;
  double median = 0.0;
  double mean = 0.0;
  double p95 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  /// Extra scalar results (fps, loss fraction, checksums).
  std::map<std::string, double> metrics;

  /// Fills median/mean/p95/min/max from samples.
  void summarize();
};

std::string report_json(const BenchReport& report);

/// Columns: bench, variant, quantity, samples, median, mean, p95, min, max,
/// duration_s, seed, metrics, config. The last two are "key=value" lists joined by ';'.
void write_report_csv_header(std::ostream& out);
void write_report_csv_row(std::ostream& out, const BenchReport& report);

enum class StreamTransport { NaivePerMessage, ChunkedDatagram };

std::string_view transport_name(StreamTransport t);
/// "naive" | "chunked".
StreamTransport transport_from_name(std::string_view name);

struct StreamBenchConfig {
  std::size_t payload_bytes = 200 * 1024;
  double rate_hz = 30.0;
  double duration_s = 5.0;
  StreamTransport transport = StreamTransport::ChunkedDatagram;
  std::uint64_t seed = 1;
  std::uint16_t port = 0;  // 0 picks a free loopback port
  std::size_t chunk_payload = wire::kMaxChunkPayload;
  int receive_buffer_bytes = 8 << 20;
  std::chrono::milliseconds drain_grace{500};
};

/// Loopback producer and consumer on separate threads. Samples are per-frame
/// latencies in seconds (capture to receipt); metrics hold fps and loss.
/// Throws std::runtime_error if the port is unavailable.
BenchReport bench_stream(const StreamBenchConfig& config);

/// Frame rates and mean latencies (s) read off the published plots for seven
/// camera/codec test setups; the last two used chunked datagrams.
inline constexpr double kReferenceFps[7] = {7, 7, 6, 8, 7, 30, 30};
inline constexpr double kReferenceLatencyS[7] = {2.95, 2.95, 4.85, 3.65, 3.55, 0.65, 0.75};

struct BatchBenchConfig {
  std::size_t count = 100'000;
  double extent_m = 0.5;
  double duration_s = 30.0;
  BatchStrategy strategy = SingleBuffer{};
  std::uint64_t seed = 1;
};

/// Repeatedly shades and packs one random cloud for duration_s. Samples are
/// per-iteration throughput in batches per second.
BenchReport bench_batch(const BatchBenchConfig& config);

}  // namespace asab::bench
