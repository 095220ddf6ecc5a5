#include "asab/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <system_error>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <boost/asio.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "asab/stream_meter.hpp"
#include "asab/wire.hpp"

namespace asab::bench {

namespace net = boost::asio;
using net::ip::tcp;
using Clock = std::chrono::steady_clock;

namespace {

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count());
}

std::string join_pairs(const auto& map) {
  std::string out;
  for (const auto& [k, v] : map) {
    if (!out.empty()) out += ';';
    out += fmt::format("{}={}", k, v);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void BenchReport::summarize() {
  if (samples.empty()) {
    median = mean = p95 = min = max = 0.0;
    return;
  }
  median = wire::percentile(samples, 0.5);
  p95 = wire::percentile(samples, 0.95);
  mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  min = *lo;
  max = *hi;
}

std::string report_json(const BenchReport& r) {
  nlohmann::json j;
  j["bench"] = r.bench;
  j["variant"] = r.variant;
  j["quantity"] = r.quantity;
  j["config"] = r.config;
  j["samples"] = r.samples.size();
  j["median"] = r.median;
  j["mean"] = r.mean;
  j["p95"] = r.p95;
  j["min"] = r.min;
  j["max"] = r.max;
  j["duration_s"] = r.duration_s;
  j["seed"] = r.seed;
  j["metrics"] = r.metrics;
  return j.dump(2);
}

void write_report_csv_header(std::ostream& out) {
  out << "bench,variant,quantity,samples,median,mean,p95,min,max,duration_s,seed,metrics,config\n";
}

void write_report_csv_row(std::ostream& out, const BenchReport& r) {
  out << fmt::format("{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.6g},{},{},{}\n", csv_field(r.bench),
                     csv_field(r.variant), csv_field(r.quantity), r.samples.size(), r.median, r.mean, r.p95,
                     r.min, r.max, r.duration_s, r.seed, csv_field(join_pairs(r.metrics)),
                     csv_field(join_pairs(r.config)));
}

std::string_view transport_name(StreamTransport t) {
  return t == StreamTransport::NaivePerMessage ? "naive" : "chunked";
}

StreamTransport transport_from_name(std::string_view name) {
  if (name == "naive") return StreamTransport::NaivePerMessage;
  if (name == "chunked") return StreamTransport::ChunkedDatagram;
  throw std::invalid_argument(fmt::format("unknown transport '{}' (expected naive or chunked)", name));
}

namespace {

constexpr std::uint16_t kStreamId = 1;

struct StreamRun {
  std::vector<wire::FrameEvent> events;
  std::size_t sent = 0;
  std::uint64_t reassembly_lost = 0;
  int receive_buffer = 0;
};

// Sends one frame per tick; capture time is when the frame is produced.
template <class SendFn>
std::size_t produce(const StreamBenchConfig& c, SendFn&& send) {
  const auto frames = static_cast<std::size_t>(std::floor(c.rate_hz * c.duration_s));
  const auto period = std::chrono::duration<double>(1.0 / c.rate_hz);
  const auto start = Clock::now();
  for (std::size_t i = 0; i < frames; ++i) {
    std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(period * static_cast<double>(i)));
    send(static_cast<std::uint32_t>(i), now_ns());
  }
  return frames;
}

StreamRun run_naive(const StreamBenchConfig& c, const std::vector<std::uint8_t>& payload) {
  StreamRun run;
  net::io_context io;
  tcp::acceptor acceptor(io);
  boost::system::error_code ec;
  const tcp::endpoint ep(net::ip::make_address("127.0.0.1"), c.port);
  acceptor.open(ep.protocol());
  acceptor.bind(ep, ec);
  if (ec) throw std::runtime_error(fmt::format("port {} unavailable: {}", c.port, ec.message()));
  acceptor.listen();
  const std::uint16_t port = acceptor.local_endpoint().port();

  std::thread consumer([&] {
    tcp::socket s = acceptor.accept();
    net::socket_base::receive_buffer_size rb;
    s.get_option(rb);
    run.receive_buffer = rb.value();
    wire::FrameReader reader;
    std::vector<std::uint8_t> buf(1 << 16);
    while (true) {
      boost::system::error_code rec;
      const std::size_t n = s.read_some(net::buffer(buf), rec);
      if (rec) break;
      reader.feed({buf.data(), n});
      while (auto frame = reader.next_frame()) {
        const wire::WireMessage m = wire::decode(*frame);
        const auto& f = std::get<wire::StreamFrame>(m.body);
        run.events.push_back({f.seq, m.timestamp_ns, now_ns()});
      }
    }
  });

  net::io_context pio;
  tcp::socket out(pio);
  out.connect({net::ip::make_address("127.0.0.1"), port});
  run.sent = produce(c, [&](std::uint32_t seq, std::uint64_t ts) {
    const auto bytes = wire::encode({ts, "camera", 0, wire::StreamFrame{kStreamId, seq, payload}});
    net::write(out, net::buffer(bytes));
  });
  out.shutdown(tcp::socket::shutdown_send);
  consumer.join();
  return run;
}

// Datagrams go out and come in through batched syscalls, so one frame costs
// a handful of wakeups instead of one per chunk.
class UdpSocket {
 public:
  UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
  }
  ~UdpSocket() { ::close(fd_); }
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  int fd() const { return fd_; }

 private:
  int fd_;
};

sockaddr_in loopback(std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  return a;
}

void send_batch(int fd, const sockaddr_in& to, std::vector<std::vector<std::uint8_t>>& datagrams) {
  std::vector<iovec> iov(datagrams.size());
  std::vector<mmsghdr> msgs(datagrams.size());
  for (std::size_t i = 0; i < datagrams.size(); ++i) {
    iov[i] = {datagrams[i].data(), datagrams[i].size()};
    msgs[i] = {};
    msgs[i].msg_hdr.msg_name = const_cast<sockaddr_in*>(&to);
    msgs[i].msg_hdr.msg_namelen = sizeof(to);
    msgs[i].msg_hdr.msg_iov = &iov[i];
    msgs[i].msg_hdr.msg_iovlen = 1;
  }
  std::size_t done = 0;
  while (done < msgs.size()) {
    const int n = ::sendmmsg(fd, msgs.data() + done, static_cast<unsigned>(msgs.size() - done), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::system_error(errno, std::generic_category(), "sendmmsg");
    }
    done += static_cast<std::size_t>(n);
  }
}

StreamRun run_chunked(const StreamBenchConfig& c, const std::vector<std::uint8_t>& payload) {
  StreamRun run;
  UdpSocket in;
  ::setsockopt(in.fd(), SOL_SOCKET, SO_RCVBUF, &c.receive_buffer_bytes, sizeof(c.receive_buffer_bytes));
  sockaddr_in bind_addr = loopback(c.port);
  if (::bind(in.fd(), reinterpret_cast<sockaddr*>(&bind_addr), sizeof(bind_addr)) != 0) {
    throw std::runtime_error(fmt::format("port {} unavailable: {}", c.port, std::strerror(errno)));
  }
  socklen_t len = sizeof(run.receive_buffer);
  ::getsockopt(in.fd(), SOL_SOCKET, SO_RCVBUF, &run.receive_buffer, &len);
  sockaddr_in target{};
  len = sizeof(target);
  ::getsockname(in.fd(), reinterpret_cast<sockaddr*>(&target), &len);

  std::atomic<bool> stop{false};
  wire::Reassembler reassembler;
  std::thread consumer([&] {
    constexpr std::size_t kBatch = 256;
    std::vector<std::uint8_t> storage(kBatch * 2048);
    std::vector<iovec> iov(kBatch);
    std::vector<mmsghdr> msgs(kBatch);
    pollfd pfd{in.fd(), POLLIN, 0};
    while (!stop.load()) {
      if (::poll(&pfd, 1, 20) <= 0) continue;
      for (std::size_t i = 0; i < kBatch; ++i) {
        iov[i] = {storage.data() + i * 2048, 2048};
        msgs[i] = {};
        msgs[i].msg_hdr.msg_iov = &iov[i];
        msgs[i].msg_hdr.msg_iovlen = 1;
      }
      const int n = ::recvmmsg(in.fd(), msgs.data(), kBatch, MSG_DONTWAIT, nullptr);
      if (n <= 0) continue;
      const std::uint64_t t = now_ns();
      for (int i = 0; i < n; ++i) {
        try {
          const std::span<const std::uint8_t> d(storage.data() + static_cast<std::size_t>(i) * 2048, msgs[static_cast<std::size_t>(i)].msg_len);
          for (const auto& f : reassembler.push(wire::decode_datagram(d), t)) {
            run.events.push_back({f.seq, f.send_ts_ns, t});
          }
        } catch (const wire::ProtocolError& e) {
          spdlog::warn("bench-stream: bad datagram: {}", e.what());
        }
      }
    }
    const std::uint64_t t = now_ns();
    for (const auto& f : reassembler.expire(t + 1'000'000'000'000ull)) run.events.push_back({f.seq, f.send_ts_ns, t});
  });

  UdpSocket out;
  run.sent = produce(c, [&](std::uint32_t seq, std::uint64_t ts) {
    std::vector<std::vector<std::uint8_t>> datagrams;
    for (const auto& d : wire::chunk_stream_frame(payload, kStreamId, seq, ts, c.chunk_payload)) {
      datagrams.push_back(wire::encode_datagram(d));
    }
    send_batch(out.fd(), target, datagrams);
  });
  std::this_thread::sleep_for(c.drain_grace);
  stop = true;
  consumer.join();
  run.reassembly_lost = reassembler.stats().lost;
  return run;
}

}  // namespace

BenchReport bench_stream(const StreamBenchConfig& c) {
  if (!(c.rate_hz > 0.0) || !(c.duration_s > 0.0)) throw std::invalid_argument("rate and duration must be positive");
  if (c.payload_bytes == 0) throw std::invalid_argument("payload must be at least one byte");

  std::vector<std::uint8_t> payload(c.payload_bytes);
  std::mt19937_64 rng(c.seed);
  for (auto& b : payload) b = static_cast<std::uint8_t>(rng());

  const auto t0 = Clock::now();
  const StreamRun run =
      c.transport == StreamTransport::NaivePerMessage ? run_naive(c, payload) : run_chunked(c, payload);
  const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();

  BenchReport r;
  r.bench = "stream";
  r.variant = std::string(transport_name(c.transport));
  r.quantity = "latency_s";
  r.seed = c.seed;
  r.duration_s = elapsed;
  r.config = {{"payload_bytes", std::to_string(c.payload_bytes)},
              {"rate_hz", fmt::format("{}", c.rate_hz)},
              {"duration_s", fmt::format("{}", c.duration_s)},
              {"transport", r.variant},
              {"chunk_payload", std::to_string(c.chunk_payload)},
              {"receive_buffer_bytes", std::to_string(run.receive_buffer)},
              {"isolates", "transport only; no camera or codec"}};
  for (const auto& e : run.events) r.samples.push_back(static_cast<double>(e.recv_ts_ns - e.send_ts_ns) * 1e-9);
  r.summarize();

  const auto window = static_cast<std::uint64_t>(c.duration_s * 1e9);
  const wire::StreamStats stats = wire::meter(run.events, window);
  r.metrics["fps"] = stats.fps;
  r.metrics["frames_sent"] = static_cast<double>(run.sent);
  r.metrics["frames_received"] = static_cast<double>(run.events.size());
  r.metrics["loss_fraction"] =
      run.sent == 0 ? 0.0 : 1.0 - static_cast<double>(run.events.size()) / static_cast<double>(run.sent);
  r.metrics["reassembly_lost"] = static_cast<double>(run.reassembly_lost);
  return r;
}

BenchReport bench_batch(const BatchBenchConfig& c) {
  if (!(c.duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  const PointCloud cloud = random_cloud(c.count, c.extent_m, c.seed);
  const ShadingMode mode{DistanceRamp{}};
  // The cube sits 2 m in front of the viewer.
  const Pose viewer{{-2.0, 0.0, 0.0}, UnitQuaternion::identity()};

  BenchReport r;
  r.bench = "batch";
  r.variant = std::string(strategy_name(c.strategy));
  r.quantity = "batches_per_s";
  r.seed = c.seed;
  r.config = {{"count", std::to_string(c.count)},
              {"extent_m", fmt::format("{}", c.extent_m)},
              {"duration_s", fmt::format("{}", c.duration_s)},
              {"strategy", r.variant},
              {"mode", std::string(mode.name())}};
  if (const auto* ch = std::get_if<Chunked>(&c.strategy)) r.config["chunk"] = std::to_string(ch->n);

  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(c.duration_s));
  const auto start = Clock::now();
  std::uint32_t checksum = 0;
  std::size_t kept = 0;
  do {
    const auto t = Clock::now();
    const RenderBatch batch = shade_and_batch(cloud, mode, viewer, 0.0, c.strategy);
    const auto dt = std::chrono::duration<double>(Clock::now() - t).count();
    r.samples.push_back(1.0 / std::max(dt, 1e-9));
    if (r.samples.size() == 1) {
      const auto bytes = batch.bytes();
      checksum = wire::crc32({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
      kept = batch.count();
    }
  } while (Clock::now() < deadline);
  r.duration_s = std::chrono::duration<double>(Clock::now() - start).count();
  r.summarize();
  r.metrics["iterations"] = static_cast<double>(r.samples.size());
  r.metrics["kept_points"] = static_cast<double>(kept);
  r.metrics["batch_crc32"] = static_cast<double>(checksum);
  return r;
}

}  // namespace asab::bench
