#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "asab/bench.hpp"
#include "asab/bridge_client.hpp"
#include "asab/bridge_server.hpp"
#include "asab/cloud_io.hpp"
#include "asab/fiducial.hpp"
#include "asab/sim_world.hpp"
#include "asab/wire.hpp"

using namespace asab;
using namespace std::chrono_literals;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t wall_ns() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("asab");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("ASAB_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real names.
    if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
  }
}

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 9870;
};

Address parse_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw UsageError(fmt::format("bridge address '{}' must look like host:port", text));
  }
  Address a;
  a.host = text.substr(0, colon);
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::out_of_range("port");
    a.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw UsageError(fmt::format("bad port in bridge address '{}'", text));
  }
  return a;
}

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("{}: '{}' is not a number", what, item));
    }
  }
  return out;
}

bridge::ClientOptions client_options(const Address& a, const std::string& name, wire::Role role) {
  bridge::ClientOptions o;
  o.host = a.host;
  o.port = a.port;
  o.name = name;
  o.role = role;
  return o;
}

/// Appends raw wire frames to a capture file.
class CaptureWriter {
 public:
  explicit CaptureWriter(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error(fmt::format("cannot write capture file {}", path));
  }
  void write(std::span<const std::uint8_t> frame) {
    if (out_.is_open()) out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
  }
  void write(const wire::WireMessage& m) {
    if (out_.is_open()) write(wire::encode(m));
  }

 private:
  std::ofstream out_;
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error(fmt::format("cannot write {}", path));
  return file;
}

// ---- serve

struct ServeArgs {
  std::string bind = "127.0.0.1";
  int port = 9870;
  int ws_port = 9871;
  bool no_gateway = false;
  int heartbeat_ms = 1000;
  int missed = 5;
  std::vector<std::string> depths;
  double duration_s = 0.0;
};

int run_serve(const ServeArgs& a) {
  std::vector<bridge::TopicSpec> topics = bridge::default_topics();
  for (const std::string& d : a.depths) {
    const auto eq = d.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("--depth expects topic=N, got '{}'", d));
    const std::string name = d.substr(0, eq);
    const auto values = parse_numbers(d.substr(eq + 1), "--depth");
    if (values.size() != 1 || values[0] < 1 || values[0] != std::floor(values[0])) {
      throw UsageError(fmt::format("--depth {}: depth must be a positive integer", name));
    }
    auto it = std::find_if(topics.begin(), topics.end(), [&](const auto& t) { return t.name == name; });
    if (it == topics.end()) throw UsageError(fmt::format("--depth: unknown topic '{}'", name));
    it->queue_depth = static_cast<std::size_t>(values[0]);
  }
  bridge::Hub hub(topics);
  bridge::ServerOptions o;
  o.bind_address = a.bind;
  o.tcp_port = static_cast<std::uint16_t>(a.port);
  o.ws_port = static_cast<std::uint16_t>(a.ws_port);
  o.enable_gateway = !a.no_gateway;
  o.heartbeat_interval = std::chrono::milliseconds(a.heartbeat_ms);
  o.missed_heartbeats = a.missed;
  bridge::BridgeServer server(hub, o);
  server.start();
  std::cout << "listening tcp " << a.bind << ":" << server.tcp_port();
  if (o.enable_gateway) std::cout << " ws " << a.bind << ":" << server.ws_port();
  std::cout << std::endl;

  boost::asio::io_context io;
  boost::asio::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code&, int sig) {
    spdlog::info("signal {}, shutting down", sig);
    io.stop();
  });
  if (a.duration_s > 0) {
    io.run_for(std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(a.duration_s)));
  } else {
    io.run();
  }
  const auto hs = hub.stats();
  spdlog::info("published {} delivered {} dropped {}", hs.published, hs.delivered, hs.dropped);
  server.stop();
  return 0;
}

// ---- simulate

struct SimulateArgs {
  std::string bridge = "127.0.0.1:9870";
  std::string scene;
  double rate_hz = 5.0;
  std::uint64_t ticks = 0;
  bool fast = false;
  std::uint64_t seed = 1;
  std::vector<std::string> waypoints;
  std::string capture;
  bool offline = false;
};

int run_simulate(const SimulateArgs& a) {
  Scene scene = a.scene.empty() ? default_scene() : load_scene(a.scene);
  SimConfig config;
  config.rate_hz = a.rate_hz;
  config.seed = a.seed;
  config.start_ns = wall_ns();
  for (const std::string& w : a.waypoints) {
    const auto xy = parse_numbers(w, "--waypoint");
    if (xy.size() != 2) throw UsageError(fmt::format("--waypoint expects x,y, got '{}'", w));
    config.waypoints.push_back({xy[0], xy[1]});
  }
  if (a.offline && a.ticks == 0) throw UsageError("--offline needs --ticks");
  Simulation sim(std::move(scene), config);
  CaptureWriter capture(a.capture);

  std::optional<bridge::BridgeClient> client;
  if (!a.offline) {
    client.emplace(client_options(parse_address(a.bridge), "simulator", wire::Role::Both));
    client->connect();
    client->subscribe(bridge::kTopicTwist);
  }

  std::atomic<bool> stop{false};
  boost::asio::io_context sig_io;
  boost::asio::signal_set signals(sig_io, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code& ec, int) {
    if (!ec) stop = true;
  });
  std::thread sig_thread([&] { sig_io.run(); });

  std::uint64_t clouds = 0;
  RunOptions opts;
  opts.ticks = a.ticks;
  opts.realtime = !a.fast;
  run_simulation(
      sim, opts,
      [&](const SimFrame& f) {
        for (const wire::WireMessage& m : f.messages(config)) {
          if (client) client->send(m);
          capture.write(m);
        }
        ++clouds;
        spdlog::debug("tick {}: {} points, {} tags", f.tick, f.cloud.size(), f.tags.size());
        return !stop.load() && (!client || client->connected());
      },
      [&]() -> std::optional<wire::Twist> {
        std::optional<wire::Twist> latest;
        if (!client) return latest;
        while (auto m = client->receive(0ms)) {
          if (const auto* t = std::get_if<wire::Twist>(&m->body)) latest = *t;
        }
        return latest;
      });
  sig_io.stop();
  sig_thread.join();
  spdlog::info("simulated {} ticks", clouds);
  if (client && !client->connected()) {
    std::cerr << "asab simulate: lost connection to the bridge\n";
    return 1;
  }
  return 0;
}

// ---- replay

struct ReplayArgs {
  std::string bridge = "127.0.0.1:9870";
  std::string file;
  double rate_hz = 1.0;
  double duration_s = 3.0;
  std::string frame_id;
};

int run_replay(const ReplayArgs& a) {
  if (!(a.rate_hz > 0) || !(a.duration_s > 0)) throw UsageError("--rate and --duration must be positive");
  const PointCloud cloud = load_cloud(a.file);
  const std::string frame = a.frame_id.empty() ? cloud.frame_id() : a.frame_id;
  bridge::BridgeClient client(client_options(parse_address(a.bridge), "replay", wire::Role::Publisher));
  client.connect();
  const auto count = static_cast<std::size_t>(std::floor(a.rate_hz * a.duration_s));
  const auto period = std::chrono::duration<double>(1.0 / a.rate_hz);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < count; ++i) {
    std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                              period * static_cast<double>(i)));
    client.send(wire::make_cloud_message(cloud.with_header(frame, wall_ns())));
  }
  // Let the last frame leave before the socket closes.
  std::this_thread::sleep_for(100ms);
  spdlog::info("replayed {} clouds of {} points", count, cloud.size());
  return 0;
}

// ---- shade

struct ShadeArgs {
  std::string file;
  std::string mode = "natural";
  std::string params;
  std::string viewer = "0,0,0";
  double time_s = 0.0;
  std::string out;
};

int run_shade(const ShadeArgs& a) {
  const PointCloud cloud = load_cloud(a.file);
  ModeKind kind;
  try {
    kind = ShadingMode::kind_from_name(a.mode);
  } catch (const ModeError& e) {
    throw UsageError(e.what());
  }
  ShadingMode mode = ShadingMode::defaults(kind);
  if (!a.params.empty()) mode = ShadingMode::from_parameters(kind, parse_numbers(a.params, "--params"));
  const auto v = parse_numbers(a.viewer, "--viewer");
  Pose viewer = Pose::identity();
  if (v.size() == 3) {
    viewer.translation = {v[0], v[1], v[2]};
  } else if (v.size() == 6) {
    viewer = {{v[0], v[1], v[2]}, UnitQuaternion::from_euler_zyx(deg_to_rad(v[3]), deg_to_rad(v[4]), deg_to_rad(v[5]))};
  } else {
    throw UsageError("--viewer expects x,y,z or x,y,z,yaw,pitch,roll (degrees)");
  }
  const auto shaded = shade(cloud, mode, viewer, a.time_s);
  std::ofstream file;
  write_shaded_ply(open_output(a.out, file), cloud, shaded);
  return 0;
}

// ---- benches

struct BenchStreamArgs {
  std::string transport = "both";
  std::size_t payload = 200 * 1024;
  double rate_hz = 30.0;
  double duration_s = 30.0;
  std::uint64_t seed = 1;
  int port = 0;
  std::string format = "table";
  std::string out;
};

int run_bench_stream(const BenchStreamArgs& a) {
  std::vector<bench::StreamTransport> transports;
  if (a.transport == "both") {
    transports = {bench::StreamTransport::NaivePerMessage, bench::StreamTransport::ChunkedDatagram};
  } else {
    transports = {bench::transport_from_name(a.transport)};
  }
  std::vector<bench::BenchReport> reports;
  for (auto t : transports) {
    bench::StreamBenchConfig c;
    c.payload_bytes = a.payload;
    c.rate_hz = a.rate_hz;
    c.duration_s = a.duration_s;
    c.transport = t;
    c.seed = a.seed;
    c.port = static_cast<std::uint16_t>(a.port);
    spdlog::info("bench-stream: {} for {} s", bench::transport_name(t), a.duration_s);
    reports.push_back(bench::bench_stream(c));
  }
  std::ofstream file;
  std::ostream& out = open_output(a.out, file);
  if (a.format == "csv") {
    bench::write_report_csv_header(out);
    for (const auto& r : reports) bench::write_report_csv_row(out, r);
  } else if (a.format == "json") {
    for (const auto& r : reports) out << bench::report_json(r) << "\n";
  } else {
    out << fmt::format("# stream transport bench: {} byte payloads at {} Hz for {} s on loopback, seed {}\n",
                       a.payload, a.rate_hz, a.duration_s, a.seed);
    out << "# transport only: no camera capture or video codec is involved\n";
    out << fmt::format("{:<10} {:>8} {:>14} {:>14} {:>14} {:>8}\n", "transport", "fps", "latency_mean_s",
                       "latency_p50_s", "latency_p95_s", "loss");
    for (const auto& r : reports) {
      out << fmt::format("{:<10} {:>8.2f} {:>14.6f} {:>14.6f} {:>14.6f} {:>8.4f}\n", r.variant, r.metrics.at("fps"),
                         r.mean, r.median, r.p95, r.metrics.at("loss_fraction"));
    }
    out << "# reference tests 1-7 (tests 6-7 used chunked datagrams)\n";
    out << "reference_fps      ";
    for (double v : bench::kReferenceFps) out << fmt::format(" {:>5g}", v);
    out << "\nreference_latency_s";
    for (double v : bench::kReferenceLatencyS) out << fmt::format(" {:>5g}", v);
    out << "\n";
  }
  return 0;
}

struct BenchBatchArgs {
  std::size_t count = 100'000;
  double extent_m = 0.5;
  double duration_s = 30.0;
  std::string strategy = "all";
  std::size_t chunk = 1023;
  std::uint64_t seed = 1;
  std::string format = "table";
  std::string out;
};

int run_bench_batch(const BenchBatchArgs& a) {
  std::vector<BatchStrategy> strategies;
  if (a.strategy == "all") {
    strategies = {PerPoint{}, Chunked{a.chunk}, SingleBuffer{}};
  } else {
    try {
      strategies = {strategy_from_name(a.strategy, a.chunk)};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  std::vector<bench::BenchReport> reports;
  for (const auto& s : strategies) {
    bench::BatchBenchConfig c;
    c.count = a.count;
    c.extent_m = a.extent_m;
    c.duration_s = a.duration_s;
    c.strategy = s;
    c.seed = a.seed;
    spdlog::info("bench-batch: {} for {} s", strategy_name(s), a.duration_s);
    reports.push_back(bench::bench_batch(c));
  }
  std::ofstream file;
  std::ostream& out = open_output(a.out, file);
  if (a.format == "csv") {
    bench::write_report_csv_header(out);
    for (const auto& r : reports) bench::write_report_csv_row(out, r);
  } else if (a.format == "json") {
    for (const auto& r : reports) out << bench::report_json(r) << "\n";
  } else {
    out << fmt::format("# batch bench: {} points in a {} m cube for {} s per strategy, seed {}\n", a.count,
                       a.extent_m, a.duration_s, a.seed);
    out << fmt::format("{:<10} {:>12} {:>14} {:>14} {:>12}\n", "strategy", "iterations", "median_per_s",
                       "mean_per_s", "batch_crc32");
    for (const auto& r : reports) {
      out << fmt::format("{:<10} {:>12} {:>14.3f} {:>14.3f} {:>12x}\n", r.variant, r.samples.size(), r.median, r.mean,
                         static_cast<std::uint32_t>(r.metrics.at("batch_crc32")));
    }
  }
  return 0;
}

struct BenchTagsArgs {
  std::uint64_t seed = 1;
  std::size_t trials = 5;
  double rate_hz = 30.0;
  double duration_s = 60.0;
  std::optional<double> drift_pos_m;
  std::optional<double> drift_rot_deg;
  std::string format = "csv";
  std::string out;
};

int run_bench_tags(const BenchTagsArgs& a) {
  auto configs = default_experiment_configs(a.seed);
  for (auto& c : configs) {
    if (c.mount != Mount::Handheld) continue;
    const double k = c.distance_m / 0.25;
    if (a.drift_pos_m) c.noise.drift_step_pos_m = *a.drift_pos_m * k;
    if (a.drift_rot_deg) c.noise.drift_step_rot_rad = deg_to_rad(*a.drift_rot_deg) * k;
  }
  ExperimentSettings s;
  s.trials = a.trials;
  s.rate_hz = a.rate_hz;
  s.duration_s = a.duration_s;
  const ExperimentReport report = run_averaging_experiment(configs, s);
  std::ofstream file;
  std::ostream& out = open_output(a.out, file);
  if (a.format == "json") {
    out << experiment_json(report) << "\n";
  } else {
    write_experiment_csv(out, report);
  }
  return 0;
}

// ---- protocol-dump and listen

int run_protocol_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path));
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  wire::FrameReader reader;
  reader.feed(bytes);
  std::size_t index = 0, offset = 0, bad = 0;
  try {
    while (auto frame = reader.next_frame()) {
      try {
        std::cout << fmt::format("#{} @{} {}\n", index, offset, wire::describe(wire::decode(*frame)));
      } catch (const wire::ProtocolError& e) {
        std::cout << fmt::format("#{} @{} bad frame: {}\n", index, offset, e.what());
        ++bad;
      }
      offset += frame->size();
      ++index;
    }
  } catch (const wire::ProtocolError& e) {
    std::cerr << fmt::format("asab protocol-dump: corrupt stream at byte {}: {}\n", offset, e.what());
    return 1;
  }
  if (reader.buffered() != 0) {
    std::cerr << fmt::format("asab protocol-dump: {} trailing bytes at byte {} form no complete frame\n",
                             reader.buffered(), offset);
    return 1;
  }
  if (bad != 0) {
    std::cerr << fmt::format("asab protocol-dump: {} of {} frames failed to decode\n", bad, index);
    return 1;
  }
  return 0;
}

struct ListenArgs {
  std::string bridge = "127.0.0.1:9870";
  std::vector<std::string> topics{bridge::kTopicCloud};
  std::size_t count = 0;
  double timeout_s = 0.0;
  std::string capture;
  bool quiet = false;
};

int run_listen(const ListenArgs& a) {
  bridge::BridgeClient client(client_options(parse_address(a.bridge), "listener", wire::Role::Subscriber));
  client.connect();
  for (const auto& t : a.topics) client.subscribe(t);
  CaptureWriter capture(a.capture);
  const auto deadline = a.timeout_s > 0 ? std::optional(std::chrono::steady_clock::now() +
                                                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                            std::chrono::duration<double>(a.timeout_s)))
                                        : std::nullopt;
  std::size_t received = 0;
  while (a.count == 0 || received < a.count) {
    if (deadline && std::chrono::steady_clock::now() >= deadline) break;
    if (!client.connected()) {
      std::cerr << "asab listen: bridge closed the connection\n";
      return 1;
    }
    auto m = client.receive(100ms);
    if (!m) continue;
    ++received;
    capture.write(*m);
    if (!a.quiet) std::cout << wire::describe(*m) << std::endl;
  }
  if (a.count != 0 && received < a.count) {
    std::cerr << fmt::format("asab listen: received {} of {} messages before the timeout\n", received, a.count);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"asab: point cloud bridge, simulator and benchmarks"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* sc = app.add_subcommand("serve", "Run the bridge (framed TCP and WebSocket gateway)");
  sc->add_option("--bind", serve.bind, "Listen address")->capture_default_str();
  sc->add_option("--port", serve.port, "Framed TCP port, 0 for any free port")->capture_default_str()->check(CLI::Range(0, 65535));
  sc->add_option("--ws-port", serve.ws_port, "WebSocket gateway port, 0 for any free port")->capture_default_str()->check(CLI::Range(0, 65535));
  sc->add_flag("--no-gateway", serve.no_gateway, "Disable the WebSocket gateway");
  sc->add_option("--heartbeat-ms", serve.heartbeat_ms, "Heartbeat interval")->capture_default_str()->check(CLI::Range(1, 3600000));
  sc->add_option("--missed-heartbeats", serve.missed, "Intervals of silence before a session is dropped")->capture_default_str()->check(CLI::Range(1, 1000));
  sc->add_option("--depth", serve.depths, "Queue depth override, topic=N (repeatable)");
  sc->add_option("--duration", serve.duration_s, "Stop after this many seconds (0 runs until SIGINT)")->capture_default_str()->check(CLI::NonNegativeNumber);

  SimulateArgs sim;
  auto* sm = app.add_subcommand("simulate", "Run the simulated robot and publish to a bridge");
  sm->add_option("--bridge", sim.bridge, "Bridge address host:port")->capture_default_str();
  sm->add_option("--scene", sim.scene, "Scene JSON (default: two-room scene)")->check(CLI::ExistingFile);
  sm->add_option("--rate", sim.rate_hz, "Frames per second")->capture_default_str()->check(CLI::PositiveNumber);
  sm->add_option("--ticks", sim.ticks, "Stop after this many frames (0 runs until SIGINT)")->capture_default_str();
  sm->add_flag("--fast", sim.fast, "Do not pace frames in real time");
  sm->add_option("--seed", sim.seed, "Sensor noise seed")->capture_default_str();
  sm->add_option("--waypoint", sim.waypoints, "Waypoint x,y (repeatable)");
  sm->add_option("--capture", sim.capture, "Also write every message to this capture file");
  sm->add_flag("--offline", sim.offline, "Do not connect to a bridge");

  ReplayArgs replay;
  auto* rp = app.add_subcommand("replay", "Publish a saved cloud repeatedly");
  rp->add_option("file", replay.file, "PLY or PCD file")->required()->check(CLI::ExistingFile);
  rp->add_option("--bridge", replay.bridge, "Bridge address host:port")->capture_default_str();
  rp->add_option("--rate", replay.rate_hz, "Messages per second")->capture_default_str()->check(CLI::PositiveNumber);
  rp->add_option("--duration", replay.duration_s, "Seconds")->capture_default_str()->check(CLI::PositiveNumber);
  rp->add_option("--frame-id", replay.frame_id, "Override the frame id");

  ShadeArgs shade_args;
  auto* sh = app.add_subcommand("shade", "Shade a cloud offline and write the kept points as PLY");
  sh->add_option("file", shade_args.file, "PLY or PCD file")->required()->check(CLI::ExistingFile);
  sh->add_option("--mode", shade_args.mode, "distance | axis | rainbow | natural | sonar")->capture_default_str();
  sh->add_option("--params", shade_args.params, "Comma separated mode parameters");
  sh->add_option("--viewer", shade_args.viewer, "x,y,z or x,y,z,yaw,pitch,roll in degrees")->capture_default_str();
  sh->add_option("--time", shade_args.time_s, "Time in seconds (sonar)")->capture_default_str();
  sh->add_option("--out", shade_args.out, "Output PLY (default stdout)");

  BenchStreamArgs bs;
  auto* bsc = app.add_subcommand("bench-stream", "Naive framed TCP vs chunked datagram streaming on loopback");
  bsc->add_option("--transport", bs.transport, "naive | chunked | both")->capture_default_str()->check(CLI::IsMember({"naive", "chunked", "both"}));
  bsc->add_option("--payload", bs.payload, "Payload bytes per frame")->capture_default_str()->check(CLI::Range(std::size_t{1}, std::size_t{64} << 20));
  bsc->add_option("--rate", bs.rate_hz, "Frames per second")->capture_default_str()->check(CLI::PositiveNumber);
  bsc->add_option("--duration", bs.duration_s, "Seconds per transport")->capture_default_str()->check(CLI::PositiveNumber);
  bsc->add_option("--seed", bs.seed, "Payload seed")->capture_default_str();
  bsc->add_option("--port", bs.port, "Loopback port, 0 for any")->capture_default_str()->check(CLI::Range(0, 65535));
  bsc->add_option("--format", bs.format, "table | csv | json")->capture_default_str()->check(CLI::IsMember({"table", "csv", "json"}));
  bsc->add_option("--out", bs.out, "Output file (default stdout)");

  BenchBatchArgs bb;
  auto* bbc = app.add_subcommand("bench-batch", "Throughput of the three render batching strategies");
  bbc->add_option("--count", bb.count, "Points")->capture_default_str();
  bbc->add_option("--extent", bb.extent_m, "Cube side in metres")->capture_default_str()->check(CLI::PositiveNumber);
  bbc->add_option("--duration", bb.duration_s, "Seconds per strategy")->capture_default_str()->check(CLI::PositiveNumber);
  bbc->add_option("--strategy", bb.strategy, "per-point | chunked | single | all")->capture_default_str()->check(CLI::IsMember({"per-point", "chunked", "single", "all"}));
  bbc->add_option("--chunk", bb.chunk, "Points per chunk")->capture_default_str()->check(CLI::PositiveNumber);
  bbc->add_option("--seed", bb.seed, "Cloud seed")->capture_default_str();
  bbc->add_option("--format", bb.format, "table | csv | json")->capture_default_str()->check(CLI::IsMember({"table", "csv", "json"}));
  bbc->add_option("--out", bb.out, "Output file (default stdout)");

  BenchTagsArgs bt;
  auto* btc = app.add_subcommand("bench-tags", "Tag pose averaging experiment, CSV per config and strategy");
  btc->add_option("--seed", bt.seed, "Base seed")->capture_default_str();
  btc->add_option("--trials", bt.trials, "Seeded streams per config")->capture_default_str()->check(CLI::PositiveNumber);
  btc->add_option("--rate", bt.rate_hz, "Samples per second")->capture_default_str()->check(CLI::PositiveNumber);
  btc->add_option("--duration", bt.duration_s, "Seconds per stream")->capture_default_str()->check(CLI::PositiveNumber);
  btc->add_option("--drift-pos", bt.drift_pos_m, "Handheld drift step in metres at 0.25 m (scaled with distance)")->check(CLI::NonNegativeNumber);
  btc->add_option("--drift-rot-deg", bt.drift_rot_deg, "Handheld drift step in degrees at 0.25 m (scaled with distance)")->check(CLI::NonNegativeNumber);
  btc->add_option("--format", bt.format, "csv | json")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
  btc->add_option("--out", bt.out, "Output file (default stdout)");

  std::string dump_file;
  auto* pd = app.add_subcommand("protocol-dump", "Decode a capture file into one line per frame");
  pd->add_option("file", dump_file, "Capture file (concatenated wire frames)")->required()->check(CLI::ExistingFile);

  ListenArgs listen;
  auto* ls = app.add_subcommand("listen", "Subscribe to topics and print what arrives");
  ls->add_option("--bridge", listen.bridge, "Bridge address host:port")->capture_default_str();
  ls->add_option("--topic", listen.topics, "Topic (repeatable)")->capture_default_str();
  ls->add_option("--count", listen.count, "Exit after this many messages")->capture_default_str();
  ls->add_option("--timeout", listen.timeout_s, "Give up after this many seconds (0 waits forever)")->capture_default_str()->check(CLI::NonNegativeNumber);
  ls->add_option("--capture", listen.capture, "Write received messages to this capture file");
  ls->add_flag("--quiet", listen.quiet, "Do not print messages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "asab: " << e.what() << " (see --help)\n";
    return kUsageError;
  }

  try {
    if (*sc) return run_serve(serve);
    if (*sm) return run_simulate(sim);
    if (*rp) return run_replay(replay);
    if (*sh) return run_shade(shade_args);
    if (*bsc) return run_bench_stream(bs);
    if (*bbc) return run_bench_batch(bb);
    if (*btc) return run_bench_tags(bt);
    if (*pd) return run_protocol_dump(dump_file);
    if (*ls) return run_listen(listen);
  } catch (const UsageError& e) {
    std::cerr << "asab: " << e.what() << " (see --help)\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "asab " << app.get_subcommands().front()->get_name() << ": " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}
