// One PASS/FAIL line per acceptance criterion. With no arguments every
// criterion runs; otherwise only the named ones. Exit status is nonzero if
// any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "asab/bench.hpp"
#include "asab/bridge_client.hpp"
#include "asab/fiducial.hpp"
#include "asab/render_batch.hpp"
#include "asab/shading.hpp"
#include "asab/sim_world.hpp"
#include "asab/wire.hpp"
#include "alloc_tracker.hpp"
#include "golden_messages.hpp"
#include "random_messages.hpp"
#include "test_support.hpp"

extern char** environ;

using namespace asab;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---- protocol

Outcome protocol_round_trip() {
  const auto start = Clock::now();
  test::MessageFactory f(20240);
  std::size_t checked = 0, mismatches = 0;
  for (wire::MessageType t : test::kAllTypes) {
    for (int i = 0; i < 1000; ++i) {
      const wire::WireMessage m = f.message(t);
      const auto bytes = wire::encode(m);
      const wire::WireMessage back = wire::decode(bytes);
      if (!(back == m) || wire::encode(back) != bytes) ++mismatches;
      ++checked;
    }
  }
  const auto golden = test::load_golden(test::fixture_dir() / "wire_golden.txt");
  std::size_t golden_bad = 0;
  for (const auto& [name, msg] : test::golden_messages()) {
    const auto it = golden.find(name);
    if (it == golden.end() || wire::encode(msg) != it->second || !(wire::decode(it->second) == msg)) ++golden_bad;
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && golden_bad == 0 && elapsed < 10.0,
          fmt::format("{} messages, {} mismatches; {} golden vectors, {} bad; {:.2f} s (limit 10 s)", checked,
                      mismatches, test::golden_messages().size(), golden_bad, elapsed)};
}

Outcome fuzz_safety() {
  const auto start = Clock::now();
  test::MessageFactory f(77);
  std::vector<std::vector<std::uint8_t>> seeds;
  for (wire::MessageType t : test::kAllTypes) seeds.push_back(wire::encode(f.message(t)));
  auto& rng = f.rng();
  std::size_t errors = 0, accepted = 0, foreign = 0;
  asab::test::reset_largest_allocation();
  for (int i = 0; i < 100'000; ++i) {
    std::vector<std::uint8_t> input;
    const int kind = i % 5;
    if (kind == 0) {
      input.resize(f.uniform<std::size_t>(0, 256));
      for (auto& b : input) b = static_cast<std::uint8_t>(rng());
    } else {
      input = seeds[static_cast<std::size_t>(i) % seeds.size()];
      if (kind == 1 && input.size() >= 16) {
        // Length field claims anything up to 4 GiB.
        const auto len = static_cast<std::uint32_t>(rng());
        for (int k = 0; k < 4; ++k) input[8 + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(len >> (8 * k));
      } else if (kind == 2 && input.size() > 16) {
        // Large counts inside the payload; the CRC is left stale or recomputed.
        const std::size_t at = f.uniform<std::size_t>(16, input.size() - 1);
        for (std::size_t k = at; k < std::min(at + 4, input.size()); ++k) input[k] = 0xFF;
        if (rng() % 2 == 0) {
          const auto crc = wire::crc32(std::span(input).subspan(16));
          for (int k = 0; k < 4; ++k) input[12 + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(crc >> (8 * k));
        }
      } else {
        const int edits = f.uniform(1, 6);
        for (int e = 0; e < edits && !input.empty(); ++e) {
          const std::size_t at = f.uniform<std::size_t>(0, input.size() - 1);
          switch (f.uniform(0, 2)) {
            case 0: input[at] = static_cast<std::uint8_t>(rng()); break;
            case 1: input.resize(at); break;
            default: input.insert(input.begin() + static_cast<std::ptrdiff_t>(at), static_cast<std::uint8_t>(rng()));
          }
        }
      }
    }
    asab::test::track_allocations(true);
    try {
      wire::decode(input);
      ++accepted;
    } catch (const wire::ProtocolError&) {
      ++errors;
    } catch (...) {
      ++foreign;
    }
    asab::test::track_allocations(false);
  }
  const double elapsed = seconds_since(start);
  const std::size_t largest = asab::test::largest_allocation();
  return {foreign == 0 && largest <= (64u << 20) && elapsed < 60.0,
          fmt::format("100000 inputs: {} protocol errors, {} decoded, {} other exceptions; largest allocation "
                      "{} bytes (limit 64 MiB); {:.2f} s (limit 60 s)",
                      errors, accepted, foreign, largest, elapsed)};
}

// ---- transform oracle

using Mat4 = std::array<std::array<double, 4>, 4>;

Mat4 matmul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat4 oracle_trs(const Vec3& t, double w, double x, double y, double z, double s) {
  const Mat4 T{{{1, 0, 0, t.x}, {0, 1, 0, t.y}, {0, 0, 1, t.z}, {0, 0, 0, 1}}};
  const Mat4 R{{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), 0},
                {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x), 0},
                {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y), 0},
                {0, 0, 0, 1}}};
  const Mat4 S{{{s, 0, 0, 0}, {0, s, 0, 0}, {0, 0, s, 0}, {0, 0, 0, 1}}};
  return matmul(matmul(T, R), S);
}

Vec3 oracle_apply(const Mat4& m, const Vec3& p) {
  const double v[4] = {p.x, p.y, p.z, 1.0};
  double r[4] = {0, 0, 0, 0};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) r[i] += m[i][k] * v[k];
  return {r[0] / r[3], r[1] / r[3], r[2] / r[3]};
}

Outcome transform_oracle() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> ut(-3, 3), us(0.25, 2.0);
  std::normal_distribution<double> n;
  double worst64 = 0.0, worst32 = 0.0;
  std::size_t count_mismatch = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud cloud = random_cloud(10'000, 2.0, rng());
    double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
    const double norm = std::sqrt(w * w + x * x + y * y + z * z);
    w /= norm, x /= norm, y /= norm, z /= norm;
    const Vec3 t{ut(rng), ut(rng), ut(rng)};
    const double s = us(rng);
    const TrsMatrix m = compose_trs(t, UnitQuaternion::from_unit(w, x, y, z), s);
    const Mat4 o = oracle_trs(t, w, x, y, z, s);

    const PointCloud moved = transform_cloud(m, cloud);
    const Pose viewer{{-20, 0, 0}, UnitQuaternion::identity()};
    const ShadingMode mode(DistanceRamp{1.0, 60.0});
    const RenderBatch batch = shade_and_batch(moved, mode, viewer, 0.0, SingleBuffer{});
    if (batch.count() != cloud.size()) ++count_mismatch;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 expect = oracle_apply(o, cloud.points()[i].position);
      worst64 = std::max(worst64, test::max_abs_diff(moved.points()[i].position, expect));
      if (i < batch.count()) {
        const BatchRecord r = batch.record(i);
        worst32 = std::max(worst32, test::max_abs_diff({r.x, r.y, r.z}, expect));
      }
    }
  }
  return {worst64 <= 1e-9 && worst32 <= 1e-6 && count_mismatch == 0,
          fmt::format("5 x 10000 points: 64-bit max error {:.3g} (limit 1e-9), 32-bit batch max error {:.3g} "
                      "(limit 1e-6)",
                      worst64, worst32)};
}

// ---- batching

Outcome batching() {
  std::mt19937_64 rng(99);
  const std::vector<ShadingMode> modes{ShadingMode(DistanceRamp{}), ShadingMode(AxisColor{}),
                                       ShadingMode(DepthRainbow{0.1, 0.6, 0.3}), ShadingMode(NaturalColor{0.2, 0.6}),
                                       ShadingMode(Sonar{1.0, 1.0, 0.1})};
  std::size_t unequal = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud c = random_cloud(std::uniform_int_distribution<std::size_t>(0, 20'000)(rng), 1.5, rng());
    const ShadingMode& m = modes[static_cast<std::size_t>(trial) % modes.size()];
    const RenderBatch single = shade_and_batch(c, m, Pose::identity(), 0.3, SingleBuffer{});
    if (!(shade_and_batch(c, m, Pose::identity(), 0.3, PerPoint{}) == single)) ++unequal;
    if (!(shade_and_batch(c, m, Pose::identity(), 0.3, Chunked{1023}) == single)) ++unequal;
  }
  bench::BatchBenchConfig cfg;
  cfg.duration_s = 5.0;
  cfg.strategy = SingleBuffer{};
  const bench::BenchReport single = bench::bench_batch(cfg);
  cfg.strategy = PerPoint{};
  const bench::BenchReport per_point = bench::bench_batch(cfg);
  const double ratio = single.median / per_point.median;
  const bool same_bytes = single.metrics.at("batch_crc32") == per_point.metrics.at("batch_crc32");
  return {unequal == 0 && same_bytes && ratio >= 5.0,
          fmt::format("20 random clouds byte-identical: {}; 100000 points in 0.5 m cube, 5 s each: single {:.1f}/s, "
                      "per-point {:.1f}/s, ratio {:.2f} (need >= 5)",
                      unequal == 0 && same_bytes ? "yes" : "no", single.median, per_point.median, ratio)};
}

// ---- streaming

Outcome streaming() {
  bench::StreamBenchConfig cfg;
  cfg.duration_s = 5.0;
  cfg.transport = bench::StreamTransport::NaivePerMessage;
  const bench::BenchReport naive = bench::bench_stream(cfg);
  cfg.transport = bench::StreamTransport::ChunkedDatagram;
  const bench::BenchReport chunked = bench::bench_stream(cfg);
  std::string ref_fps, ref_lat;
  for (double v : bench::kReferenceFps) ref_fps += fmt::format(" {:g}", v);
  for (double v : bench::kReferenceLatencyS) ref_lat += fmt::format(" {:g}", v);
  const double fps = chunked.metrics.at("fps");
  return {fps >= 29.0 && chunked.mean < naive.mean,
          fmt::format("200 KiB at 30 Hz, 5 s: chunked fps {:.2f} (need >= 29), latency mean {:.6f} s vs naive "
                      "{:.6f} s (fps {:.2f}); reference fps{} latency_s{}",
                      fps, chunked.mean, naive.mean, naive.metrics.at("fps"), ref_fps, ref_lat)};
}

// ---- zero point

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5, 5);
  std::normal_distribution<double> n;
  return {{u(rng), u(rng), u(rng)}, UnitQuaternion::normalized(n(rng), n(rng), n(rng), n(rng))};
}

Outcome zero_point() {
  std::mt19937_64 rng(8);
  double worst_m = 0.0, worst_rad = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose world_robot = random_pose(rng), robot_tag = random_pose(rng), world_device = random_pose(rng);
    TagObservation obs;
    obs.tag_id = 2;
    obs.pose_device_tag = invert_rigid(world_device) * world_robot * robot_tag;
    const ZeroPoint z = initialize_zero_point(obs, {2, robot_tag}, world_device);
    worst_m = std::max(worst_m, test::max_abs_diff(z.pose_world_robot.translation, world_robot.translation));
    worst_rad = std::max(worst_rad, angular_distance(z.pose_world_robot.rotation, world_robot.rotation));
  }
  // The simulator's tag sightings, with noise off, through the same path.
  SimConfig sc;
  sc.tag_sigma_pos_m = 0.0;
  sc.tag_sigma_rot_rad = 0.0;
  sc.camera.columns = 8;
  sc.camera.rows = 6;
  const Scene scene = default_scene();
  Simulation sim(scene, sc);
  const SimFrame f = sim.step();
  std::size_t used = 0;
  for (const TagObservation& o : f.tags) {
    if (!scene.robot_tag || o.tag_id != scene.robot_tag->tag_id) continue;
    const ZeroPoint z = initialize_zero_point(o, *scene.robot_tag, sc.device_pose);
    worst_m = std::max(worst_m, test::max_abs_diff(z.pose_world_robot.translation, f.state.pose().translation));
    worst_rad = std::max(worst_rad, angular_distance(z.pose_world_robot.rotation, f.state.pose().rotation));
    ++used;
  }
  return {worst_m <= 1e-9 && worst_rad <= 1e-9 && used == 1,
          fmt::format("1000 random chains + simulated sighting: max error {:.3g} m, {:.3g} rad (limits 1e-9)",
                      worst_m, worst_rad)};
}

// ---- averaging experiment

Outcome averaging_experiment() {
  const auto start = Clock::now();
  ExperimentSettings s;
  s.rate_hz = 30.0;
  s.duration_s = 60.0;
  s.trials = 5;
  const auto configs = default_experiment_configs(1);
  const ExperimentReport report = run_averaging_experiment(configs, s);
  const double elapsed = seconds_since(start);
  bool ok = elapsed < 30.0;
  std::string detail;
  for (const ConfigResult& r : report.results) {
    const auto& one = r.single_frame;
    const auto& avg = r.average_all;
    if (r.config.mount == Mount::Static) {
      const double improvement = one.position_m.mean / avg.position_m.mean;
      const double expected = std::sqrt(static_cast<double>(avg.n_samples));
      const bool pass = avg.position_m.mean < one.position_m.mean && improvement >= expected / 2 &&
                        improvement <= expected * 2 && avg.n_samples == 1800;
      ok = ok && pass;
      detail += fmt::format("{}: improvement {:.1f}x vs sqrt(N)={:.1f} {}; ", r.config.id, improvement, expected,
                            pass ? "ok" : "FAIL");
    } else {
      const bool pass =
          avg.position_m.mean > one.position_m.median && avg.rotation_rad.mean > one.rotation_rad.median;
      ok = ok && pass;
      detail += fmt::format("{}: averaged {:.4f} m / {:.4f} rad vs single median {:.4f} m / {:.4f} rad {}; ",
                            r.config.id, avg.position_m.mean, avg.rotation_rad.mean, one.position_m.median,
                            one.rotation_rad.median, pass ? "ok" : "FAIL");
    }
  }
  detail += fmt::format("5 seeds x 1800 samples, {:.2f} s (limit 30 s)", elapsed);
  return {ok, detail};
}

// ---- shading

Outcome shading_properties() {
  const PointCloud c = random_cloud(20'000, 10.0, 5);
  const Pose viewer{{0.3, -0.2, 0.1}, UnitQuaternion::identity()};
  bool periodic = true;
  for (double period : {1.0, 0.37, 2.5}) {
    const ShadingMode m(Sonar{period, 5.0, 0.15});
    const auto base = shade(c, m, viewer, 0.3);
    for (double step = 0.0; step <= period; step += period / 8) {
      periodic = periodic && shade(c, m, viewer, 0.3 + step) == shade(c, m, viewer, 0.3 + step + period);
    }
    periodic = periodic && shade(c, m, viewer, 0.3 + period) == base;
  }

  // Points at the boundary distances and just beyond them, along several directions.
  auto keep_ok = [](const ShadingMode& mode, double lo, double hi) {
    bool ok = true;
    for (const Vec3& dir : {Vec3{1, 0, 0}, Vec3{0, -1, 0}, Vec3{0, 0, 1}, Vec3{-0.6, 0.8, 0}}) {
      for (double d : {lo, hi, (lo + hi) / 2}) {
        ok = ok && shade_point({dir * d, {1, 2, 3}}, mode, Vec3::zero(), 0.0).keep;
      }
      for (double d : {std::nextafter(lo, 0.0), std::nextafter(hi, 10.0), lo - 0.01, hi + 0.01}) {
        ok = ok && !shade_point({dir * d, {1, 2, 3}}, mode, Vec3::zero(), 0.0).keep;
      }
    }
    return ok;
  };
  const bool natural = keep_ok(ShadingMode(NaturalColor{2.0, 4.0}), 2.0, 4.0);
  const bool rainbow = keep_ok(ShadingMode(DepthRainbow{1.2, 2.5, 1.3}), 1.2, 2.5);
  const bool hsv = hsv_to_rgb(0) == Rgb{255, 0, 0} && hsv_to_rgb(120) == Rgb{0, 255, 0} &&
                   hsv_to_rgb(240) == Rgb{0, 0, 255};
  return {periodic && natural && rainbow && hsv,
          fmt::format("sonar periodic: {}; natural [2,4] m: {}; rainbow [1.2,2.5] m: {}; HSV 0/120/240: {}",
                      periodic, natural, rainbow, hsv)};
}

// ---- simulator

double face_distance(const Scene& scene, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Box& b : scene.boxes) {
    const double lo[3] = {b.min.x, b.min.y, b.min.z}, hi[3] = {b.max.x, b.max.y, b.max.z};
    const double pp[3] = {p.x, p.y, p.z};
    for (int axis = 0; axis < 3; ++axis) {
      for (double plane : {lo[axis], hi[axis]}) {
        double d2 = (pp[axis] - plane) * (pp[axis] - plane);
        for (int k = 0; k < 3; ++k) {
          if (k == axis) continue;
          const double c = std::clamp(pp[k], lo[k], hi[k]);
          d2 += (pp[k] - c) * (pp[k] - c);
        }
        best = std::min(best, std::sqrt(d2));
      }
    }
  }
  return best;
}

Outcome simulator_fidelity() {
  const Scene scene = default_scene();
  CameraModel clean;
  clean.range_noise_sigma_m = 0.0;
  double worst = 0.0;
  std::size_t points = 0;
  for (double yaw : {0.0, 1.2, 2.5, -2.0}) {
    const Pose cam{{2.1, 2.5, 0.3}, UnitQuaternion::from_axis_angle({0, 0, 1}, yaw)};
    const PointCloud cloud = render_depth_cloud(scene, cam, clean, 1);
    for (const CloudPoint& p : cloud.points()) worst = std::max(worst, face_distance(scene, p.position));
    points += cloud.size();
  }

  Scene wall;
  wall.boxes = {{{3.0, -50, -50}, {3.2, 50, 50}, {10, 20, 30}}};
  CameraModel noisy;
  noisy.horizontal_fov_deg = 30.0;
  noisy.columns = 128;
  noisy.rows = 96;
  noisy.range_noise_sigma_m = 0.01;
  const PointCloud cloud = render_depth_cloud(wall, Pose::identity(), noisy, 42);
  double sum = 0.0;
  for (const CloudPoint& p : cloud.points()) {
    // Range error along the pixel ray, recovered from the depth error.
    const double range = p.position.norm();
    const double true_range = range * 3.0 / p.position.x;
    sum += (range - true_range) * (range - true_range);
  }
  const double rms = std::sqrt(sum / static_cast<double>(cloud.size()));
  const double rel = std::abs(rms - 0.01) / 0.01;

  const RobotState quarter = step_robot(RobotState{}, {kPi / 2, kPi / 2}, 1.0);
  const double unicycle = std::max({std::abs(quarter.position.x - 1.0), std::abs(quarter.position.y - 1.0),
                                    std::abs(quarter.heading - kPi / 2)});
  return {worst <= 1e-6 && points > 1000 && cloud.size() >= 10'000 && rel < 0.10 && unicycle <= 1e-9,
          fmt::format("zero-noise: {} points, max surface distance {:.3g} m (limit 1e-6); noisy: {} points, RMS "
                      "{:.5f} m vs sigma 0.01 ({:.1f}% off, limit 10%); quarter circle error {:.3g} (limit 1e-9)",
                      points, worst, cloud.size(), rms, rel * 100, unicycle)};
}

// ---- end to end

class Child {
 public:
  Child(const std::vector<std::string>& args, bool capture_stdout) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    if (capture_stdout) {
      int fds[2];
      if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
      posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
      posix_spawn_file_actions_addclose(&actions, fds[0]);
      out_fd_ = fds[0];
      write_fd_ = fds[1];
    }
    const int rc = posix_spawn(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (write_fd_ >= 0) ::close(write_fd_);
    if (rc != 0) throw std::runtime_error(fmt::format("cannot start {}", args[0]));
  }
  ~Child() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
    if (out_fd_ >= 0) ::close(out_fd_);
  }

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) {
    std::string line;
    const auto deadline = Clock::now() + timeout;
    while (Clock::now() < deadline) {
      pollfd p{out_fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      char c;
      if (::read(out_fd_, &c, 1) != 1) return std::nullopt;
      if (c == '\n') return line;
      line += c;
    }
    return std::nullopt;
  }

  int stop(int sig) {
    ::kill(pid_, sig);
    return wait();
  }
  int wait() {
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  }

 private:
  pid_t pid_ = -1;
  int out_fd_ = -1;
  int write_fd_ = -1;
};

Outcome end_to_end() {
  const auto start = Clock::now();
  Child serve({ASAB_CLI_PATH, "serve", "--port", "0", "--ws-port", "0"}, true);
  const auto banner = serve.read_line(std::chrono::seconds(5));
  if (!banner) return {false, "serve printed no listening line"};
  const auto at = banner->find("tcp ");
  const auto colon = banner->find(':', at);
  const auto port = static_cast<std::uint16_t>(std::stoi(banner->substr(colon + 1)));

  bridge::ClientOptions o;
  o.port = port;
  o.name = "headless";
  o.role = wire::Role::Subscriber;
  bridge::BridgeClient sub(o);
  sub.connect();
  sub.subscribe(bridge::kTopicCloud);
  sub.subscribe(bridge::kTopicPose);

  Child sim({ASAB_CLI_PATH, "simulate", "--bridge", fmt::format("127.0.0.1:{}", port), "--rate", "10", "--ticks",
             "40"},
            false);
  std::size_t clouds = 0, poses = 0, bad_frame = 0, non_monotone = 0;
  std::uint64_t last_ts = 0;
  while (clouds < 12 && seconds_since(start) < 15.0) {
    auto m = sub.receive(std::chrono::milliseconds(200));
    if (!m) continue;
    if (m->type() == wire::MessageType::Pose) {
      ++poses;
      continue;
    }
    if (m->type() != wire::MessageType::PointCloud) continue;
    if (m->frame_id != "map") ++bad_frame;
    if (clouds > 0 && m->timestamp_ns <= last_ts) ++non_monotone;
    last_ts = m->timestamp_ns;
    ++clouds;
  }
  const double elapsed = seconds_since(start);
  sim.stop(SIGTERM);
  const int serve_status = serve.stop(SIGTERM);
  return {clouds >= 10 && bad_frame == 0 && non_monotone == 0 && elapsed < 15.0 && serve_status == 0,
          fmt::format("{} clouds ({} poses) over the bridge, {} wrong frame ids, {} non-monotone timestamps, "
                      "{:.2f} s (limit 15 s), serve exit {}",
                      clouds, poses, bad_frame, non_monotone, elapsed, serve_status)};
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

constexpr Criterion kCriteria[] = {
    {"protocol-round-trip", protocol_round_trip},
    {"fuzz-safety", fuzz_safety},
    {"transform-oracle", transform_oracle},
    {"batching", batching},
    {"streaming", streaming},
    {"zero-point", zero_point},
    {"averaging-experiment", averaging_experiment},
    {"shading", shading_properties},
    {"simulator", simulator_fidelity},
    {"end-to-end", end_to_end},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> selected(argv + 1, argv + argc);
  for (const auto& s : selected) {
    if (std::none_of(std::begin(kCriteria), std::end(kCriteria), [&](const Criterion& c) { return s == c.name; })) {
      std::cerr << "unknown criterion " << s << "\n";
      return 2;
    }
  }
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.name) == selected.end()) continue;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, fmt::format("threw: {}", e.what())};
    }
    std::cout << (out.pass ? "PASS " : "FAIL ") << c.name << ": " << out.detail << std::endl;
    if (!out.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
