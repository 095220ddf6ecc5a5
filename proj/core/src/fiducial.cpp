#include "asab/fiducial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace asab {

namespace {

UnitQuaternion perturb(const UnitQuaternion& q, const Vec3& rotation_vector) {
  if (rotation_vector == Vec3::zero()) {
    return q;
  }
  return q * UnitQuaternion::from_rotation_vector(rotation_vector);
}

Vec3 gaussian3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = n(rng), b = n(rng), c = n(rng);
  return Vec3{a, b, c} * sigma;
}

}  // namespace

ZeroPoint initialize_zero_point(const TagObservation& obs, const TagExtrinsic& ext,
                                const Pose& device_in_world) {
  if (obs.tag_id != ext.tag_id) {
    throw FiducialError(fmt::format("observation of tag {} cannot use the extrinsic of tag {}",
                                    obs.tag_id, ext.tag_id));
  }
  return {device_in_world * obs.pose_device_tag * invert_rigid(ext.pose_robot_tag), 1};
}

std::string_view mount_name(Mount m) { return m == Mount::Static ? "stand" : "hand"; }

std::string_view strategy_name(EstimateStrategy s) {
  return s == EstimateStrategy::SingleFrame ? "single_frame" : "average_all";
}

NoiseModel NoiseModel::defaults(Mount kind, double distance_m, std::uint64_t seed) {
  const double k = distance_m / 0.25;
  NoiseModel m;
  m.kind = kind;
  m.seed = seed;
  if (kind == Mount::Static) {
    m.sigma_pos_m = 0.002 * k;
    m.sigma_rot_rad = deg_to_rad(0.2) * k;
  } else {
    m.sigma_pos_m = 0.008 * k;
    m.sigma_rot_rad = deg_to_rad(0.8) * k;
    // Drift steps at a tenth of the per-frame noise.
    m.drift_step_pos_m = 0.0008 * k;
    m.drift_step_rot_rad = deg_to_rad(0.08) * k;
  }
  return m;
}

Pose perturb_pose(const Pose& actual, double sigma_pos_m, double sigma_rot_rad, std::mt19937_64& rng) {
  const Vec3 dp = gaussian3(rng, sigma_pos_m);
  const Vec3 dr = gaussian3(rng, sigma_rot_rad);
  return {actual.translation + dp, perturb(actual.rotation, dr)};
}

ObservationStream synthesize_observations(const Pose& truth, const NoiseModel& model,
                                          double rate_hz, double duration_s,
                                          std::uint32_t tag_id) {
  if (!(rate_hz > 0.0) || !(duration_s > 0.0)) {
    throw FiducialError("observation rate and duration must be positive");
  }
  if (model.sigma_pos_m < 0 || model.sigma_rot_rad < 0 || model.drift_step_pos_m < 0 ||
      model.drift_step_rot_rad < 0) {
    throw FiducialError("noise parameters must be non-negative");
  }
  const auto n = static_cast<std::size_t>(std::floor(rate_hz * duration_s + 1e-9));
  const double period_ns = 1e9 / rate_hz;
  std::mt19937_64 rng(model.seed);
  Vec3 drift_pos;
  Vec3 drift_rot;
  ObservationStream out;
  out.observations.reserve(n);
  out.ground_truth.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (model.kind == Mount::Handheld) {
      drift_pos += gaussian3(rng, model.drift_step_pos_m);
      drift_rot += gaussian3(rng, model.drift_step_rot_rad);
    }
    const Pose actual{truth.translation + drift_pos, perturb(truth.rotation, drift_rot)};
    TagObservation obs;
    obs.tag_id = tag_id;
    obs.timestamp_ns = static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * period_ns));
    obs.pose_device_tag = perturb_pose(actual, model.sigma_pos_m, model.sigma_rot_rad, rng);
    out.observations.push_back(obs);
    out.ground_truth.push_back(actual);
  }
  return out;
}

Pose estimate_pose(std::span<const TagObservation> window, EstimateStrategy strategy) {
  if (window.empty()) {
    throw FiducialError("cannot estimate a pose from an empty window");
  }
  if (strategy == EstimateStrategy::SingleFrame) {
    return window.back().pose_device_tag;
  }
  std::vector<Vec3> positions;
  std::vector<UnitQuaternion> rotations;
  positions.reserve(window.size());
  rotations.reserve(window.size());
  for (const TagObservation& o : window) {
    positions.push_back(o.pose_device_tag.translation);
    rotations.push_back(o.pose_device_tag.rotation);
  }
  return {average_positions(positions), average_rotations(rotations)};
}

Pose estimate_pose_euler_average(std::span<const TagObservation> window) {
  if (window.empty()) {
    throw FiducialError("cannot estimate a pose from an empty window");
  }
  std::vector<Vec3> positions;
  std::vector<Vec3> angles;
  for (const TagObservation& o : window) {
    positions.push_back(o.pose_device_tag.translation);
    angles.push_back(o.pose_device_tag.rotation.to_euler_zyx());
  }
  const Vec3 mean = average_positions(angles);
  return {average_positions(positions), UnitQuaternion::from_euler_zyx(mean.x, mean.y, mean.z)};
}

ErrorStats summarize(std::span<const double> values) {
  ErrorStats s;
  if (values.empty()) {
    return s;
  }
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::vector<ExperimentConfig> default_experiment_configs(std::uint64_t seed) {
  struct Row {
    const char* id;
    Mount mount;
    double distance;
    double angle_deg;
  };
  static constexpr Row kRows[] = {
      {"stand-0.25m", Mount::Static, 0.25, 0.0},
      {"stand-1.25m", Mount::Static, 1.25, 35.0},
      {"hand-0.25m", Mount::Handheld, 0.25, 0.0},
      {"hand-1.25m", Mount::Handheld, 1.25, 35.0},
  };
  std::vector<ExperimentConfig> out;
  std::uint64_t k = 0;
  for (const Row& r : kRows) {
    ExperimentConfig c;
    c.id = r.id;
    c.mount = r.mount;
    c.distance_m = r.distance;
    c.view_angle_rad = deg_to_rad(r.angle_deg);
    c.seed = seed + 1000 * k++;
    c.noise = NoiseModel::defaults(r.mount, r.distance, c.seed);
    out.push_back(c);
  }
  return out;
}

ExperimentReport run_averaging_experiment(std::span<const ExperimentConfig> configs,
                                          const ExperimentSettings& settings) {
  if (settings.trials == 0) {
    throw FiducialError("experiment needs at least one trial");
  }
  ExperimentReport report;
  report.settings = settings;
  for (const ExperimentConfig& cfg : configs) {
    // Tag straight ahead of the camera at `distance_m`, facing it, tilted by the view angle.
    const UnitQuaternion facing = UnitQuaternion::from_axis_angle({1, 0, 0}, kPi + cfg.view_angle_rad);
    const Pose truth{{0.0, 0.0, cfg.distance_m}, facing};

    ConfigResult result;
    result.config = cfg;
    result.single_frame.strategy = EstimateStrategy::SingleFrame;
    result.average_all.strategy = EstimateStrategy::AverageAll;
    std::vector<double> euler_errors;
    for (std::size_t t = 0; t < settings.trials; ++t) {
      NoiseModel noise = cfg.noise;
      noise.seed = cfg.seed + t;
      const ObservationStream stream =
          synthesize_observations(truth, noise, settings.rate_hz, settings.duration_s);
      const Pose& actual = stream.ground_truth.back();
      for (StrategyResult* r : {&result.single_frame, &result.average_all}) {
        const Pose est = estimate_pose(stream.observations, r->strategy);
        r->n_samples = stream.observations.size();
        r->position_errors.push_back((est.translation - actual.translation).norm());
        r->rotation_errors.push_back(angular_distance(est.rotation, actual.rotation));
      }
      euler_errors.push_back(angular_distance(
          estimate_pose_euler_average(stream.observations).rotation, actual.rotation));
    }
    for (StrategyResult* r : {&result.single_frame, &result.average_all}) {
      r->position_m = summarize(r->position_errors);
      r->rotation_rad = summarize(r->rotation_errors);
    }
    result.euler_rotation_rad = summarize(euler_errors);
    report.results.push_back(std::move(result));
  }
  return report;
}

void write_experiment_csv(std::ostream& out, const ExperimentReport& report) {
  out << "config_id,mount,distance_m,strategy,n_samples,pos_err_mean_m,pos_err_median_m,"
         "pos_err_std_m,rot_err_mean_rad,rot_err_median_rad,rot_err_std_rad,seed\n";
  for (const ConfigResult& r : report.results) {
    for (const StrategyResult* s : {&r.single_frame, &r.average_all}) {
      out << fmt::format("{},{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{}\n",
                         r.config.id, mount_name(r.config.mount), r.config.distance_m,
                         strategy_name(s->strategy), s->n_samples, s->position_m.mean,
                         s->position_m.median, s->position_m.std, s->rotation_rad.mean,
                         s->rotation_rad.median, s->rotation_rad.std, r.config.seed);
    }
  }
}

std::string experiment_json(const ExperimentReport& report) {
  using nlohmann::json;
  auto stats = [](const ErrorStats& s) {
    return json{{"mean", s.mean}, {"median", s.median}, {"std", s.std}};
  };
  json configs = json::array();
  for (const ConfigResult& r : report.results) {
    json strategies = json::object();
    for (const StrategyResult* s : {&r.single_frame, &r.average_all}) {
      strategies[std::string(strategy_name(s->strategy))] = {
          {"n_samples", s->n_samples},
          {"position_error_m", stats(s->position_m)},
          {"rotation_error_rad", stats(s->rotation_rad)},
      };
    }
    configs.push_back({
        {"config_id", r.config.id},
        {"mount", mount_name(r.config.mount)},
        {"distance_m", r.config.distance_m},
        {"view_angle_rad", r.config.view_angle_rad},
        {"seed", r.config.seed},
        {"noise",
         {{"sigma_pos_m", r.config.noise.sigma_pos_m},
          {"sigma_rot_rad", r.config.noise.sigma_rot_rad},
          {"drift_step_pos_m", r.config.noise.drift_step_pos_m},
          {"drift_step_rot_rad", r.config.noise.drift_step_rot_rad}}},
        {"strategies", strategies},
        {"average_all_euler_rotation_error_rad", stats(r.euler_rotation_rad)},
    });
  }
  return json{{"bench", "tags"},
              {"rate_hz", report.settings.rate_hz},
              {"duration_s", report.settings.duration_s},
              {"trials", report.settings.trials},
              {"configs", configs}}
      .dump(2);
}

}  // namespace asab
