#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "asab/geometry.hpp"

namespace asab {

/// A tag sighting: the tag's pose expressed in the viewer device frame.
struct TagObservation {
  std::uint32_t tag_id = 0;
  Pose pose_device_tag;
  std::uint64_t timestamp_ns = 0;
  bool operator==(const TagObservation&) const = default;
};

/// Where a tag is mounted on the robot.
struct TagExtrinsic {
  std::uint32_t tag_id = 0;
  Pose pose_robot_tag;
};

/// World origin anchored at the robot's origin.
struct ZeroPoint {
  Pose pose_world_robot;
  std::size_t source_count = 1;
};

class FiducialError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// world_robot = device_in_world * device_tag * inverse(robot_tag).
ZeroPoint initialize_zero_point(const TagObservation& obs, const TagExtrinsic& ext,
                                const Pose& device_in_world);

enum class Mount { Static, Handheld };

std::string_view mount_name(Mount m);

/// Observation noise. Static: i.i.d. Gaussian per axis. Handheld adds a
/// random walk (per-axis Gaussian steps of drift_step_*) that moves the true
/// device-to-tag pose itself.
struct NoiseModel {
  Mount kind = Mount::Static;
  double sigma_pos_m = 0.0;
  double sigma_rot_rad = 0.0;
  double drift_step_pos_m = 0.0;
  double drift_step_rot_rad = 0.0;
  std::uint64_t seed = 0;

  /// Default noise for a mount at `distance_m` (all parameters scale with distance / 0.25 m).
  static NoiseModel defaults(Mount kind, double distance_m, std::uint64_t seed);
};

/// One noisy sighting of `actual`: Gaussian position offset, then a Gaussian
/// rotation vector applied in the tag frame.
Pose perturb_pose(const Pose& actual, double sigma_pos_m, double sigma_rot_rad, std::mt19937_64& rng);

/// Noisy observations and the true device-to-tag pose at each sample.
struct ObservationStream {
  std::vector<TagObservation> observations;
  std::vector<Pose> ground_truth;
};

/// floor(rate_hz * duration_s) samples of `truth`, perturbed per `model`.
ObservationStream synthesize_observations(const Pose& truth, const NoiseModel& model,
                                          double rate_hz, double duration_s,
                                          std::uint32_t tag_id = 0);

enum class EstimateStrategy { SingleFrame, AverageAll };

std::string_view strategy_name(EstimateStrategy s);

/// SingleFrame: the last observation. AverageAll: mean position and rotation over the window.
Pose estimate_pose(std::span<const TagObservation> window, EstimateStrategy strategy);

/// Same window, rotations averaged as Z-Y-X Euler angles instead of quaternions.
Pose estimate_pose_euler_average(std::span<const TagObservation> window);

struct ExperimentConfig {
  std::string id;
  Mount mount = Mount::Static;
  double distance_m = 0.25;
  double view_angle_rad = 0.0;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

struct ExperimentSettings {
  double rate_hz = 30.0;
  double duration_s = 60.0;
  std::size_t trials = 5;
};

struct ErrorStats {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
};

ErrorStats summarize(std::span<const double> values);

struct StrategyResult {
  EstimateStrategy strategy = EstimateStrategy::SingleFrame;
  std::size_t n_samples = 0;
  ErrorStats position_m;
  ErrorStats rotation_rad;
  std::vector<double> position_errors;
  std::vector<double> rotation_errors;
};

struct ConfigResult {
  ExperimentConfig config;
  StrategyResult single_frame;
  StrategyResult average_all;
  /// Rotation error when averaging Euler angles instead of quaternions.
  ErrorStats euler_rotation_rad;
};

struct ExperimentReport {
  ExperimentSettings settings;
  std::vector<ConfigResult> results;
};

/// The four reference configurations: stand/hand at 0.25 m overhead and 1.25 m at an angle.
std::vector<ExperimentConfig> default_experiment_configs(std::uint64_t seed);

/// Runs `settings.trials` seeded streams per config (seeds config.seed + k) and
/// scores each strategy against the true pose at the end of the window.
ExperimentReport run_averaging_experiment(std::span<const ExperimentConfig> configs,
                                          const ExperimentSettings& settings = {});

/// Columns: config_id, mount, distance_m, strategy, n_samples, pos_err_mean_m,
/// pos_err_median_m, pos_err_std_m, rot_err_mean_rad, rot_err_median_rad,
/// rot_err_std_rad, seed.
void write_experiment_csv(std::ostream& out, const ExperimentReport& report);
std::string experiment_json(const ExperimentReport& report);

}  // namespace asab
