#pragma once

// Box-world scene, raycasting depth camera and a differential-drive robot.
// World frame: z up, ground plane z = 0. Camera frames look along +x with +y
// to the left and +z up, the same convention as the robot body.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "asab/fiducial.hpp"
#include "asab/geometry.hpp"
#include "asab/point_cloud.hpp"
#include "asab/wire.hpp"

namespace asab {

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Box {
  Vec3 min;
  Vec3 max;
  Rgb color = kDefaultPointColor;
};

struct SceneTag {
  std::uint32_t tag_id = 0;
  Pose pose_world_tag;
};

struct Scene {
  std::vector<Box> boxes;
  std::vector<SceneTag> tags;
  /// Tag carried by the robot, expressed in the robot body frame.
  std::optional<TagExtrinsic> robot_tag;

  /// Throws SceneError if a box is empty along some axis, a value is not
  /// finite, or tag ids repeat (the robot tag included).
  void validate() const;
};

/// Two 4 m x 5 m rooms side by side along x, joined by a 1 m doorway in the
/// shared wall, with a floor, 2.5 m walls and a tag on the robot's top plate.
Scene default_scene();

/// JSON with explicit units; see docs/scene.md. Throws SceneError.
Scene parse_scene_json(const std::string& text);
Scene load_scene(const std::filesystem::path& path);
std::string scene_to_json(const Scene& scene);

struct RayHit {
  Vec3 point;
  Rgb color;
  double range = 0.0;
  std::size_t box_index = 0;
};

/// Nearest box surface along the ray (slab method). A ray starting inside a
/// box hits that box's far side. Hits beyond `max_range` are ignored.
std::optional<RayHit> raycast(const Scene& scene, const Vec3& origin, const Vec3& direction,
                              double max_range = std::numeric_limits<double>::infinity());

struct CameraModel {
  double horizontal_fov_deg = 70.0;
  std::uint32_t columns = 160;
  std::uint32_t rows = 120;
  double max_range_m = 8.0;
  double range_noise_sigma_m = 0.005;

  void validate() const;
  double focal_px() const;
  double vertical_fov_deg() const;
  /// Unit ray through the center of pixel (col, row) in the camera frame.
  Vec3 pixel_ray(std::uint32_t col, std::uint32_t row) const;
  /// True if a camera-frame point is in front of the camera, inside the image
  /// and within range.
  bool in_frustum(const Vec3& p_camera) const;
};

/// One ray per pixel; hits are moved along their ray by N(0, sigma) and
/// dropped if the noisy range leaves (0, max_range]. World-frame output,
/// deterministic for a seed.
PointCloud render_depth_cloud(const Scene& scene, const Pose& camera_pose, const CameraModel& model,
                              std::uint64_t seed, std::uint64_t timestamp_ns = 0,
                              const std::string& frame_id = "map");

struct RobotState {
  Vec3 position;
  double heading = 0.0;  // radians, (-pi, pi]
  double linear_vel = 0.0;
  double angular_vel = 0.0;

  Pose pose() const;
  bool operator==(const RobotState&) const = default;
};

/// Exact unicycle integration of a constant twist over dt > 0.
RobotState step_robot(const RobotState& state, const wire::Twist& twist, double dt);

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
};

struct SimConfig {
  double rate_hz = 5.0;
  CameraModel camera;
  Pose robot_camera{{0.1, 0.0, 0.3}, UnitQuaternion::identity()};
  /// Robot start; z is kept on the ground plane.
  RobotState start{{2.0, 2.5, 0.0}, 0.0, 0.0, 0.0};
  /// Viewer device that observes tags, in the world frame.
  Pose device_pose{{0.4, 2.5, 1.2}, UnitQuaternion::from_axis_angle({0, 1, 0}, deg_to_rad(20.0))};
  CameraModel device_camera;
  double tag_sigma_pos_m = 0.002;
  double tag_sigma_rot_rad = deg_to_rad(0.2);
  /// Followed in order when no teleop twist has been received.
  std::vector<Waypoint> waypoints;
  double max_linear = 0.5;
  double max_angular = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t start_ns = 0;
  std::string map_frame = "map";
  std::string device_frame = "device";
};

struct SimFrame {
  std::uint64_t tick = 0;
  std::uint64_t timestamp_ns = 0;
  RobotState state;
  PointCloud cloud;
  std::vector<TagObservation> tags;

  /// Pose, cloud and tag messages in publish order.
  std::vector<wire::WireMessage> messages(const SimConfig& config) const;
};

/// Deterministic, single-threaded simulation loop. Tick k reports the state at
/// start_ns + k / rate_hz, then advances by one period with the active twist.
class Simulation {
 public:
  Simulation(Scene scene, SimConfig config);

  /// Overrides the waypoint controller from now on.
  void set_teleop(const wire::Twist& twist);
  SimFrame step();

  const Scene& scene() const { return scene_; }
  const SimConfig& config() const { return config_; }
  const RobotState& state() const { return state_; }

 private:
  wire::Twist waypoint_twist();

  Scene scene_;
  SimConfig config_;
  RobotState state_;
  std::optional<wire::Twist> teleop_;
  std::size_t next_waypoint_ = 0;
  std::uint64_t tick_ = 0;
  std::mt19937_64 tag_rng_;
};

struct RunOptions {
  std::uint64_t ticks = 0;  // 0 runs until the sink returns false
  bool realtime = true;
};

/// Steps `sim` and hands each frame to `sink`; `teleop` is polled before every
/// step. Stops when the sink returns false or after `ticks` frames.
void run_simulation(Simulation& sim, const RunOptions& options,
                    const std::function<bool(const SimFrame&)>& sink,
                    const std::function<std::optional<wire::Twist>()>& teleop = {});

}  // namespace asab
