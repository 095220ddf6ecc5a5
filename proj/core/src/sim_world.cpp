#include "asab/sim_world.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace asab {

using nlohmann::json;

namespace {

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

Vec3 vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw SceneError(fmt::format("{} must be an array of three numbers", what));
  }
  for (const json& e : j) {
    if (!e.is_number()) throw SceneError(fmt::format("{} must be an array of three numbers", what));
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Rgb color_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SceneError("color must be [r, g, b] with 0..255 integers");
  Rgb c;
  std::uint8_t* out[3] = {&c.r, &c.g, &c.b};
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<int>() < 0 || j[i].get<int>() > 255) {
      throw SceneError("color must be [r, g, b] with 0..255 integers");
    }
    *out[i] = static_cast<std::uint8_t>(j[i].get<int>());
  }
  return c;
}

Pose pose_from_json(const json& j) {
  Pose p;
  p.translation = vec_from_json(j.at("position"), "position");
  if (j.contains("rotation_deg")) {
    const json& r = j.at("rotation_deg");
    const double yaw = r.value("yaw", 0.0), pitch = r.value("pitch", 0.0), roll = r.value("roll", 0.0);
    p.rotation = UnitQuaternion::from_euler_zyx(deg_to_rad(yaw), deg_to_rad(pitch), deg_to_rad(roll));
  }
  return p;
}

json pose_to_json(const Pose& p) {
  const Vec3 e = p.rotation.to_euler_zyx();
  return {{"position", {p.translation.x, p.translation.y, p.translation.z}},
          {"rotation_deg", {{"yaw", rad_to_deg(e.x)}, {"pitch", rad_to_deg(e.y)}, {"roll", rad_to_deg(e.z)}}}};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tick) {
  std::uint64_t z = seed + (tick + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

void Scene::validate() const {
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    if (!finite(b.min) || !finite(b.max)) throw SceneError(fmt::format("box {} has a non-finite corner", i));
    if (!(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z)) {
      throw SceneError(fmt::format("box {} needs min < max on every axis", i));
    }
  }
  std::set<std::uint32_t> ids;
  for (const SceneTag& t : tags) {
    if (!finite(t.pose_world_tag.translation)) throw SceneError(fmt::format("tag {} is not finite", t.tag_id));
    if (!ids.insert(t.tag_id).second) throw SceneError(fmt::format("duplicate tag id {}", t.tag_id));
  }
  if (robot_tag && !ids.insert(robot_tag->tag_id).second) {
    throw SceneError(fmt::format("robot tag id {} is also a scene tag", robot_tag->tag_id));
  }
}

Scene default_scene() {
  const double wall = 0.1, height = 2.5;
  const Rgb floor{120, 110, 100}, outer{210, 205, 190}, inner{90, 140, 200}, lintel{200, 90, 60};
  Scene s;
  s.boxes = {
      {{-wall, -wall, -0.05}, {8.0 + wall, 5.0 + wall, 0.0}, floor},
      {{-wall, -wall, 0.0}, {8.0 + wall, 0.0, height}, outer},     // south
      {{-wall, 5.0, 0.0}, {8.0 + wall, 5.0 + wall, height}, outer},  // north
      {{-wall, 0.0, 0.0}, {0.0, 5.0, height}, outer},               // west
      {{8.0, 0.0, 0.0}, {8.0 + wall, 5.0, height}, outer},          // east
      // Shared wall with a doorway for y in [2, 3] below 2 m.
      {{4.0 - wall / 2, 0.0, 0.0}, {4.0 + wall / 2, 2.0, height}, inner},
      {{4.0 - wall / 2, 3.0, 0.0}, {4.0 + wall / 2, 5.0, height}, inner},
      {{4.0 - wall / 2, 2.0, 2.0}, {4.0 + wall / 2, 3.0, height}, lintel},
      // Furniture so the clouds have some depth structure.
      {{1.0, 0.3, 0.0}, {1.8, 1.1, 0.75}, {160, 120, 70}},
      {{6.2, 3.6, 0.0}, {7.4, 4.6, 1.1}, {80, 160, 90}},
  };
  s.tags = {{1, {{4.0 - wall / 2, 4.0, 1.2}, UnitQuaternion::from_axis_angle({0, 1, 0}, deg_to_rad(-90.0))}}};
  s.robot_tag = TagExtrinsic{0, {{0.0, 0.0, 0.35}, UnitQuaternion::identity()}};
  return s;
}

Scene parse_scene_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SceneError(fmt::format("scene is not valid JSON: {}", e.what()));
  }
  try {
    if (j.contains("units")) {
      const json& u = j.at("units");
      if (u.value("length", "m") != "m" || u.value("angle", "deg") != "deg") {
        throw SceneError("scene units must be meters (\"m\") and degrees (\"deg\")");
      }
    }
    Scene s;
    for (const json& b : j.value("boxes", json::array())) {
      Box box;
      box.min = vec_from_json(b.at("min"), "box min");
      box.max = vec_from_json(b.at("max"), "box max");
      if (b.contains("color")) box.color = color_from_json(b.at("color"));
      s.boxes.push_back(box);
    }
    for (const json& t : j.value("tags", json::array())) {
      s.tags.push_back({t.at("id").get<std::uint32_t>(), pose_from_json(t)});
    }
    if (j.contains("robot_tag")) {
      const json& t = j.at("robot_tag");
      s.robot_tag = TagExtrinsic{t.at("id").get<std::uint32_t>(), pose_from_json(t)};
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw SceneError(fmt::format("malformed scene: {}", e.what()));
  }
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SceneError(fmt::format("cannot open scene file {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene_json(buf.str());
}

std::string scene_to_json(const Scene& scene) {
  json j;
  j["units"] = {{"length", "m"}, {"angle", "deg"}};
  j["boxes"] = json::array();
  for (const Box& b : scene.boxes) {
    j["boxes"].push_back({{"min", {b.min.x, b.min.y, b.min.z}},
                          {"max", {b.max.x, b.max.y, b.max.z}},
                          {"color", {b.color.r, b.color.g, b.color.b}}});
  }
  j["tags"] = json::array();
  for (const SceneTag& t : scene.tags) {
    json e = pose_to_json(t.pose_world_tag);
    e["id"] = t.tag_id;
    j["tags"].push_back(e);
  }
  if (scene.robot_tag) {
    json e = pose_to_json(scene.robot_tag->pose_robot_tag);
    e["id"] = scene.robot_tag->tag_id;
    j["robot_tag"] = e;
  }
  return j.dump(2);
}

std::optional<RayHit> raycast(const Scene& scene, const Vec3& origin, const Vec3& direction,
                              double max_range) {
  std::optional<RayHit> best;
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {direction.x, direction.y, direction.z};
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const Box& b = scene.boxes[i];
    const double lo[3] = {b.min.x, b.min.y, b.min.z};
    const double hi[3] = {b.max.x, b.max.y, b.max.z};
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (d[a] == 0.0) {
        miss = o[a] < lo[a] || o[a] > hi[a];
        continue;
      }
      double t1 = (lo[a] - o[a]) / d[a];
      double t2 = (hi[a] - o[a]) / d[a];
      if (t1 > t2) std::swap(t1, t2);
      t_near = std::max(t_near, t1);
      t_far = std::min(t_far, t2);
      miss = t_near > t_far;
    }
    if (miss || t_far < 0.0) continue;
    const double t = t_near >= 0.0 ? t_near : t_far;
    if (t > max_range || (best && t >= best->range)) continue;
    best = RayHit{origin + direction * t, b.color, t, i};
  }
  return best;
}

void CameraModel::validate() const {
  if (!(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0)) {
    throw SceneError("camera horizontal_fov must be in (0, 180) degrees");
  }
  if (columns < 1 || rows < 1) throw SceneError("camera resolution must be at least 1x1");
  if (!(max_range_m > 0.0) || !std::isfinite(max_range_m)) throw SceneError("camera max_range must be positive");
  if (!(range_noise_sigma_m >= 0.0) || !std::isfinite(range_noise_sigma_m)) {
    throw SceneError("camera range noise must be non-negative");
  }
}

double CameraModel::focal_px() const {
  return (static_cast<double>(columns) / 2.0) / std::tan(deg_to_rad(horizontal_fov_deg) / 2.0);
}

double CameraModel::vertical_fov_deg() const {
  return rad_to_deg(2.0 * std::atan((static_cast<double>(rows) / 2.0) / focal_px()));
}

Vec3 CameraModel::pixel_ray(std::uint32_t col, std::uint32_t row) const {
  const double u = static_cast<double>(col) + 0.5 - static_cast<double>(columns) / 2.0;
  const double v = static_cast<double>(row) + 0.5 - static_cast<double>(rows) / 2.0;
  const Vec3 d{focal_px(), -u, -v};
  return d / d.norm();
}

bool CameraModel::in_frustum(const Vec3& p) const {
  if (!(p.x > 0.0) || p.norm() > max_range_m) return false;
  const double f = focal_px();
  return std::abs(p.y) / p.x <= (static_cast<double>(columns) / 2.0) / f &&
         std::abs(p.z) / p.x <= (static_cast<double>(rows) / 2.0) / f;
}

PointCloud render_depth_cloud(const Scene& scene, const Pose& camera_pose, const CameraModel& model,
                              std::uint64_t seed, std::uint64_t timestamp_ns, const std::string& frame_id) {
  model.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<CloudPoint> points;
  points.reserve(static_cast<std::size_t>(model.columns) * model.rows);
  const Vec3 origin = camera_pose.translation;
  for (std::uint32_t row = 0; row < model.rows; ++row) {
    for (std::uint32_t col = 0; col < model.columns; ++col) {
      const Vec3 dir = camera_pose.rotation.rotate(model.pixel_ray(col, row));
      const auto hit = raycast(scene, origin, dir, model.max_range_m);
      if (!hit) continue;
      double range = hit->range;
      if (model.range_noise_sigma_m > 0.0) range += model.range_noise_sigma_m * noise(rng);
      if (!(range > 0.0) || range > model.max_range_m) continue;
      points.push_back({origin + dir * range, hit->color});
    }
  }
  return PointCloud(frame_id, timestamp_ns, std::move(points));
}

Pose RobotState::pose() const {
  return {position, UnitQuaternion::from_axis_angle({0, 0, 1}, heading)};
}

RobotState step_robot(const RobotState& state, const wire::Twist& twist, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step_robot needs dt > 0");
  if (!std::isfinite(twist.linear) || !std::isfinite(twist.angular)) {
    throw std::invalid_argument("step_robot needs a finite twist");
  }
  RobotState next = state;
  next.linear_vel = twist.linear;
  next.angular_vel = twist.angular;
  const double v = twist.linear, w = twist.angular, th = state.heading;
  if (std::abs(w) < 1e-9) {
    next.position.x += v * std::cos(th) * dt;
    next.position.y += v * std::sin(th) * dt;
    next.heading = wrap_angle(th + w * dt);
  } else {
    const double r = v / w, th2 = th + w * dt;
    next.position.x += r * (std::sin(th2) - std::sin(th));
    next.position.y -= r * (std::cos(th2) - std::cos(th));
    next.heading = wrap_angle(th2);
  }
  return next;
}

std::vector<wire::WireMessage> SimFrame::messages(const SimConfig& config) const {
  std::vector<wire::WireMessage> out;
  out.reserve(2 + tags.size());
  out.push_back({timestamp_ns, config.map_frame, 0, wire::PoseBody{state.pose()}});
  out.push_back(wire::make_cloud_message(cloud));
  for (const TagObservation& t : tags) {
    out.push_back({t.timestamp_ns, config.device_frame, 0, wire::TagSighting{t.tag_id, t.pose_device_tag}});
  }
  return out;
}

Simulation::Simulation(Scene scene, SimConfig config)
    : scene_(std::move(scene)), config_(std::move(config)), state_(config_.start), tag_rng_(config_.seed) {
  scene_.validate();
  config_.camera.validate();
  config_.device_camera.validate();
  if (!(config_.rate_hz > 0.0) || !std::isfinite(config_.rate_hz)) {
    throw std::invalid_argument("simulation rate must be positive");
  }
  state_.position.z = 0.0;
  state_.heading = wrap_angle(state_.heading);
}

void Simulation::set_teleop(const wire::Twist& twist) {
  if (!std::isfinite(twist.linear) || !std::isfinite(twist.angular)) {
    throw std::invalid_argument("teleop twist must be finite");
  }
  teleop_ = twist;
}

wire::Twist Simulation::waypoint_twist() {
  const double dt = 1.0 / config_.rate_hz;
  while (next_waypoint_ < config_.waypoints.size()) {
    const Waypoint& w = config_.waypoints[next_waypoint_];
    const double dx = w.x - state_.position.x, dy = w.y - state_.position.y;
    const double dist = std::hypot(dx, dy);
    if (dist < 0.05) {
      ++next_waypoint_;
      continue;
    }
    const double err = wrap_angle(std::atan2(dy, dx) - state_.heading);
    wire::Twist t;
    t.angular = std::clamp(err / dt, -config_.max_angular, config_.max_angular);
    if (std::abs(err) < 0.2) t.linear = std::min(config_.max_linear, dist / dt);
    return t;
  }
  return {};
}

SimFrame Simulation::step() {
  SimFrame f;
  f.tick = tick_;
  f.timestamp_ns =
      config_.start_ns + static_cast<std::uint64_t>(std::llround(static_cast<double>(tick_) * 1e9 / config_.rate_hz));
  f.state = state_;
  const Pose robot = state_.pose();
  f.cloud = render_depth_cloud(scene_, robot * config_.robot_camera, config_.camera, mix_seed(config_.seed, tick_),
                               f.timestamp_ns, config_.map_frame);

  const Pose world_device_inv = invert_rigid(config_.device_pose);
  auto observe = [&](std::uint32_t id, const Pose& world_tag) {
    const Pose device_tag = world_device_inv * world_tag;
    if (!config_.device_camera.in_frustum(device_tag.translation)) return;
    TagObservation obs;
    obs.tag_id = id;
    obs.timestamp_ns = f.timestamp_ns;
    obs.pose_device_tag = perturb_pose(device_tag, config_.tag_sigma_pos_m, config_.tag_sigma_rot_rad, tag_rng_);
    f.tags.push_back(obs);
  };
  if (scene_.robot_tag) observe(scene_.robot_tag->tag_id, robot * scene_.robot_tag->pose_robot_tag);
  for (const SceneTag& t : scene_.tags) observe(t.tag_id, t.pose_world_tag);

  const wire::Twist twist = teleop_ ? *teleop_ : waypoint_twist();
  state_ = step_robot(state_, twist, 1.0 / config_.rate_hz);
  ++tick_;
  return f;
}

void run_simulation(Simulation& sim, const RunOptions& options, const std::function<bool(const SimFrame&)>& sink,
                    const std::function<std::optional<wire::Twist>()>& teleop) {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration<double>(1.0 / sim.config().rate_hz);
  const auto start = clock::now();
  for (std::uint64_t k = 0; options.ticks == 0 || k < options.ticks; ++k) {
    if (options.realtime) {
      std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(k)));
    }
    if (teleop) {
      if (auto t = teleop()) sim.set_teleop(*t);
    }
    if (!sink(sim.step())) return;
  }
}

}  // namespace asab
