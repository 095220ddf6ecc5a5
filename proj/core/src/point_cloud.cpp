#include "asab/point_cloud.hpp"

#include <random>

#include <fmt/format.h>

namespace asab {

PointCloud::PointCloud(std::string frame_id, std::uint64_t timestamp_ns,
                       std::vector<CloudPoint> points, std::size_t max_points)
    : frame_id_(std::move(frame_id)), timestamp_ns_(timestamp_ns), points_(std::move(points)) {
  if (points_.size() > max_points) {
    throw CloudError(
        fmt::format("cloud has {} points, limit is {}", points_.size(), max_points));
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].position.is_finite()) {
      throw CloudError(fmt::format("point {} has a non-finite position", i));
    }
  }
}

std::vector<Vec3> PointCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(points_.size());
  for (const CloudPoint& p : points_) {
    out.push_back(p.position);
  }
  return out;
}

PointCloud PointCloud::with_header(std::string frame_id, std::uint64_t timestamp_ns) const {
  PointCloud copy = *this;
  copy.frame_id_ = std::move(frame_id);
  copy.timestamp_ns_ = timestamp_ns;
  return copy;
}

PointCloud random_cloud(std::size_t count, double extent, std::uint64_t seed) {
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw CloudError("random cloud extent must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-extent / 2.0, extent / 2.0);
  std::uniform_int_distribution<int> channel(0, 255);
  std::vector<CloudPoint> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CloudPoint p;
    p.position = {coord(rng), coord(rng), coord(rng)};
    p.color = {static_cast<std::uint8_t>(channel(rng)), static_cast<std::uint8_t>(channel(rng)),
               static_cast<std::uint8_t>(channel(rng))};
    points.push_back(p);
  }
  return PointCloud("random", 0, std::move(points), std::max(count, PointCloud::kDefaultMaxPoints));
}

PointCloud transform_cloud(const TrsMatrix& m, const PointCloud& cloud) {
  std::vector<CloudPoint> points(cloud.points().begin(), cloud.points().end());
  for (CloudPoint& p : points) {
    p.position = transform_point(m, p.position);
  }
  const std::size_t limit = std::max(points.size(), PointCloud::kDefaultMaxPoints);
  return PointCloud(cloud.frame_id(), cloud.timestamp_ns(), std::move(points), limit);
}

}  // namespace asab
