#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asab/geometry.hpp"

namespace asab {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kDefaultPointColor{200, 200, 200};

struct CloudPoint {
  Vec3 position;
  Rgb color = kDefaultPointColor;
  bool operator==(const CloudPoint&) const = default;
};

class CloudError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Timestamped, immutable set of colored points.
class PointCloud {
 public:
  static constexpr std::size_t kDefaultMaxPoints = 2'000'000;

  PointCloud() = default;

  /// Throws CloudError on non-finite positions or more than `max_points` points.
  PointCloud(std::string frame_id, std::uint64_t timestamp_ns, std::vector<CloudPoint> points,
             std::size_t max_points = kDefaultMaxPoints);

  const std::string& frame_id() const { return frame_id_; }
  std::uint64_t timestamp_ns() const { return timestamp_ns_; }
  std::span<const CloudPoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  std::vector<Vec3> positions() const;

  PointCloud with_header(std::string frame_id, std::uint64_t timestamp_ns) const;

  bool operator==(const PointCloud&) const = default;

 private:
  std::string frame_id_;
  std::uint64_t timestamp_ns_ = 0;
  std::vector<CloudPoint> points_;
};

/// Uniform positions in a cube of side `extent` centered at the origin,
/// uniform colors. Deterministic for a given seed.
PointCloud random_cloud(std::size_t count, double extent, std::uint64_t seed);

/// Applies `m` to every position; colors and header are kept.
PointCloud transform_cloud(const TrsMatrix& m, const PointCloud& cloud);

}  // namespace asab
