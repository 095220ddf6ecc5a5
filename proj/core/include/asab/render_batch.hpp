#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <variant>
#include <vector>

#include "asab/geometry.hpp"
#include "asab/point_cloud.hpp"
#include "asab/shading.hpp"

namespace asab {

/// Decoded view of one packed vertex record.
struct BatchRecord {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  Rgba rgba;
  float size_px = 0.0f;
  bool operator==(const BatchRecord&) const = default;
};

/// GPU-ready vertex buffer. Record layout (little-endian, 24-byte stride):
///   [0, 12)  position x, y, z as float32
///   [12, 16) r, g, b, a
///   [16, 20) size in pixels as float32
///   [20, 24) zero padding
class RenderBatch {
 public:
  static constexpr std::size_t kStride = 24;

  RenderBatch() = default;
  /// Throws std::invalid_argument unless bytes.size() == count * kStride.
  RenderBatch(std::vector<std::byte> bytes, std::size_t count);

  std::span<const std::byte> bytes() const { return bytes_; }
  std::size_t count() const { return count_; }
  BatchRecord record(std::size_t i) const;

  bool operator==(const RenderBatch&) const = default;

 private:
  std::vector<std::byte> bytes_;
  std::size_t count_ = 0;
};

void encode_record(const BatchRecord& r, std::span<std::byte, RenderBatch::kStride> out);
BatchRecord make_record(const Vec3& position, const ShadedPoint& shaded);

/// One call per kept point.
struct PerPoint {};
/// One call per `n` input points.
struct Chunked {
  std::size_t n = 1023;
};
/// One contiguous pass and a single call.
struct SingleBuffer {};

using BatchStrategy = std::variant<PerPoint, Chunked, SingleBuffer>;

std::string_view strategy_name(const BatchStrategy& s);
/// Parses "per-point" | "chunked" | "single"; `chunk` is used for "chunked".
BatchStrategy strategy_from_name(std::string_view name, std::size_t chunk = 1023);

/// Destination of vertex uploads, shared with the renderer. Every submit()
/// is one CPU-to-GPU transfer and takes the buffer lock.
class DeviceBuffer {
 public:
  void reserve(std::size_t bytes);
  void submit(std::span<const std::byte> records);
  std::size_t submissions() const;
  RenderBatch take();

 private:
  mutable std::mutex mu_;
  std::vector<std::byte> bytes_;
  std::size_t submissions_ = 0;
};

/// Packs kept points. All strategies produce byte-identical batches.
RenderBatch build_batch(std::span<const Vec3> positions, std::span<const ShadedPoint> shaded,
                        const BatchStrategy& strategy);

/// Shading plus packing of a whole cloud, organized per strategy: per point
/// (shade then submit each point), per chunk, or one pass over the cloud.
/// Same bytes as build_batch(positions, shade(...)) for every strategy.
RenderBatch shade_and_batch(const PointCloud& cloud, const ShadingMode& mode, const Pose& viewer,
                            double time_s, const BatchStrategy& strategy,
                            const PointSizeConfig& sizing = {});

}  // namespace asab
