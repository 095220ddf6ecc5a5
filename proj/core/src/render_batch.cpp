#include "asab/render_batch.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>

#include <fmt/format.h>

namespace asab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void put_f32(std::byte* out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) {
    out[i] = static_cast<std::byte>((bits >> (8 * i)) & 0xFFu);
  }
}

float get_f32(const std::byte* in) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(in[i]) << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

using RecordBytes = std::array<std::byte, RenderBatch::kStride>;

RecordBytes pack(const Vec3& position, const ShadedPoint& shaded) {
  RecordBytes r{};
  encode_record(make_record(position, shaded), r);
  return r;
}

}  // namespace

RenderBatch::RenderBatch(std::vector<std::byte> bytes, std::size_t count)
    : bytes_(std::move(bytes)), count_(count) {
  if (bytes_.size() != count_ * kStride) {
    throw std::invalid_argument(fmt::format("batch of {} records needs {} bytes, got {}", count_,
                                            count_ * kStride, bytes_.size()));
  }
}

BatchRecord RenderBatch::record(std::size_t i) const {
  if (i >= count_) {
    throw std::out_of_range("batch record index out of range");
  }
  const std::byte* p = bytes_.data() + i * kStride;
  BatchRecord r;
  r.x = get_f32(p);
  r.y = get_f32(p + 4);
  r.z = get_f32(p + 8);
  r.rgba = {std::to_integer<std::uint8_t>(p[12]), std::to_integer<std::uint8_t>(p[13]),
            std::to_integer<std::uint8_t>(p[14]), std::to_integer<std::uint8_t>(p[15])};
  r.size_px = get_f32(p + 16);
  return r;
}

void encode_record(const BatchRecord& r, std::span<std::byte, RenderBatch::kStride> out) {
  put_f32(out.data(), r.x);
  put_f32(out.data() + 4, r.y);
  put_f32(out.data() + 8, r.z);
  out[12] = std::byte{r.rgba.r};
  out[13] = std::byte{r.rgba.g};
  out[14] = std::byte{r.rgba.b};
  out[15] = std::byte{r.rgba.a};
  put_f32(out.data() + 16, r.size_px);
  std::fill(out.begin() + 20, out.end(), std::byte{0});
}

BatchRecord make_record(const Vec3& position, const ShadedPoint& shaded) {
  return {static_cast<float>(position.x), static_cast<float>(position.y),
          static_cast<float>(position.z), shaded.rgba, shaded.size_px};
}

std::string_view strategy_name(const BatchStrategy& s) {
  return std::visit(Overloaded{
                        [](const PerPoint&) { return std::string_view("per-point"); },
                        [](const Chunked&) { return std::string_view("chunked"); },
                        [](const SingleBuffer&) { return std::string_view("single"); },
                    },
                    s);
}

BatchStrategy strategy_from_name(std::string_view name, std::size_t chunk) {
  if (name == "per-point") return PerPoint{};
  if (name == "chunked") {
    if (chunk == 0) {
      throw std::invalid_argument("chunk size must be at least 1");
    }
    return Chunked{chunk};
  }
  if (name == "single") return SingleBuffer{};
  throw std::invalid_argument(fmt::format("unknown batch strategy '{}'", name));
}

void DeviceBuffer::reserve(std::size_t bytes) {
  std::lock_guard lock(mu_);
  bytes_.reserve(bytes);
}

void DeviceBuffer::submit(std::span<const std::byte> records) {
  std::lock_guard lock(mu_);
  bytes_.insert(bytes_.end(), records.begin(), records.end());
  ++submissions_;
}

std::size_t DeviceBuffer::submissions() const {
  std::lock_guard lock(mu_);
  return submissions_;
}

RenderBatch DeviceBuffer::take() {
  std::lock_guard lock(mu_);
  const std::size_t count = bytes_.size() / RenderBatch::kStride;
  submissions_ = 0;
  return RenderBatch(std::exchange(bytes_, {}), count);
}

RenderBatch build_batch(std::span<const Vec3> positions, std::span<const ShadedPoint> shaded,
                        const BatchStrategy& strategy) {
  if (positions.size() != shaded.size()) {
    throw std::invalid_argument("positions and shaded points differ in length");
  }
  DeviceBuffer device;
  std::visit(
      Overloaded{
          [&](const PerPoint&) {
            for (std::size_t i = 0; i < shaded.size(); ++i) {
              if (shaded[i].keep) {
                const RecordBytes r = pack(positions[i], shaded[i]);
                device.submit(r);
              }
            }
          },
          [&](const Chunked& c) {
            const std::size_t n = std::max<std::size_t>(c.n, 1);
            std::vector<std::byte> staging;
            for (std::size_t begin = 0; begin < shaded.size(); begin += n) {
              const std::size_t end = std::min(begin + n, shaded.size());
              staging.clear();
              for (std::size_t i = begin; i < end; ++i) {
                if (shaded[i].keep) {
                  const RecordBytes r = pack(positions[i], shaded[i]);
                  staging.insert(staging.end(), r.begin(), r.end());
                }
              }
              if (!staging.empty()) {
                device.submit(staging);
              }
            }
          },
          [&](const SingleBuffer&) {
            const auto kept = static_cast<std::size_t>(
                std::count_if(shaded.begin(), shaded.end(), [](const ShadedPoint& s) { return s.keep; }));
            std::vector<std::byte> staging(kept * RenderBatch::kStride);
            std::size_t k = 0;
            for (std::size_t i = 0; i < shaded.size(); ++i) {
              if (shaded[i].keep) {
                encode_record(make_record(positions[i], shaded[i]),
                              std::span<std::byte, RenderBatch::kStride>(
                                  staging.data() + k * RenderBatch::kStride, RenderBatch::kStride));
                ++k;
              }
            }
            device.reserve(staging.size());
            if (!staging.empty()) {
              device.submit(staging);
            }
          },
      },
      strategy);
  return device.take();
}

RenderBatch shade_and_batch(const PointCloud& cloud, const ShadingMode& mode, const Pose& viewer,
                            double time_s, const BatchStrategy& strategy,
                            const PointSizeConfig& sizing) {
  const auto points = cloud.points();
  return std::visit(
      Overloaded{
          [&](const PerPoint&) {
            DeviceBuffer device;
            for (const CloudPoint& p : points) {
              const ShadedPoint s = shade_point(p, mode, viewer.translation, time_s, sizing);
              if (s.keep) {
                const RecordBytes r = pack(p.position, s);
                device.submit(r);
              }
            }
            return device.take();
          },
          [&](const Chunked& c) {
            const std::size_t n = std::max<std::size_t>(c.n, 1);
            DeviceBuffer device;
            std::vector<std::byte> staging;
            for (std::size_t begin = 0; begin < points.size(); begin += n) {
              const std::size_t end = std::min(begin + n, points.size());
              staging.clear();
              for (std::size_t i = begin; i < end; ++i) {
                const ShadedPoint s = shade_point(points[i], mode, viewer.translation, time_s, sizing);
                if (s.keep) {
                  const RecordBytes r = pack(points[i].position, s);
                  staging.insert(staging.end(), r.begin(), r.end());
                }
              }
              if (!staging.empty()) {
                device.submit(staging);
              }
            }
            return device.take();
          },
          [&](const SingleBuffer& s) {
            const std::vector<ShadedPoint> shaded = shade(cloud, mode, viewer, time_s, sizing);
            const std::vector<Vec3> positions = cloud.positions();
            return build_batch(positions, shaded, s);
          },
      },
      strategy);
}

}  // namespace asab
