#pragma once

// Framed binary envelope shared by every bridge connection.
//
// Frame = 16-byte header + payload, all integers little-endian:
//   magic "ASAB" | version u8 | msg_type u8 | flags u16 | payload_len u32 | crc32 u32
// The CRC (reflected, polynomial 0xEDB88320) covers the payload only.
// docs/protocol.md is the normative layout with golden dumps.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "asab/geometry.hpp"
#include "asab/point_cloud.hpp"
#include "asab/shading.hpp"

namespace asab::wire {

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kMaxPayload = 64u * 1024u * 1024u;
inline constexpr std::size_t kMaxFrameId = 255;
inline constexpr std::size_t kCloudRecordSize = 16;

enum class MessageType : std::uint8_t {
  Hello = 1,
  Subscribe = 2,
  PointCloud = 3,
  Pose = 4,
  Twist = 5,
  StreamFrame = 6,
  TagObservation = 7,
  ModeChange = 8,
  Heartbeat = 9,
};

std::string_view type_name(MessageType t);

enum class ErrorKind {
  BadMagic,
  UnsupportedVersion,
  UnknownType,
  CrcMismatch,
  Truncated,
  LengthMismatch,
  PayloadTooLarge,
  InvalidField,
};

std::string_view error_kind_name(ErrorKind k);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ErrorKind kind, const std::string& detail);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

enum class Role : std::uint8_t { Publisher = 1, Subscriber = 2, Both = 3 };

struct Hello {
  Role role = Role::Both;
  std::string client_name;
  bool operator==(const Hello&) const = default;
};

struct Subscribe {
  std::string topic;
  bool subscribe = true;  // false unsubscribes
  bool operator==(const Subscribe&) const = default;
};

/// 16-byte point record: 3 x f32 position, r, g, b, one zero pad byte.
struct WirePoint {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  Rgb color;
  bool operator==(const WirePoint&) const = default;
};

struct Cloud {
  std::vector<WirePoint> points;
  bool operator==(const Cloud&) const = default;
};

struct PoseBody {
  Pose pose;
  bool operator==(const PoseBody&) const = default;
};

struct Twist {
  double linear = 0.0;   // m/s
  double angular = 0.0;  // rad/s
  bool operator==(const Twist&) const = default;
};

struct StreamFrame {
  std::uint16_t stream_id = 0;
  std::uint32_t seq = 0;
  std::vector<std::uint8_t> data;
  bool operator==(const StreamFrame&) const = default;
};

struct TagSighting {
  std::uint32_t tag_id = 0;
  Pose pose_device_tag;
  bool operator==(const TagSighting&) const = default;
};

struct ModeChange {
  ShadingMode mode;
  bool operator==(const ModeChange&) const = default;
};

struct Heartbeat {
  bool operator==(const Heartbeat&) const = default;
};

using Body = std::variant<Hello, Subscribe, Cloud, PoseBody, Twist, StreamFrame, TagSighting,
                          ModeChange, Heartbeat>;

/// Payload layouts (after the header):
///   Heartbeat:   timestamp u64
///   all others:  frame_id (u8 length + UTF-8) | timestamp u64 | body
/// Bodies:
///   Hello          role u8 | client name (u8 length + UTF-8)
///   Subscribe      action u8 (1 subscribe, 0 unsubscribe) | topic (u8 length + UTF-8)
///   PointCloud     count u32 | count x 16-byte WirePoint
///   Pose           tx ty tz qw qx qy qz as f64
///   Twist          linear angular as f64
///   StreamFrame    stream_id u16 | seq u32 | length u32 | bytes
///   TagObservation tag_id u32 | tx ty tz qw qx qy qz as f64
///   ModeChange     kind u8 | mode parameters as f64 (count fixed by kind)
struct WireMessage {
  std::uint64_t timestamp_ns = 0;
  std::string frame_id;
  std::uint16_t flags = 0;
  Body body;

  MessageType type() const;
  bool operator==(const WireMessage&) const = default;
};

/// Throws ProtocolError before producing output if the message is invalid.
std::vector<std::uint8_t> encode(const WireMessage& msg);

/// Decodes exactly one frame occupying all of `bytes`.
WireMessage decode(std::span<const std::uint8_t> bytes);

struct FrameHeader {
  MessageType type = MessageType::Heartbeat;
  std::uint8_t version = kVersion;
  std::uint16_t flags = 0;
  std::uint32_t payload_len = 0;
  std::uint32_t crc32 = 0;
};

/// Validates the 16-byte header (magic, version, type, length bound).
FrameHeader parse_header(std::span<const std::uint8_t> bytes);

/// Incremental frame splitter for byte streams.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete frame's bytes, or nullopt if more input is needed. Throws
  /// ProtocolError on a corrupt header (the stream cannot be resynchronized).
  std::optional<std::vector<std::uint8_t>> next_frame();
  std::size_t buffered() const { return buffer_.size() - start_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t start_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Converts between the double-precision cloud and its f32 wire form.
Cloud to_wire(const PointCloud& cloud);
PointCloud from_wire(const Cloud& cloud, std::string frame_id, std::uint64_t timestamp_ns);

WireMessage make_cloud_message(const PointCloud& cloud);
WireMessage make_heartbeat(std::uint64_t timestamp_ns);

/// One line summary, used by protocol-dump.
std::string describe(const WireMessage& msg);

/// Strict UTF-8 validation (no overlongs, surrogates or code points > U+10FFFF).
bool is_valid_utf8(std::string_view s);

}  // namespace asab::wire
