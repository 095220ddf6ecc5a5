#include "asab/wire.hpp"

#include <bit>
#include <cstring>

#include <fmt/format.h>
#include <zlib.h>

namespace asab::wire {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::uint8_t kMagic[4] = {'A', 'S', 'A', 'B'};

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str8(const std::string& s) {
    u8(static_cast<std::uint8_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str8(std::string_view what) {
    const std::size_t n = u8();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    if (!is_valid_utf8(s)) {
      throw ProtocolError(ErrorKind::InvalidField, fmt::format("{} is not valid UTF-8", what));
    }
    return s;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void finish() const {
    if (remaining() != 0) {
      throw ProtocolError(ErrorKind::LengthMismatch,
                          fmt::format("{} unexpected trailing payload bytes", remaining()));
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw ProtocolError(ErrorKind::LengthMismatch,
                          fmt::format("payload ends {} bytes early", n - remaining()));
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{in_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_text(const std::string& s, std::string_view what) {
  if (s.size() > kMaxFrameId) {
    throw ProtocolError(ErrorKind::InvalidField,
                        fmt::format("{} is {} bytes, limit {}", what, s.size(), kMaxFrameId));
  }
  if (!is_valid_utf8(s)) {
    throw ProtocolError(ErrorKind::InvalidField, fmt::format("{} is not valid UTF-8", what));
  }
}

void check_finite(double v, std::string_view what) {
  if (!std::isfinite(v)) {
    throw ProtocolError(ErrorKind::InvalidField, fmt::format("{} is not finite", what));
  }
}

std::size_t body_size(const Body& body) {
  return std::visit(
      Overloaded{
          [](const Hello& h) { return 2 + h.client_name.size(); },
          [](const Subscribe& s) { return 2 + s.topic.size(); },
          [](const Cloud& c) { return 4 + c.points.size() * kCloudRecordSize; },
          [](const PoseBody&) { return std::size_t{56}; },
          [](const Twist&) { return std::size_t{16}; },
          [](const StreamFrame& f) { return 10 + f.data.size(); },
          [](const TagSighting&) { return std::size_t{60}; },
          [](const ModeChange& m) { return 1 + 8 * m.mode.parameters().size(); },
          [](const Heartbeat&) { return std::size_t{0}; },
      },
      body);
}

void write_pose(Writer& w, const Pose& p) {
  w.f64(p.translation.x);
  w.f64(p.translation.y);
  w.f64(p.translation.z);
  w.f64(p.rotation.w());
  w.f64(p.rotation.x());
  w.f64(p.rotation.y());
  w.f64(p.rotation.z());
}

Pose read_pose(Reader& r) {
  Pose p;
  p.translation = {r.f64(), r.f64(), r.f64()};
  if (!p.translation.is_finite()) {
    throw ProtocolError(ErrorKind::InvalidField, "pose translation is not finite");
  }
  const double w = r.f64(), x = r.f64(), y = r.f64(), z = r.f64();
  try {
    p.rotation = UnitQuaternion::from_unit(w, x, y, z);
  } catch (const GeometryError& e) {
    throw ProtocolError(ErrorKind::InvalidField, fmt::format("pose rotation: {}", e.what()));
  }
  return p;
}

void validate(const WireMessage& m) {
  check_text(m.frame_id, "frame_id");
  std::visit(Overloaded{
                 [](const Hello& h) {
                   check_text(h.client_name, "client name");
                   if (h.role != Role::Publisher && h.role != Role::Subscriber && h.role != Role::Both) {
                     throw ProtocolError(ErrorKind::InvalidField, "unknown session role");
                   }
                 },
                 [](const Subscribe& s) { check_text(s.topic, "topic"); },
                 [](const Cloud& c) {
                   for (const WirePoint& p : c.points) {
                     if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
                       throw ProtocolError(ErrorKind::InvalidField, "cloud point is not finite");
                     }
                   }
                 },
                 [](const PoseBody& p) {
                   if (!p.pose.translation.is_finite()) {
                     throw ProtocolError(ErrorKind::InvalidField, "pose translation is not finite");
                   }
                 },
                 [](const Twist& t) {
                   check_finite(t.linear, "twist linear velocity");
                   check_finite(t.angular, "twist angular velocity");
                 },
                 [](const StreamFrame&) {},
                 [](const TagSighting& t) {
                   if (!t.pose_device_tag.translation.is_finite()) {
                     throw ProtocolError(ErrorKind::InvalidField, "tag pose is not finite");
                   }
                 },
                 [](const ModeChange&) {},
                 [&m](const Heartbeat&) {
                   if (!m.frame_id.empty()) {
                     throw ProtocolError(ErrorKind::InvalidField, "heartbeats carry no frame_id");
                   }
                 },
             },
             m.body);
}

}  // namespace

std::string_view type_name(MessageType t) {
  switch (t) {
    case MessageType::Hello: return "Hello";
    case MessageType::Subscribe: return "Subscribe";
    case MessageType::PointCloud: return "PointCloud";
    case MessageType::Pose: return "Pose";
    case MessageType::Twist: return "Twist";
    case MessageType::StreamFrame: return "StreamFrame";
    case MessageType::TagObservation: return "TagObservation";
    case MessageType::ModeChange: return "ModeChange";
    case MessageType::Heartbeat: return "Heartbeat";
  }
  return "Unknown";
}

std::string_view error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::UnsupportedVersion: return "unsupported-version";
    case ErrorKind::UnknownType: return "unknown-type";
    case ErrorKind::CrcMismatch: return "crc-mismatch";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::PayloadTooLarge: return "payload-too-large";
    case ErrorKind::InvalidField: return "invalid-field";
  }
  return "unknown";
}

ProtocolError::ProtocolError(ErrorKind kind, const std::string& detail)
    : std::runtime_error(fmt::format("{}: {}", error_kind_name(kind), detail)), kind_(kind) {}

MessageType WireMessage::type() const {
  return static_cast<MessageType>(body.index() + 1);
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  constexpr std::size_t kPiece = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kPiece) {
    const std::size_t n = std::min(kPiece, bytes.size() - off);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode(const WireMessage& msg) {
  validate(msg);
  const bool heartbeat = std::holds_alternative<Heartbeat>(msg.body);
  const std::size_t payload = (heartbeat ? 8 : 1 + msg.frame_id.size() + 8) + body_size(msg.body);
  if (payload > kMaxPayload) {
    throw ProtocolError(ErrorKind::PayloadTooLarge,
                        fmt::format("payload of {} bytes exceeds {}", payload, kMaxPayload));
  }
  Writer w(kHeaderSize + payload);
  w.bytes(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(msg.type()));
  w.u16(msg.flags);
  w.u32(static_cast<std::uint32_t>(payload));
  w.u32(0);  // CRC placeholder
  if (!heartbeat) {
    w.str8(msg.frame_id);
  }
  w.u64(msg.timestamp_ns);
  std::visit(Overloaded{
                 [&](const Hello& h) {
                   w.u8(static_cast<std::uint8_t>(h.role));
                   w.str8(h.client_name);
                 },
                 [&](const Subscribe& s) {
                   w.u8(s.subscribe ? 1 : 0);
                   w.str8(s.topic);
                 },
                 [&](const Cloud& c) {
                   w.u32(static_cast<std::uint32_t>(c.points.size()));
                   for (const WirePoint& p : c.points) {
                     w.f32(p.x);
                     w.f32(p.y);
                     w.f32(p.z);
                     w.u8(p.color.r);
                     w.u8(p.color.g);
                     w.u8(p.color.b);
                     w.u8(0);
                   }
                 },
                 [&](const PoseBody& p) { write_pose(w, p.pose); },
                 [&](const Twist& t) {
                   w.f64(t.linear);
                   w.f64(t.angular);
                 },
                 [&](const StreamFrame& f) {
                   w.u16(f.stream_id);
                   w.u32(f.seq);
                   w.u32(static_cast<std::uint32_t>(f.data.size()));
                   w.bytes(f.data);
                 },
                 [&](const TagSighting& t) {
                   w.u32(t.tag_id);
                   write_pose(w, t.pose_device_tag);
                 },
                 [&](const ModeChange& m) {
                   w.u8(static_cast<std::uint8_t>(m.mode.kind()));
                   for (double v : m.mode.parameters()) w.f64(v);
                 },
                 [](const Heartbeat&) {},
             },
             msg.body);
  auto& out = w.buffer();
  const std::uint32_t crc = crc32(std::span(out).subspan(kHeaderSize));
  for (int i = 0; i < 4; ++i) out[12 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(crc >> (8 * i));
  return std::move(out);
}

FrameHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw ProtocolError(ErrorKind::Truncated,
                        fmt::format("header needs {} bytes, have {}", kHeaderSize, bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ProtocolError(ErrorKind::BadMagic, "frame does not start with 'ASAB'");
  }
  Reader r(bytes.subspan(4, kHeaderSize - 4));
  FrameHeader h;
  h.version = r.u8();
  if (h.version != kVersion) {
    throw ProtocolError(ErrorKind::UnsupportedVersion, fmt::format("version {}", h.version));
  }
  const std::uint8_t type = r.u8();
  if (type < 1 || type > 9) {
    throw ProtocolError(ErrorKind::UnknownType, fmt::format("message type {}", type));
  }
  h.type = static_cast<MessageType>(type);
  h.flags = r.u16();
  h.payload_len = r.u32();
  h.crc32 = r.u32();
  if (h.payload_len > kMaxPayload) {
    throw ProtocolError(ErrorKind::PayloadTooLarge,
                        fmt::format("declared payload of {} bytes", h.payload_len));
  }
  return h;
}

WireMessage decode(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = parse_header(bytes);
  const std::size_t total = kHeaderSize + h.payload_len;
  if (bytes.size() < total) {
    throw ProtocolError(ErrorKind::Truncated,
                        fmt::format("frame needs {} bytes, have {}", total, bytes.size()));
  }
  if (bytes.size() > total) {
    throw ProtocolError(ErrorKind::LengthMismatch,
                        fmt::format("{} bytes after the frame", bytes.size() - total));
  }
  const auto payload = bytes.subspan(kHeaderSize);
  if (crc32(payload) != h.crc32) {
    throw ProtocolError(ErrorKind::CrcMismatch, "payload checksum does not match");
  }
  Reader r(payload);
  WireMessage m;
  m.flags = h.flags;
  if (h.type != MessageType::Heartbeat) {
    m.frame_id = r.str8("frame_id");
  }
  m.timestamp_ns = r.u64();
  switch (h.type) {
    case MessageType::Hello: {
      Hello hello;
      const std::uint8_t role = r.u8();
      if (role < 1 || role > 3) {
        throw ProtocolError(ErrorKind::InvalidField, fmt::format("session role {}", role));
      }
      hello.role = static_cast<Role>(role);
      hello.client_name = r.str8("client name");
      m.body = std::move(hello);
      break;
    }
    case MessageType::Subscribe: {
      Subscribe s;
      const std::uint8_t action = r.u8();
      if (action > 1) {
        throw ProtocolError(ErrorKind::InvalidField, fmt::format("subscribe action {}", action));
      }
      s.subscribe = action == 1;
      s.topic = r.str8("topic");
      m.body = std::move(s);
      break;
    }
    case MessageType::PointCloud: {
      const std::uint32_t count = r.u32();
      if (std::uint64_t{count} * kCloudRecordSize != r.remaining()) {
        throw ProtocolError(ErrorKind::LengthMismatch,
                            fmt::format("{} points need {} bytes, payload has {}", count,
                                        std::uint64_t{count} * kCloudRecordSize, r.remaining()));
      }
      Cloud c;
      c.points.resize(count);
      for (WirePoint& p : c.points) {
        p.x = r.f32();
        p.y = r.f32();
        p.z = r.f32();
        p.color = {r.u8(), r.u8(), r.u8()};
        r.u8();
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
          throw ProtocolError(ErrorKind::InvalidField, "cloud point is not finite");
        }
      }
      m.body = std::move(c);
      break;
    }
    case MessageType::Pose:
      m.body = PoseBody{read_pose(r)};
      break;
    case MessageType::Twist: {
      Twist t{r.f64(), r.f64()};
      check_finite(t.linear, "twist linear velocity");
      check_finite(t.angular, "twist angular velocity");
      m.body = t;
      break;
    }
    case MessageType::StreamFrame: {
      StreamFrame f;
      f.stream_id = r.u16();
      f.seq = r.u32();
      const std::uint32_t n = r.u32();
      if (n != r.remaining()) {
        throw ProtocolError(ErrorKind::LengthMismatch,
                            fmt::format("stream frame declares {} bytes, payload has {}", n,
                                        r.remaining()));
      }
      const auto data = r.take(n);
      f.data.assign(data.begin(), data.end());
      m.body = std::move(f);
      break;
    }
    case MessageType::TagObservation: {
      TagSighting t;
      t.tag_id = r.u32();
      t.pose_device_tag = read_pose(r);
      m.body = t;
      break;
    }
    case MessageType::ModeChange: {
      const std::uint8_t kind = r.u8();
      if (kind < 1 || kind > 5) {
        throw ProtocolError(ErrorKind::InvalidField, fmt::format("shading mode kind {}", kind));
      }
      const auto mk = static_cast<ModeKind>(kind);
      std::vector<double> params(ShadingMode::parameter_count(mk));
      for (double& v : params) v = r.f64();
      try {
        m.body = ModeChange{ShadingMode::from_parameters(mk, params)};
      } catch (const ModeError& e) {
        throw ProtocolError(ErrorKind::InvalidField, e.what());
      }
      break;
    }
    case MessageType::Heartbeat:
      m.body = Heartbeat{};
      break;
  }
  r.finish();
  return m;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (start_ > 0 && start_ == buffer_.size()) {
    buffer_.clear();
    start_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<std::vector<std::uint8_t>> FrameReader::next_frame() {
  const std::span<const std::uint8_t> pending(buffer_.data() + start_, buffer_.size() - start_);
  if (pending.size() < kHeaderSize) {
    return std::nullopt;
  }
  const FrameHeader h = parse_header(pending);
  const std::size_t total = kHeaderSize + h.payload_len;
  if (pending.size() < total) {
    return std::nullopt;
  }
  std::vector<std::uint8_t> frame(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(total));
  start_ += total;
  if (start_ > (1u << 20) && start_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
    start_ = 0;
  }
  return frame;
}

Cloud to_wire(const PointCloud& cloud) {
  Cloud c;
  c.points.reserve(cloud.size());
  for (const CloudPoint& p : cloud.points()) {
    c.points.push_back({static_cast<float>(p.position.x), static_cast<float>(p.position.y),
                        static_cast<float>(p.position.z), p.color});
  }
  return c;
}

PointCloud from_wire(const Cloud& cloud, std::string frame_id, std::uint64_t timestamp_ns) {
  std::vector<CloudPoint> points;
  points.reserve(cloud.points.size());
  for (const WirePoint& p : cloud.points) {
    points.push_back({{p.x, p.y, p.z}, p.color});
  }
  const std::size_t limit = std::max(points.size(), PointCloud::kDefaultMaxPoints);
  return PointCloud(std::move(frame_id), timestamp_ns, std::move(points), limit);
}

WireMessage make_cloud_message(const PointCloud& cloud) {
  WireMessage m;
  m.frame_id = cloud.frame_id();
  m.timestamp_ns = cloud.timestamp_ns();
  m.body = to_wire(cloud);
  return m;
}

WireMessage make_heartbeat(std::uint64_t timestamp_ns) {
  WireMessage m;
  m.timestamp_ns = timestamp_ns;
  m.body = Heartbeat{};
  return m;
}

std::string describe(const WireMessage& msg) {
  const std::string head = fmt::format("{} ts={} frame_id='{}' flags=0x{:04x}", type_name(msg.type()),
                                       msg.timestamp_ns, msg.frame_id, msg.flags);
  const std::string body = std::visit(
      Overloaded{
          [](const Hello& h) {
            return fmt::format("role={} name='{}'", static_cast<int>(h.role), h.client_name);
          },
          [](const Subscribe& s) {
            return fmt::format("{} topic='{}'", s.subscribe ? "subscribe" : "unsubscribe", s.topic);
          },
          [](const Cloud& c) { return fmt::format("points={}", c.points.size()); },
          [](const PoseBody& p) {
            const Pose& q = p.pose;
            return fmt::format("t=({:.6f}, {:.6f}, {:.6f}) q=({:.6f}, {:.6f}, {:.6f}, {:.6f})",
                               q.translation.x, q.translation.y, q.translation.z, q.rotation.w(),
                               q.rotation.x(), q.rotation.y(), q.rotation.z());
          },
          [](const Twist& t) { return fmt::format("linear={} angular={}", t.linear, t.angular); },
          [](const StreamFrame& f) {
            return fmt::format("stream={} seq={} bytes={}", f.stream_id, f.seq, f.data.size());
          },
          [](const TagSighting& t) {
            const Vec3& p = t.pose_device_tag.translation;
            return fmt::format("tag={} t=({:.6f}, {:.6f}, {:.6f})", t.tag_id, p.x, p.y, p.z);
          },
          [](const ModeChange& m) { return fmt::format("mode={}", m.mode.name()); },
          [](const Heartbeat&) { return std::string(); },
      },
      msg.body);
  return body.empty() ? head : head + " " + body;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

}  // namespace asab::wire
