#pragma once

// Chunked datagram streaming with sender timestamps.
//
// Datagram = 22-byte header + payload, little-endian:
//   magic "ASAD" | stream_id u16 | seq u32 | send_ts u64 | chunk_index u16 | chunk_total u16
// The payload length is the remainder of the datagram (at most kMaxChunkPayload).

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "asab/wire.hpp"

namespace asab::wire {

inline constexpr std::size_t kDatagramHeaderSize = 22;
inline constexpr std::size_t kMaxChunkPayload = 1400;

struct Datagram {
  std::uint16_t stream_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t send_ts_ns = 0;
  std::uint16_t chunk_index = 0;
  std::uint16_t chunk_total = 1;
  std::vector<std::uint8_t> payload;
  bool operator==(const Datagram&) const = default;
};

std::vector<std::uint8_t> encode_datagram(const Datagram& d);
/// Throws ProtocolError (BadMagic, Truncated, InvalidField, PayloadTooLarge).
Datagram decode_datagram(std::span<const std::uint8_t> bytes);

/// ceil(len / chunk_payload) datagrams sharing seq and send_ts. Throws on an
/// empty payload or more than 65535 chunks.
std::vector<Datagram> chunk_stream_frame(std::span<const std::uint8_t> frame_payload,
                                         std::uint16_t stream_id, std::uint32_t seq,
                                         std::uint64_t now_ns,
                                         std::size_t chunk_payload = kMaxChunkPayload);

struct ReassembledFrame {
  std::uint16_t stream_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t send_ts_ns = 0;
  std::vector<std::uint8_t> payload;
};

struct ReassemblyStats {
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;            // incomplete frames dropped after the timeout
  std::uint64_t duplicates = 0;      // chunks already held
  std::uint64_t late = 0;            // chunks of frames already delivered or dropped
  std::uint64_t malformed = 0;       // chunks inconsistent with their frame
};

/// Rebuilds frames from datagrams that may arrive out of order, duplicated or
/// partially missing. Complete frames come out once each in seq order; a
/// complete frame waits behind older incomplete ones until they complete or
/// time out. Not thread-safe.
class Reassembler {
 public:
  explicit Reassembler(std::uint64_t drop_incomplete_after_ns = 200'000'000,
                       std::size_t max_pending_frames = 256);

  std::vector<ReassembledFrame> push(const Datagram& d, std::uint64_t now_ns);
  /// Drops incomplete frames older than the timeout and releases what follows them.
  std::vector<ReassembledFrame> expire(std::uint64_t now_ns);

  const ReassemblyStats& stats() const { return stats_; }

 private:
  struct Pending {
    std::uint64_t first_seen_ns = 0;
    std::uint64_t send_ts_ns = 0;
    std::uint16_t chunk_total = 0;
    std::size_t received = 0;
    std::vector<std::optional<std::vector<std::uint8_t>>> chunks;
    bool complete() const { return received == chunk_total; }
  };
  struct Stream {
    std::optional<std::uint32_t> last_released;
    std::map<std::uint32_t, Pending> pending;
  };

  void release(std::uint16_t stream_id, Stream& s, std::uint64_t now_ns,
               std::vector<ReassembledFrame>& out);

  std::uint64_t timeout_ns_;
  std::size_t max_pending_;
  std::map<std::uint16_t, Stream> streams_;
  ReassemblyStats stats_;
};

}  // namespace asab::wire
