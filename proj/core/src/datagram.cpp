#include "asab/datagram.hpp"

#include <cstring>

#include <fmt/format.h>

namespace asab::wire {

namespace {

constexpr std::uint8_t kDatagramMagic[4] = {'A', 'S', 'A', 'D'};

void put(std::vector<std::uint8_t>& out, std::size_t at, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) out[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get(std::span<const std::uint8_t> in, std::size_t at, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= std::uint64_t{in[at + static_cast<std::size_t>(i)]} << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_datagram(const Datagram& d) {
  if (d.payload.size() > kMaxChunkPayload) {
    throw ProtocolError(ErrorKind::PayloadTooLarge,
                        fmt::format("datagram payload {} exceeds {}", d.payload.size(), kMaxChunkPayload));
  }
  if (d.chunk_total == 0 || d.chunk_index >= d.chunk_total) {
    throw ProtocolError(ErrorKind::InvalidField, "chunk index must be below chunk total");
  }
  std::vector<std::uint8_t> out(kDatagramHeaderSize + d.payload.size());
  std::memcpy(out.data(), kDatagramMagic, 4);
  put(out, 4, d.stream_id, 2);
  put(out, 6, d.seq, 4);
  put(out, 10, d.send_ts_ns, 8);
  put(out, 18, d.chunk_index, 2);
  put(out, 20, d.chunk_total, 2);
  std::copy(d.payload.begin(), d.payload.end(), out.begin() + kDatagramHeaderSize);
  return out;
}

Datagram decode_datagram(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kDatagramHeaderSize) {
    throw ProtocolError(ErrorKind::Truncated,
                        fmt::format("datagram of {} bytes is shorter than its header", bytes.size()));
  }
  if (std::memcmp(bytes.data(), kDatagramMagic, 4) != 0) {
    throw ProtocolError(ErrorKind::BadMagic, "datagram does not start with 'ASAD'");
  }
  if (bytes.size() - kDatagramHeaderSize > kMaxChunkPayload) {
    throw ProtocolError(ErrorKind::PayloadTooLarge, "datagram payload exceeds the chunk limit");
  }
  Datagram d;
  d.stream_id = static_cast<std::uint16_t>(get(bytes, 4, 2));
  d.seq = static_cast<std::uint32_t>(get(bytes, 6, 4));
  d.send_ts_ns = get(bytes, 10, 8);
  d.chunk_index = static_cast<std::uint16_t>(get(bytes, 18, 2));
  d.chunk_total = static_cast<std::uint16_t>(get(bytes, 20, 2));
  if (d.chunk_total == 0 || d.chunk_index >= d.chunk_total) {
    throw ProtocolError(ErrorKind::InvalidField,
                        fmt::format("chunk {} of {}", d.chunk_index, d.chunk_total));
  }
  d.payload.assign(bytes.begin() + kDatagramHeaderSize, bytes.end());
  return d;
}

std::vector<Datagram> chunk_stream_frame(std::span<const std::uint8_t> frame_payload,
                                         std::uint16_t stream_id, std::uint32_t seq,
                                         std::uint64_t now_ns, std::size_t chunk_payload) {
  if (frame_payload.empty()) {
    throw ProtocolError(ErrorKind::InvalidField, "cannot chunk an empty frame");
  }
  if (chunk_payload == 0 || chunk_payload > kMaxChunkPayload) {
    throw ProtocolError(ErrorKind::InvalidField, "chunk payload must be in [1, 1400]");
  }
  const std::size_t total = (frame_payload.size() + chunk_payload - 1) / chunk_payload;
  if (total > 0xFFFF) {
    throw ProtocolError(ErrorKind::PayloadTooLarge,
                        fmt::format("frame needs {} chunks, limit is 65535", total));
  }
  std::vector<Datagram> out;
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t begin = i * chunk_payload;
    const std::size_t end = std::min(begin + chunk_payload, frame_payload.size());
    Datagram d;
    d.stream_id = stream_id;
    d.seq = seq;
    d.send_ts_ns = now_ns;
    d.chunk_index = static_cast<std::uint16_t>(i);
    d.chunk_total = static_cast<std::uint16_t>(total);
    d.payload.assign(frame_payload.begin() + static_cast<std::ptrdiff_t>(begin),
                     frame_payload.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(d));
  }
  return out;
}

Reassembler::Reassembler(std::uint64_t drop_incomplete_after_ns, std::size_t max_pending_frames)
    : timeout_ns_(drop_incomplete_after_ns), max_pending_(std::max<std::size_t>(max_pending_frames, 1)) {}

std::vector<ReassembledFrame> Reassembler::push(const Datagram& d, std::uint64_t now_ns) {
  std::vector<ReassembledFrame> out;
  Stream& s = streams_[d.stream_id];
  if (d.chunk_total == 0 || d.chunk_index >= d.chunk_total) {
    ++stats_.malformed;
    return out;
  }
  if (s.last_released && d.seq <= *s.last_released) {
    ++stats_.late;
    release(d.stream_id, s, now_ns, out);
    return out;
  }
  auto it = s.pending.find(d.seq);
  if (it == s.pending.end()) {
    // After release() the head is always incomplete, so a full table drops it.
    while (s.pending.size() >= max_pending_) {
      auto oldest = s.pending.begin();
      ++stats_.lost;
      s.last_released = oldest->first;
      s.pending.erase(oldest);
      release(d.stream_id, s, now_ns, out);
    }
    if (s.last_released && d.seq <= *s.last_released) {
      ++stats_.late;
      return out;
    }
    Pending p;
    p.first_seen_ns = now_ns;
    p.send_ts_ns = d.send_ts_ns;
    p.chunk_total = d.chunk_total;
    p.chunks.resize(d.chunk_total);
    it = s.pending.emplace(d.seq, std::move(p)).first;
  }
  Pending& p = it->second;
  if (p.chunk_total != d.chunk_total || p.send_ts_ns != d.send_ts_ns) {
    ++stats_.malformed;
  } else if (p.chunks[d.chunk_index]) {
    ++stats_.duplicates;
  } else {
    p.chunks[d.chunk_index] = d.payload;
    ++p.received;
  }
  release(d.stream_id, s, now_ns, out);
  return out;
}

std::vector<ReassembledFrame> Reassembler::expire(std::uint64_t now_ns) {
  std::vector<ReassembledFrame> out;
  for (auto& [id, s] : streams_) {
    release(id, s, now_ns, out);
  }
  return out;
}

void Reassembler::release(std::uint16_t stream_id, Stream& s, std::uint64_t now_ns,
                          std::vector<ReassembledFrame>& out) {
  while (!s.pending.empty()) {
    auto head = s.pending.begin();
    Pending& p = head->second;
    if (p.complete()) {
      ReassembledFrame f;
      f.stream_id = stream_id;
      f.seq = head->first;
      f.send_ts_ns = p.send_ts_ns;
      std::size_t size = 0;
      for (const auto& c : p.chunks) size += c->size();
      f.payload.reserve(size);
      for (const auto& c : p.chunks) f.payload.insert(f.payload.end(), c->begin(), c->end());
      out.push_back(std::move(f));
      ++stats_.delivered;
    } else if (now_ns >= p.first_seen_ns && now_ns - p.first_seen_ns >= timeout_ns_) {
      ++stats_.lost;
    } else {
      return;
    }
    s.last_released = head->first;
    s.pending.erase(head);
  }
}

}  // namespace asab::wire
