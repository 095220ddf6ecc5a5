#include <doctest.h>

#include <algorithm>
#include <random>

#include "asab/datagram.hpp"
#include "asab/stream_meter.hpp"
#include "test_support.hpp"

using namespace asab::wire;

namespace {

std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

std::vector<std::uint8_t> reassemble_all(const std::vector<Datagram>& chunks) {
  Reassembler r;
  std::vector<ReassembledFrame> out;
  for (const Datagram& d : chunks) {
    auto f = r.push(decode_datagram(encode_datagram(d)), 0);
    out.insert(out.end(), f.begin(), f.end());
  }
  REQUIRE(out.size() == 1);
  return out.front().payload;
}

}  // namespace

TEST_CASE("datagram golden bytes") {
  const auto golden = asab::test::load_golden(asab::test::fixture_dir() / "wire_golden.txt");
  Datagram d{1, 2, 3, 0, 1, {'a', 'b', 'c'}};
  CHECK(encode_datagram(d) == golden.at("datagram"));
  CHECK(decode_datagram(golden.at("datagram")) == d);
}

TEST_CASE("datagram validation") {
  CHECK_THROWS_AS(encode_datagram({0, 0, 0, 0, 1, std::vector<std::uint8_t>(1401)}), ProtocolError);
  CHECK_THROWS_AS(encode_datagram({0, 0, 0, 1, 1, {}}), ProtocolError);
  auto bytes = encode_datagram({0, 0, 0, 0, 1, {1}});
  CHECK_THROWS_AS(decode_datagram(std::span(bytes).first(21)), ProtocolError);
  auto bad = bytes;
  bad[3] = 'B';
  CHECK_THROWS_AS(decode_datagram(bad), ProtocolError);
  bad = bytes;
  bad[18] = 5;  // chunk_index 5 of 1
  CHECK_THROWS_AS(decode_datagram(bad), ProtocolError);
}

TEST_CASE("chunk_stream_frame boundaries") {
  std::mt19937_64 rng(1);
  CHECK(chunk_stream_frame(random_bytes(rng, 1), 0, 0, 0).size() == 1);
  CHECK(chunk_stream_frame(random_bytes(rng, 1), 0, 0, 0).front().chunk_total == 1);
  CHECK(chunk_stream_frame(random_bytes(rng, 1400), 0, 0, 0).size() == 1);
  CHECK(chunk_stream_frame(random_bytes(rng, 1401), 0, 0, 0).size() == 2);
  CHECK_THROWS_AS(chunk_stream_frame({}, 0, 0, 0), ProtocolError);

  const auto chunks = chunk_stream_frame(random_bytes(rng, 5000), 9, 77, 1234);
  REQUIRE(chunks.size() == 4);
  for (std::uint16_t i = 0; i < 4; ++i) {
    CHECK(chunks[i].chunk_index == i);
    CHECK(chunks[i].chunk_total == 4);
    CHECK(chunks[i].seq == 77);
    CHECK(chunks[i].stream_id == 9);
    CHECK(chunks[i].send_ts_ns == 1234);
  }
  CHECK(chunks.back().payload.size() == 5000 - 3 * 1400);
}

TEST_CASE("chunk then reassemble round-trips payloads up to 8 MiB") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {std::size_t{1}, std::size_t{1399}, std::size_t{1400}, std::size_t{1401},
                        std::size_t{200 * 1024}, std::size_t{8 * 1024 * 1024}}) {
    const auto payload = random_bytes(rng, n);
    CHECK(reassemble_all(chunk_stream_frame(payload, 1, 5, 0)) == payload);
  }
  for (int i = 0; i < 50; ++i) {
    const auto payload = random_bytes(rng, std::uniform_int_distribution<std::size_t>(1, 100000)(rng));
    auto chunks = chunk_stream_frame(payload, 1, 5, 0);
    std::shuffle(chunks.begin(), chunks.end(), rng);
    CHECK(reassemble_all(chunks) == payload);
  }
}

TEST_CASE("reassembly drops duplicates") {
  std::mt19937_64 rng(3);
  const auto payload = random_bytes(rng, 3000);
  auto chunks = chunk_stream_frame(payload, 0, 1, 0);
  Reassembler r;
  CHECK(r.push(chunks[0], 0).empty());
  CHECK(r.push(chunks[0], 0).empty());
  CHECK(r.push(chunks[1], 0).empty());
  const auto out = r.push(chunks[2], 0);
  REQUIRE(out.size() == 1);
  CHECK(out.front().payload == payload);
  CHECK(r.push(chunks[2], 0).empty());
  CHECK(r.stats().delivered == 1);
  CHECK(r.stats().duplicates == 1);
  CHECK(r.stats().late == 1);
}

TEST_CASE("a frame missing one chunk is lost after the timeout and later frames still arrive") {
  std::mt19937_64 rng(4);
  const std::uint64_t ms = 1'000'000;
  Reassembler r(200 * ms);
  std::vector<ReassembledFrame> delivered;
  for (std::uint32_t seq = 0; seq < 5; ++seq) {
    const auto chunks = chunk_stream_frame(random_bytes(rng, 4000), 0, seq, seq * 33 * ms);
    for (const Datagram& d : chunks) {
      if (seq == 1 && d.chunk_index == 2) continue;
      const auto out = r.push(d, seq * 33 * ms);
      delivered.insert(delivered.end(), out.begin(), out.end());
    }
  }
  // Frame 0 came out; 2..4 wait behind the incomplete frame 1.
  REQUIRE(delivered.size() == 1);
  CHECK(r.expire(100 * ms).empty());
  const auto after = r.expire(33 * ms + 200 * ms);
  REQUIRE(after.size() == 3);
  CHECK(after[0].seq == 2);
  CHECK(after[2].seq == 4);
  CHECK(r.stats().lost == 1);
  CHECK(r.stats().delivered == 4);
}

TEST_CASE("under random chunk loss exactly the complete frames are delivered, in order") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution drop(0.05);
  Reassembler r(1'000'000);
  std::vector<std::uint32_t> complete;
  std::size_t partial = 0;  // frames with some but not all chunks
  std::vector<ReassembledFrame> got;
  std::uint64_t now = 0;
  for (std::uint32_t seq = 0; seq < 300; ++seq) {
    const auto payload = random_bytes(rng, std::uniform_int_distribution<std::size_t>(1, 10000)(rng));
    bool all = true, any = false;
    for (const Datagram& d : chunk_stream_frame(payload, 3, seq, now)) {
      if (drop(rng)) {
        all = false;
        continue;
      }
      any = true;
      const auto out = r.push(d, now);
      got.insert(got.end(), out.begin(), out.end());
    }
    if (all) complete.push_back(seq);
    if (any && !all) ++partial;
    now += 10'000;
  }
  const auto tail = r.expire(now + 10'000'000);
  got.insert(got.end(), tail.begin(), tail.end());
  std::vector<std::uint32_t> seqs;
  for (const auto& f : got) seqs.push_back(f.seq);
  CHECK(seqs == complete);
  // A frame whose every chunk vanished is never seen, so it cannot be counted.
  CHECK(r.stats().lost == partial);
}

TEST_CASE("reassembler bounds its pending table") {
  Reassembler r(1'000'000'000, 4);
  for (std::uint32_t seq = 0; seq < 100; ++seq) {
    r.push({0, seq, 0, 0, 2, {1}}, 0);
  }
  CHECK(r.stats().lost == 96);
}

TEST_CASE("meter") {
  const std::uint64_t s = 1'000'000'000;
  std::vector<FrameEvent> events;
  for (std::uint32_t i = 0; i < 30; ++i) {
    const std::uint64_t recv = 10 * s + i * (s / 30);
    events.push_back({i, recv - 650'000'000, recv});
  }
  const StreamStats st = meter(events, s);
  CHECK(st.frames == 30);
  CHECK(st.fps == doctest::Approx(30.0));
  CHECK(st.latency_mean_s == doctest::Approx(0.65));
  CHECK(st.latency_p95_s == doctest::Approx(0.65));
  CHECK(st.loss_fraction == 0.0);

  std::vector<FrameEvent> gaps{{1, 0, 10}, {2, 0, 20}, {4, 0, 30}, {5, 0, 40}};
  CHECK(meter(gaps, s).loss_fraction == doctest::Approx(0.2));
  CHECK(meter({}, s).frames == 0);
  CHECK(meter({}, s).fps == 0.0);
}

TEST_CASE("StreamMeter snapshots") {
  StreamMeter m(1'000'000'000, 8);
  for (std::uint32_t i = 0; i < 20; ++i) m.record({i, i * 1000, i * 1000 + 500});
  CHECK(m.events().size() == 8);
  const StreamStats st = m.snapshot();
  CHECK(st.latency_mean_s == doctest::Approx(500e-9));
  CHECK(st.loss_fraction <= 1.0);
}

TEST_CASE("percentile") {
  CHECK(percentile({}, 0.5) == 0.0);
  CHECK(percentile({3, 1, 2}, 0.0) == 1.0);
  CHECK(percentile({3, 1, 2}, 1.0) == 3.0);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(percentile(v, 0.95) == 95.0);
}
