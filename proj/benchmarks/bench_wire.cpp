#include <benchmark/benchmark.h>

#include "asab/datagram.hpp"
#include "asab/point_cloud.hpp"
#include "asab/wire.hpp"

using namespace asab;

static void BM_EncodeCloud(benchmark::State& state) {
  const auto msg = wire::make_cloud_message(random_cloud(static_cast<std::size_t>(state.range(0)), 1.0, 3));
  for (auto _ : state) benchmark::DoNotOptimize(wire::encode(msg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeCloud)->Arg(1000)->Arg(100'000);

static void BM_DecodeCloud(benchmark::State& state) {
  const auto bytes = wire::encode(wire::make_cloud_message(random_cloud(static_cast<std::size_t>(state.range(0)), 1.0, 3)));
  for (auto _ : state) benchmark::DoNotOptimize(wire::decode(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_DecodeCloud)->Arg(1000)->Arg(100'000);

static void BM_Crc32(benchmark::State& state) {
  const std::vector<std::uint8_t> data(static_cast<std::size_t>(state.range(0)), 0x5A);
  for (auto _ : state) benchmark::DoNotOptimize(wire::crc32(data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Crc32)->Arg(200 * 1024);

static void BM_ChunkAndReassemble(benchmark::State& state) {
  const std::vector<std::uint8_t> payload(200 * 1024, 0x11);
  std::uint32_t seq = 0;
  wire::Reassembler r;
  for (auto _ : state) {
    for (const auto& d : wire::chunk_stream_frame(payload, 1, seq, seq)) {
      const auto bytes = wire::encode_datagram(d);
      benchmark::DoNotOptimize(r.push(wire::decode_datagram(bytes), seq));
    }
    ++seq;
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(payload.size()));
}
BENCHMARK(BM_ChunkAndReassemble);
