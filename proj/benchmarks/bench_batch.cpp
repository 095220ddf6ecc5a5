#include <benchmark/benchmark.h>

#include "asab/render_batch.hpp"
#include "asab/shading.hpp"

using namespace asab;

namespace {
const PointCloud& cloud() {
  static const PointCloud c = random_cloud(100'000, 0.5, 1);
  return c;
}
}  // namespace

static void BM_ShadeAndBatch(benchmark::State& state, BatchStrategy strategy) {
  const ShadingMode mode(DistanceRamp{0.5, 4.0});
  const Pose viewer{{-2, 0, 0}, UnitQuaternion::identity()};
  for (auto _ : state) benchmark::DoNotOptimize(shade_and_batch(cloud(), mode, viewer, 0.0, strategy));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud().size()));
}
BENCHMARK_CAPTURE(BM_ShadeAndBatch, per_point, BatchStrategy{PerPoint{}})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ShadeAndBatch, chunked_1023, BatchStrategy{Chunked{1023}})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ShadeAndBatch, single, BatchStrategy{SingleBuffer{}})->Unit(benchmark::kMillisecond);

static void BM_ShadeOnly(benchmark::State& state, ModeKind kind) {
  const ShadingMode mode = ShadingMode::defaults(kind);
  const Pose viewer{{-2, 0, 0}, UnitQuaternion::identity()};
  for (auto _ : state) benchmark::DoNotOptimize(shade(cloud(), mode, viewer, 0.25));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud().size()));
}
BENCHMARK_CAPTURE(BM_ShadeOnly, distance, ModeKind::DistanceRamp)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ShadeOnly, sonar, ModeKind::Sonar)->Unit(benchmark::kMillisecond);
