#include <cmath>

#include <benchmark/benchmark.h>

#include "asab/sim_world.hpp"

using namespace asab;

static void BM_Raycast(benchmark::State& state) {
  const Scene scene = default_scene();
  const Vec3 origin{1.0, 1.0, 0.5};
  double angle = 0.0;
  for (auto _ : state) {
    angle += 0.01;
    benchmark::DoNotOptimize(raycast(scene, origin, {std::cos(angle), std::sin(angle), -0.1}));
  }
}
BENCHMARK(BM_Raycast);

static void BM_RenderDepthCloud(benchmark::State& state) {
  const Scene scene = default_scene();
  const CameraModel model;
  const Pose camera{{1.0, 1.0, 0.5}, UnitQuaternion::identity()};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(render_depth_cloud(scene, camera, model, ++seed));
  state.SetItemsProcessed(state.iterations() * model.columns * model.rows);
}
BENCHMARK(BM_RenderDepthCloud)->Unit(benchmark::kMillisecond);
