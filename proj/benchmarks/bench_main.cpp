#include <random>

#include <benchmark/benchmark.h>

#include "objguide/pipeline.hpp"
#include "objguide/synth.hpp"

namespace og = objguide;

namespace {

og::QuadBox jittered(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-8, 8);
  return og::QuadBox({og::Vec2(u(rng), u(rng)), og::Vec2(100 + u(rng), u(rng)),
                      og::Vec2(100 + u(rng), 120 + u(rng)), og::Vec2(u(rng), 120 + u(rng))},
                     1.0);
}

void BM_QuadIou(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<og::QuadBox> a, b;
  for (int k = 0; k < 256; ++k) {
    a.push_back(jittered(rng));
    b.push_back(jittered(rng));
  }
  std::size_t n = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(og::quad_iou(a[n % 256], b[n % 256]));
    ++n;
  }
}
BENCHMARK(BM_QuadIou);

void BM_Dlt(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1000);
  og::Mat3 m;
  m << 1.05, 0.02, 40, -0.01, 0.98, 15, 2e-4, 1e-4, 1;
  const og::Homography h(m);
  std::vector<og::PointCorrespondence> corrs;
  for (int k = 0; k < state.range(0); ++k) {
    const og::Vec2 p(u(rng), u(rng));
    corrs.push_back({og::HomPoint::from_pixel(p), og::HomPoint::from_pixel(*h.map(p)), 1.0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(og::dlt_homography(corrs));
}
BENCHMARK(BM_Dlt)->Arg(4)->Arg(16)->Arg(64);

void BM_EstimateVps(benchmark::State& state) {
  const auto scene = og::synth::generate(og::synth::two_facade_scene(3));
  const auto segs = og::filter_short_segments(scene.views[0].segments, 20.0);
  og::VpParams params;
  for (auto _ : state) benchmark::DoNotOptimize(og::estimate_vps(segs, params));
  state.counters["segments"] = static_cast<double>(segs.size());
}
BENCHMARK(BM_EstimateVps)->Unit(benchmark::kMillisecond);

void BM_MatchPair(benchmark::State& state) {
  auto spec = og::synth::two_facade_scene(4, 40.0, 62.0);
  spec.detector.max_tilt_deg = 12.0;
  spec.detector.rectified_boxes = true;
  const auto scene = og::synth::generate(spec);
  const og::PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(og::match_pair(scene.views[0], scene.views[1], cfg));
}
BENCHMARK(BM_MatchPair)->Unit(benchmark::kMillisecond);

void BM_BruteForceNn(benchmark::State& state) {
  const auto scene = og::synth::generate(og::synth::two_facade_scene(4));
  for (auto _ : state) {
    benchmark::DoNotOptimize(og::synth::brute_force_nn(scene.views[0].features, scene.views[1].features));
  }
}
BENCHMARK(BM_BruteForceNn)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
