#include <benchmark/benchmark.h>

#include "repcycle/body_model.hpp"
#include "repcycle/camera_render.hpp"
#include "repcycle/datagen.hpp"
#include "repcycle/metrics.hpp"

namespace {

using namespace repcycle;

struct Scene {
  body::BodyTemplate tmpl = body::height_normalize(body::build_toy_template(16, 2, 0));
  render::Camera camera = render::Camera::centered(64, 64, 64.0);
  data::PosePrior prior = data::default_pose_prior(tmpl, camera);
  render::Palette palette = render::Palette::standard();
};

const Scene& scene() {
  static const Scene s;
  return s;
}

data::BodyParams random_body(Rng& rng) {
  const auto& s = scene();
  return {data::sample_pose(s.prior, rng), data::sample_shape(s.tmpl.shape_count(), 1.0, rng)};
}

void BM_PoseBody(benchmark::State& state) {
  Rng rng = derive_rng(1);
  const auto b = random_body(rng);
  for (auto _ : state) benchmark::DoNotOptimize(body::pose_body(scene().tmpl, b.beta, b.pose));
  state.counters["vertices"] = static_cast<double>(scene().tmpl.vertices.rows());
}
BENCHMARK(BM_PoseBody);

void BM_PoseBodyVjp(benchmark::State& state) {
  Rng rng = derive_rng(2);
  const auto b = random_body(rng);
  const auto posed = body::pose_body(scene().tmpl, b.beta, b.pose);
  const body::Points gv = body::Points::Ones(posed.vertices.rows(), 3);
  const body::Points gj = body::Points::Ones(posed.joints.rows(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(body::pose_body_vjp(scene().tmpl, b.beta, b.pose, gv, gj));
}
BENCHMARK(BM_PoseBodyVjp);

void BM_Rasterize(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto cam = render::Camera::centered(size, size, size);
  Rng rng = derive_rng(3);
  const auto b = random_body(rng);
  const auto posed = body::pose_body(scene().tmpl, b.beta, b.pose);
  for (auto _ : state) benchmark::DoNotOptimize(render::rasterize(cam, posed));
}
BENCHMARK(BM_Rasterize)->Arg(64)->Arg(128)->Arg(256);

void BM_RenderDomainB(benchmark::State& state) {
  Rng rng = derive_rng(4);
  const auto b = random_body(rng);
  const auto bg = data::make_background(64, 64, rng);
  for (auto _ : state) {
    const auto labels = render::rasterize(scene().camera, body::pose_body(scene().tmpl, b.beta, b.pose)).first;
    benchmark::DoNotOptimize(render::composite(labels, scene().palette, bg));
  }
}
BENCHMARK(BM_RenderDomainB);

void BM_GenerateDataset(benchmark::State& state) {
  data::DatasetConfig cfg;
  cfg.samples = static_cast<int>(state.range(0));
  cfg.sequences = 4;
  for (auto _ : state)
    benchmark::DoNotOptimize(data::generate_dataset(cfg, scene().tmpl, scene().camera, scene().prior));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateDataset)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RmseFamily(benchmark::State& state) {
  Rng rng = derive_rng(5);
  const auto a = body::pose_body(scene().tmpl, body::ShapeParams::zeros(scene().tmpl.shape_count()),
                                 data::sample_pose(scene().prior, rng));
  const auto b = body::pose_body(scene().tmpl, body::ShapeParams::zeros(scene().tmpl.shape_count()),
                                 data::sample_pose(scene().prior, rng));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::rmse_family(a.joints, b.joints));
}
BENCHMARK(BM_RmseFamily);

void BM_Iou(benchmark::State& state) {
  Rng rng = derive_rng(6);
  const auto pred = render::rasterize(scene().camera, body::pose_body(scene().tmpl, body::ShapeParams::zeros(scene().tmpl.shape_count()),
                                                                      data::sample_pose(scene().prior, rng)))
                        .first;
  const auto gt = render::rasterize(scene().camera, body::pose_body(scene().tmpl, body::ShapeParams::zeros(scene().tmpl.shape_count()),
                                                                    data::sample_pose(scene().prior, rng)))
                      .first;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::iou(pred, gt, metrics::Grouping::k14));
}
BENCHMARK(BM_Iou);

}  // namespace

BENCHMARK_MAIN();
