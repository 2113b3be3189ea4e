#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "repcycle/evaluation.hpp"
#include "repcycle/tensor_utils.hpp"
#include "repcycle/training.hpp"

namespace {

using namespace repcycle;

TrainConfig bench_config() {
  torch::set_num_threads(1);
  TrainConfig c;
  c.dataset.samples = 200;
  c.dataset.sequences = 8;
  c.pretrain_pairs = 64;
  return c;
}

struct Setup {
  TrainConfig config = bench_config();
  train::RenderContext ctx = train::make_render_context(config);
  std::vector<data::SampleRecord> records = data::generate_dataset(config.dataset, ctx.tmpl, ctx.camera, ctx.prior);
};

Setup& setup() {
  static Setup s;
  return s;
}

torch::Tensor image_batch(int n) {
  std::vector<torch::Tensor> images;
  for (int i = 0; i < n; ++i) images.push_back(nn::image_to_tensor(setup().records[i].image()));
  return torch::stack(images);
}

void BM_EncoderForward(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  nn::GenA2B g(setup().config.nets);
  const auto x = image_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(g->forward(x).raw);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FloodTensor(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  const auto raw = torch::rand({4, 4, 64, 64});
  const auto pal = nn::palette_tensor(setup().ctx.palette);
  for (auto _ : state) benchmark::DoNotOptimize(nn::flood_tensor(raw, pal).b);
}
BENCHMARK(BM_FloodTensor)->Unit(benchmark::kMicrosecond);

void BM_OrthonormalizeBackward(benchmark::State& state) {
  const auto m = torch::randn({4, 16, 3, 3}, torch::kFloat32) + torch::eye(3);
  for (auto _ : state) {
    auto x = m.clone().requires_grad_();
    nn::orthonormalize_tensor(x).sum().backward();
    benchmark::DoNotOptimize(x.grad());
  }
}
BENCHMARK(BM_OrthonormalizeBackward)->Unit(benchmark::kMicrosecond);

void BM_TrainerStep(benchmark::State& state) {
  const auto stage = static_cast<train::Stage>(state.range(0));
  train::Trainer t(setup().config, train::make_training_data(setup().config, setup().records));
  t.begin_stage(stage);
  for (auto _ : state) benchmark::DoNotOptimize(t.run_step());
  state.SetLabel(train::stage_name(stage));
}
BENCHMARK(BM_TrainerStep)
    ->Arg(static_cast<int>(train::Stage::kPretrainB2C))
    ->Arg(static_cast<int>(train::Stage::kUnsupervised))
    ->Unit(benchmark::kMillisecond)
    ->Iterations(10);

void BM_Evaluate(benchmark::State& state) {
  train::Models m(setup().config, setup().config.fitter_config(setup().ctx.tmpl, setup().ctx.prior));
  const std::vector<data::SampleRecord> test(setup().records.begin(), setup().records.begin() + 16);
  const auto opts = eval::options_from(setup().config);
  for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate(m, setup().ctx, test, opts));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
