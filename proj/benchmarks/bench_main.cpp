#include <benchmark/benchmark.h>

#include "hypomimia/classifier.hpp"
#include "hypomimia/expression_model.hpp"
#include "hypomimia/feature_processing.hpp"
#include "hypomimia/rng.hpp"
#include "hypomimia/tensor.hpp"

using namespace hypomimia;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  Tensor t({r, c});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

void bm_matmul(benchmark::State& state) {
  std::size_t n = std::size_t(state.range(0));
  SeededRng rng(1);
  Tensor a = random_matrix(n, n, rng);
  Tensor b = random_matrix(n, n, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(n * n * n));
}

void bm_frame_encode(benchmark::State& state) {
  ExpressionModelConfig cfg;  // 32x32, patch 8, d 64
  ExpressionModel model(cfg, default_prompts(), 2);
  SeededRng rng(3);
  Tensor frame({cfg.image_size, cfg.image_size, cfg.channels});
  for (double& v : frame.data()) v = rng.uniform();
  for (auto _ : state) {
    Tape t;
    TapeBinding p(t, static_cast<const ParameterStore&>(model.params()));
    benchmark::DoNotOptimize(model.encode_frame(t, p, frame));
  }
}

void bm_video_scores(benchmark::State& state) {
  ExpressionModelConfig cfg;
  ExpressionModel model(cfg, default_prompts(), 4);
  SeededRng rng(5);
  FrameSequence video;
  for (std::size_t i = 0; i < cfg.frames; ++i) {
    Tensor frame({cfg.image_size, cfg.image_size, cfg.channels});
    for (double& v : frame.data()) v = rng.uniform();
    video.frames.push_back(std::move(frame));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.class_scores(video));
  }
}

void bm_classifier_forward(benchmark::State& state) {
  RnnConfig cfg;  // LSTM, input 12, hidden 32, 2 layers
  DiagnosisClassifier model(cfg, 6);
  SeededRng rng(7);
  ClassifierSequence seq;
  seq.mode = SequenceMode::Processed;
  for (int t = 0; t < 4; ++t) {
    Tensor step({12});
    for (double& v : step.data()) v = rng.normal();
    seq.timesteps.push_back(std::move(step));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.rnn_forward(seq));
  }
}

void bm_record_processing(benchmark::State& state) {
  SeededRng rng(8);
  IntensityRecord record;
  record.subject_id = "bench";
  for (double& v : record.values) v = rng.uniform(0.05, 5.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_sequence(record, SequenceMode::Processed));
  }
}

BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(bm_frame_encode);
BENCHMARK(bm_video_scores);
BENCHMARK(bm_classifier_forward);
BENCHMARK(bm_record_processing);

}  // namespace

BENCHMARK_MAIN();
