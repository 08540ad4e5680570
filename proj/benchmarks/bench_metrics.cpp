#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "calib/calibration.hpp"
#include "calib/smoothing.hpp"

namespace {

calib::RecordSet random_records(std::size_t n, std::size_t k) {
  std::mt19937_64 eng(17);
  std::exponential_distribution<double> draw(1.0);
  std::uniform_int_distribution<std::size_t> label(0, k - 1);
  std::vector<calib::PredictionRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = std::to_string(i);
    out[i].probs.resize(k);
    double total = 0.0;
    for (double& p : out[i].probs) total += (p = draw(eng));
    for (double& p : out[i].probs) p /= total;
    out[i].label = label(eng);
  }
  return calib::RecordSet(std::move(out));
}

void BM_Ece(benchmark::State& state) {
  const auto rs = random_records(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(calib::ece(rs, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->Arg(1000)->Arg(100000);

void BM_Ace(benchmark::State& state) {
  const auto rs = random_records(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(calib::ace(rs, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ace)->Arg(1000)->Arg(100000);

void BM_Report(benchmark::State& state) {
  const auto rs = random_records(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(calib::report(rs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Report)->Arg(10000);

void BM_LsLoss(benchmark::State& state) {
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < k; ++i) logits[i] = 0.1 * static_cast<double>(i % 7) - 0.3;
  const auto cfg = calib::SmoothingConfig::make(0.1, k);
  for (auto _ : state) benchmark::DoNotOptimize(calib::ls_loss(logits, 0, cfg));
}
BENCHMARK(BM_LsLoss)->Arg(4)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
