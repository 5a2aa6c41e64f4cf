#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "wfsel/density.hpp"
#include "wfsel/inference.hpp"
#include "wfsel/kde.hpp"
#include "wfsel/neutral.hpp"
#include "wfsel/selection.hpp"

using namespace wfsel;

namespace {

const MutationRates kTheta = MutationRates::symmetric(0.00014);

void BM_NeutralDirect(benchmark::State& st) {
  const double t = static_cast<double>(st.range(0)) / 1000.0;
  Rng rng(1);
  for (auto _ : st) benchmark::DoNotOptimize(sample_neutral({0.3, t}, kTheta, rng));
}
BENCHMARK(BM_NeutralDirect)->Arg(50)->Arg(100)->Arg(1000);

void BM_NeutralKernel(benchmark::State& st) {
  const double t = static_cast<double>(st.range(0)) / 1000.0;
  auto kernel = shared_kernel(kTheta);
  Rng rng(2);
  for (auto _ : st) benchmark::DoNotOptimize(kernel->sample(0.3, t, rng));
}
BENCHMARK(BM_NeutralKernel)->Arg(10)->Arg(100)->Arg(1000);

// s in tenths
void BM_SelectedDraw(benchmark::State& st) {
  SelectedSampler sampler(static_cast<double>(st.range(0)) / 10.0, kTheta, 0.1);
  Rng rng(3);
  std::int64_t attempts = 0;
  for (auto _ : st) attempts += sampler.draw(0.3, rng).attempts;
  st.counters["attempts"] = benchmark::Counter(static_cast<double>(attempts), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_SelectedDraw)->Arg(0)->Arg(20)->Arg(55)->Unit(benchmark::kMicrosecond);

void BM_KdeEval(benchmark::State& st) {
  Rng rng(4);
  std::vector<double> d(static_cast<std::size_t>(st.range(0)));
  for (auto& v : d) v = rng.beta(3.0, 5.0);
  const auto kde = Kde::scott(d);
  double q = 0.0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(kde(q));
    q = q < 1.0 ? q + 0.001 : 0.0;
  }
}
BENCHMARK(BM_KdeEval)->Arg(1000)->Arg(10000);

class BetaRows final : public DensityModel {
 public:
  BetaRows() : s_(arithmetic_grid(-12, 17, 0.5)) {}
  const std::vector<GridValue>& s_values() const override { return s_; }
  double log_density(double q, std::size_t i) const override {
    const double a = 2.0 + 0.1 * static_cast<double>(i);
    return (a - 1.0) * std::log(q) + std::log1p(-q);
  }

 private:
  std::vector<GridValue> s_;
};

void BM_MwgSweep(benchmark::State& st) {
  BetaRows model;
  std::vector<std::int64_t> y(static_cast<std::size_t>(st.range(0)));
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = static_cast<std::int64_t>(20 + k % 150);
  const auto data = Dataset::with_common_n(y, 200);
  McmcConfig cfg;
  auto state = initial_state(data, model.s_values());
  AcceptanceStats stats;
  Rng rng(5);
  for (auto _ : st) mwg_step(state, data, model, cfg, rng, stats);
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_MwgSweep)->Arg(50)->Arg(324);

}  // namespace

BENCHMARK_MAIN();
