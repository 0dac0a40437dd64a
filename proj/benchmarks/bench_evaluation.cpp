#include <cmath>

#include <benchmark/benchmark.h>

#include "streamvae/evt.hpp"
#include "streamvae/metrics.hpp"
#include "streamvae/rng.hpp"

using namespace streamvae;

namespace {

struct Scored {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

// Anomalous segments of length 50 with shifted scores, ~10% positives.
Scored scored_series(std::size_t n) {
    Rng rng(1);
    Scored s;
    s.scores.resize(n);
    s.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.labels[i] = (i / 50) % 10 == 3;
        s.scores[i] = rng.normal() + (s.labels[i] ? 1.5 : 0.0);
    }
    return s;
}

void BM_AucRoc(benchmark::State& state) {
    const Scored s = scored_series(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(auc_roc(s.scores, s.labels));
}
BENCHMARK(BM_AucRoc)->Arg(40000);

void BM_OraclePaF1(benchmark::State& state) {
    const Scored s = scored_series(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(oracle_pa_f1(s.scores, s.labels).best_f1);
}
BENCHMARK(BM_OraclePaF1)->Arg(40000);

void BM_FitGpd(benchmark::State& state) {
    Rng rng(2);
    std::vector<double> y(static_cast<std::size_t>(state.range(0)));
    for (double& v : y) v = -2.0 * std::log1p(-rng.uniform());
    for (auto _ : state) benchmark::DoNotOptimize(fit_gpd(y).xi);
}
BENCHMARK(BM_FitGpd)->Arg(100)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
