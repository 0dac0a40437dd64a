#include <benchmark/benchmark.h>

#include "streamvae/model.hpp"
#include "streamvae/nn/ops.hpp"
#include "streamvae/train.hpp"

using namespace streamvae;
using nn::Tensor;

namespace {

Tensor random_window(std::size_t T, std::size_t F, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x({T, F});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    return x;
}

// Desk-sized model: T = 100, F = 8, D = 16.
ArchConfig desk_arch() {
    ArchConfig c;
    c.D = 16;
    c.H_enc = 12;
    c.H_dec = 12;
    c.n_heads = 2;
    c.K = 3;
    c.R = 4;
    return c;
}

void BM_LstmLayerForwardBackward(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    const std::size_t in = 8, H = 12;
    const Tensor x = random_window(T, in, 1), W = random_window(in, 4 * H, 2), U = random_window(H, 4 * H, 3);
    for (auto _ : state) {
        nn::Tape tape;
        nn::Var out = nn::lstm_layer(tape.constant(x), tape.leaf(W, true), tape.leaf(U, true),
                                     tape.leaf(Tensor({1, 4 * H}, 0.0), true), false);
        tape.backward(nn::sum(out));
        benchmark::DoNotOptimize(out.value()[0]);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_LstmLayerForwardBackward)->Arg(25)->Arg(100);

void BM_ForwardInference(benchmark::State& state) {
    const StreamVae model(desk_arch());
    const nn::ParamStore ps = model.init_params(0);
    const Tensor x = random_window(100, 8, 4);
    for (auto _ : state) benchmark::DoNotOptimize(model.trace(ps, x, nullptr).x_hat[0]);
}
BENCHMARK(BM_ForwardInference)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
    const StreamVae model(desk_arch());
    const nn::ParamStore ps = model.init_params(0);
    const Tensor x = random_window(100, 8, 5);
    Rng rng(6);
    for (auto _ : state) {
        nn::Tape tape;
        const nn::BoundParams p(tape, ps, true);
        const nn::Var xv = tape.constant(x);
        const LossVars loss = build_loss(model.forward(p, xv, &rng), xv, 0.1, 1e-3, 1e-2);
        tape.backward(loss.total);
        benchmark::DoNotOptimize(loss.total.value()[0]);
    }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace
