#include <benchmark/benchmark.h>

#include "ecgaug/dtw.hpp"
#include "ecgaug/gan.hpp"
#include "ecgaug/ops.hpp"
#include "ecgaug/rng.hpp"
#include "ecgaug/tensor.hpp"

using namespace ecgaug;
namespace op = ecgaug::ops;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<double> d(static_cast<size_t>(shape_numel(shape)));
    for (double& v : d) v = scale * rng.normal();
    return Tensor::from(std::move(shape), std::move(d));
}

void BM_Conv1dForward(benchmark::State& state) {
    int64_t ch = state.range(0);
    Tensor x = random_tensor({16, ch, 64}, 1);
    Tensor w = random_tensor({2 * ch, ch, 4}, 2, 0.1);
    Tensor b = random_tensor({2 * ch}, 3, 0.1);
    for (auto _ : state) {
        Tensor y = op::conv1d(x, w, b, 2, 1);
        benchmark::DoNotOptimize(y.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 16 * 2 * ch * ch * 4 * 32);
}
BENCHMARK(BM_Conv1dForward)->Arg(16)->Arg(64)->Arg(128);

void BM_Conv1dTrainStep(benchmark::State& state) {
    int64_t ch = state.range(0);
    Tensor x = random_tensor({16, ch, 64}, 1);
    Tensor w = random_tensor({2 * ch, ch, 4}, 2, 0.1);
    w.set_requires_grad(true);
    for (auto _ : state) {
        Tape tape;
        Tensor loss = op::mean_all(op::mul(op::conv1d(x, w, Tensor(), 2, 1),
                                           op::conv1d(x, w, Tensor(), 2, 1)));
        w.clear_grad();
        tape.backward(loss);
        benchmark::DoNotOptimize(w.grad().data().data());
    }
}
BENCHMARK(BM_Conv1dTrainStep)->Arg(16)->Arg(64);

void BM_Dtw(benchmark::State& state) {
    Rng rng(7);
    std::vector<double> a(256), b(256);
    for (double& v : a) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    for (auto _ : state) {
        double d = dtw(a, b);
        benchmark::DoNotOptimize(d);
    }
}
BENCHMARK(BM_Dtw);

void BM_GeneratorForward(benchmark::State& state) {
    gan::Generator gen(state.range(0) == 0 ? gan::GeneratorSpec::unconditional_desk()
                                           : gan::GeneratorSpec::unconditional_paper(),
                       11);
    Tensor z = random_tensor({16, 100, 1}, 12);
    for (auto _ : state) {
        Tensor y = gen.forward(z, nullptr, true);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_GeneratorForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CriticForward(benchmark::State& state) {
    gan::Critic critic(state.range(0) == 0 ? gan::CriticSpec::unconditional_desk()
                                           : gan::CriticSpec::unconditional_paper(),
                       13);
    Tensor x = random_tensor({16, 1, 256}, 14, 0.3);
    for (auto _ : state) {
        Tensor y = critic.forward(x, nullptr, true);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_CriticForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
