#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "contime/metrics.hpp"
#include "contime/model.hpp"
#include "contime/train.hpp"

using namespace contime;

namespace {

TimeSeriesSample sine_sample(int n, int features) {
    TimeSeriesSample s;
    Tensor vals(n, features);
    for (int i = 0; i < n; ++i) {
        s.times.push_back(static_cast<double>(i));
        for (int f = 0; f < features; ++f) vals(i, f) = std::sin(0.3 * i + f);
    }
    s.values = vals;
    return s;
}

std::vector<double> random_seq(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = dist(rng);
    return v;
}

void bench_spline_fit(benchmark::State& state) {
    const auto s = sine_sample(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(ContinuousPath::fit_hermite(s));
}
BENCHMARK(bench_spline_fit)->Arg(36)->Arg(144);

void bench_spline_eval(benchmark::State& state) {
    const auto path = ContinuousPath::fit_hermite(sine_sample(144, 1));
    double t = 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(path.value(t));
        t += 0.37;
        if (t > 140.0) t -= 140.0;
    }
}
BENCHMARK(bench_spline_eval);

void bench_forward(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    const ModelDims dims{16, T, 12, 1, 1.0};
    std::mt19937_64 rng(1);
    const auto params = ContimeParams::init(dims, rng);
    const auto s = sine_sample(T, 1);
    for (auto _ : state) benchmark::DoNotOptimize(forward(params, s));
}
BENCHMARK(bench_forward)->Arg(36)->Arg(96);

void bench_forward_backward(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    const ModelDims dims{16, T, 12, 1, 1.0};
    std::mt19937_64 rng(1);
    const auto params = ContimeParams::init(dims, rng);
    const auto s = sine_sample(T, 1);
    Tensor target(12, 1);
    for (int i = 0; i < 12; ++i) target[i] = std::sin(0.3 * (T + i));
    for (auto _ : state) {
        ad::Tape tape;
        const auto vars = ContimeVars::bind(tape, params);
        const auto out = forward(vars, dims, s);
        const auto loss = loss_task(out.y_hat, target);
        benchmark::DoNotOptimize(tape.backward(loss));
    }
}
BENCHMARK(bench_forward_backward)->Arg(36)->Arg(96);

void bench_dtw(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = random_seq(n, 1);
    const auto b = random_seq(n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(dtw(a, b));
}
BENCHMARK(bench_dtw)->Arg(12)->Arg(36);

void bench_soft_dtw(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = random_seq(n, 1);
    const auto b = random_seq(n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(soft_dtw(a, b, 0.01));
}
BENCHMARK(bench_soft_dtw)->Arg(12)->Arg(36);

void bench_soft_tdi_loss_grad(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Tensor yh = Tensor::vec(random_seq(n, 3));
    const auto yt = random_seq(n, 4);
    for (auto _ : state) {
        ad::Tape tape;
        const auto yv = tape.leaf(yh);
        benchmark::DoNotOptimize(tape.backward(loss_tdi_soft(yv, yt, 0.01)));
    }
}
BENCHMARK(bench_soft_tdi_loss_grad)->Arg(12);

} // namespace

BENCHMARK_MAIN();
