#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "dmf/crossed.hpp"
#include "dmf/factorization.hpp"

using namespace dmf;

namespace {

Grid box(double h)
{
    return Grid::symmetric(8, h);
}

GridFunction gaussian(const Grid& g)
{
    return sample([](double x) { return std::exp(-x * x); }, g);
}

Scale one_plus_x2(const Grid& g)
{
    return Scale::from_closed_form(ClosedForm::polynomial({1, 0, 1}), g);
}

} // namespace

// state.range(0) is 1/h throughout.

static void BM_finite_diff(benchmark::State& state)
{
    const auto f = gaussian(box(1.0 / static_cast<double>(state.range(0))));
    const auto gamma = MultiIndex::along(1, 0, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(finite_diff(f, gamma));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.size()));
}
BENCHMARK(BM_finite_diff)->Arg(64)->Arg(256)->Arg(1024);

static void BM_mollify(benchmark::State& state)
{
    const double h = 1.0 / static_cast<double>(state.range(0));
    const auto s = one_plus_x2(box(h));
    const auto bump = make_bump(Grid::symmetric(0.25, h), 0.25);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mollify_scale(s, bump, {0.25}));
    }
}
BENCHMARK(BM_mollify)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_factorize(benchmark::State& state)
{
    const auto g = box(1.0 / static_cast<double>(state.range(0)));
    const auto psi = gaussian(g);
    const auto s = one_plus_x2(g);
    for (auto _ : state) {
        benchmark::DoNotOptimize(factorize_function(psi, s));
    }
}
BENCHMARK(BM_factorize)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_convolve(benchmark::State& state)
{
    const auto g = box(1.0 / 16);
    const auto w = GroupWindow::integers(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto random_element = [&] {
        auto F = CrossedElement::zero(w, g);
        for (auto& s : F.slices) {
            s = sample([&](double) { return u(rng); }, g);
        }
        return F;
    };
    const auto F1 = random_element();
    const auto F2 = random_element();
    const auto act = ActionSpec::translation();
    for (auto _ : state) {
        benchmark::DoNotOptimize(convolve(F1, F2, act));
    }
}
BENCHMARK(BM_convolve)->Arg(2)->Arg(4)->Arg(8);

BENCHMARK_MAIN();
