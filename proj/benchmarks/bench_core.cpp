#include <benchmark/benchmark.h>

#include "fockfringe/ensembles.hpp"
#include "fockfringe/estimation.hpp"
#include "fockfringe/quantum_core.hpp"
#include "fockfringe/signal_synth.hpp"

using namespace fockfringe;

namespace {

SplitterParams reference_splitter() { return SplitterParams::from_hz(2880.0, 0.0, 200.0); }

void BM_EvolveCoherence(benchmark::State& state) {
    const auto atoms = static_cast<int>(state.range(0));
    const auto initial = binomial_split(atoms);
    const auto params = reference_splitter();
    double t = 0.0;
    for (auto _ : state) {
        t += 1e-6;
        benchmark::DoNotOptimize(one_body_coherence(evolve(initial, params, t), t));
    }
}
BENCHMARK(BM_EvolveCoherence)->Arg(2)->Arg(6)->Arg(12);

void BM_ClosedFormVisibility(benchmark::State& state) {
    const auto dist = poisson_distribution(2.0, static_cast<int>(state.range(0)));
    const auto params = reference_splitter();
    double t = 0.0;
    for (auto _ : state) {
        t += 1e-6;
        benchmark::DoNotOptimize(closed_form_visibility(dist, params, t));
    }
}
BENCHMARK(BM_ClosedFormVisibility)->Arg(4)->Arg(12);

void BM_TfWeightedPoisson(benchmark::State& state) {
    TFEnsembleParams params;
    params.peak_mean = 2.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(tf_weighted_poisson(params, static_cast<int>(state.range(0))));
    }
}
BENCHMARK(BM_TfWeightedPoisson)->Arg(4)->Arg(12);

void BM_FitFringe(benchmark::State& state) {
    NoiseSpec noise;
    noise.pixel_rms = 0.02;
    const auto profile = synthesize_profile(TOFGeometry::reference(), 0.6, 1.0, 1.0, noise);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_fringe(profile));
    }
}
BENCHMARK(BM_FitFringe)->Unit(benchmark::kMicrosecond);

void BM_FitVisibilityModel(benchmark::State& state) {
    const auto params = reference_splitter();
    const auto dist = poisson_distribution(1.0, 4);
    VisibilityTrace trace;
    for (int i = 0; i < 61; ++i) {
        const double t = 2.0 * params.revival_period() * i / 60.0;
        trace.times.push_back(t);
        trace.contrast.push_back(closed_form_visibility(dist, params, t));
        trace.contrast_error.push_back(0.01);
        trace.phase.push_back(0.0);
        trace.phase_error.push_back(0.1);
        trace.low_signal.push_back(false);
        trace.failed.push_back(false);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_visibility_model(trace));
    }
}
BENCHMARK(BM_FitVisibilityModel)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
