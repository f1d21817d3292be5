#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fockfringe/constants.hpp"
#include "fockfringe/errors.hpp"
#include "fockfringe/estimation.hpp"

using namespace fockfringe;
using constants::pi;

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    }
    return g;
}

double phase_distance(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * pi)); }

FringeParams random_params(std::mt19937_64& rng, const TOFGeometry& geom) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FringeParams p;
    const double sigma0 = geom.envelope_sigma();
    p.amplitude = 0.5 + 1.5 * u(rng);
    p.center = (u(rng) - 0.5) * 0.4 * sigma0;
    p.sigma = sigma0 * (0.8 + 0.4 * u(rng));
    p.delta = fringe_period(geom).delta * (0.8 + 0.4 * u(rng));
    p.contrast = 0.05 + 0.95 * u(rng);
    p.phase = 2.0 * pi * u(rng);
    return p;
}

VisibilityTrace trace_from_model(const OccupationDistribution& d, const SplitterParams& s, std::span<const double> times,
                                 double error = 0.01) {
    VisibilityTrace t;
    for (double time : times) {
        const double c = closed_form_visibility(d, s, time);
        t.times.push_back(time);
        t.contrast.push_back(c);
        t.contrast_error.push_back(error);
        t.phase.push_back(phase_trace(d, s, time));
        t.phase_error.push_back(0.01);
        t.low_signal.push_back(is_low_signal(c));
        t.failed.push_back(false);
    }
    return t;
}

} // namespace

TEST_CASE("fit_fringe recovers noiseless profiles") {
    const auto geom = TOFGeometry::reference();
    const auto x = geom.pixel_positions();
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
        const auto truth = random_params(rng, geom);
        const auto profile = synthesize_profile(x, truth, {}, 0);
        const auto fit = fit_fringe(profile);
        CHECK(fit.converged);
        CHECK(fit.params.amplitude == doctest::Approx(truth.amplitude).epsilon(1e-6));
        CHECK(std::abs(fit.params.center - truth.center) <= 1e-6 * truth.sigma);
        CHECK(fit.params.sigma == doctest::Approx(truth.sigma).epsilon(1e-6));
        CHECK(fit.params.delta == doctest::Approx(truth.delta).epsilon(1e-6));
        CHECK(fit.params.contrast == doctest::Approx(truth.contrast).epsilon(1e-6));
        CHECK(phase_distance(fit.params.phase, truth.phase) < 1e-6);
        CHECK(fit.phase_identifiable);
    }
}

TEST_CASE("fit_fringe on a zero-contrast profile flags the phase") {
    const auto geom = TOFGeometry::reference();
    const auto fit = fit_fringe(synthesize_profile(geom, 0.0, 0.7, 1.0, {}));
    CHECK(fit.params.contrast < 1e-3);
    CHECK_FALSE(fit.phase_identifiable);
    CHECK(fit.params.sigma == doctest::Approx(geom.envelope_sigma()).epsilon(1e-6));
}

TEST_CASE("fit_fringe canonical form and argument checks") {
    const auto geom = TOFGeometry::reference();
    const auto profile = synthesize_profile(geom, 0.6, 0.5, 1.0, {});
    // start from a sign-flipped contrast; the result must be folded back
    FringeParams start = *profile.truth;
    start.contrast = -0.5;
    start.phase = 0.5 + pi + 0.05;
    const auto fit = fit_fringe(profile, start);
    CHECK(fit.params.contrast == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(phase_distance(fit.params.phase, 0.5) < 1e-6);
    CHECK(fit.params.phase >= 0.0);
    CHECK(fit.params.phase < 2.0 * pi);

    FringeProfile tiny;
    tiny.x = linspace(0.0, 1.0, 10);
    tiny.intensity.assign(10, 1.0);
    CHECK_THROWS_AS(fit_fringe(tiny), ArityError);
}

TEST_CASE("fit_fringe contrast is unbiased under 5% pixel noise") {
    const auto geom = TOFGeometry::reference();
    NoiseSpec noise;
    noise.pixel_rms = 0.05;
    noise.seed = 8;
    std::vector<double> c;
    for (int k = 0; k < 100; ++k) {
        c.push_back(fit_fringe(synthesize_profile(geom, 0.5, 1.3, 1.0, noise, static_cast<std::uint64_t>(k))).params.contrast);
    }
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / c.size();
    double var = 0.0;
    for (double v : c) {
        var += (v - mean) * (v - mean);
    }
    const double standard_error = std::sqrt(var / (c.size() - 1) / c.size());
    CHECK(std::abs(mean - 0.5) < 2.0 * standard_error);
}

TEST_CASE("fit_fringe uncertainties are calibrated under noise") {
    // Includes low contrast, where the envelope leaks into the period scan,
    // and high contrast, where x0 and phi are strongly correlated.
    const auto geom = TOFGeometry::reference();
    const auto x = geom.pixel_positions();
    std::mt19937_64 rng(5);
    std::array<double, 6> sum_sq{};
    const int trials = 300;
    for (int k = 0; k < trials; ++k) {
        const auto truth = random_params(rng, geom);
        NoiseSpec noise;
        noise.pixel_rms = 0.05 * truth.amplitude;
        noise.seed = 77;
        const auto fit = fit_fringe(synthesize_profile(x, truth, noise, static_cast<std::uint64_t>(k)));
        const std::array<double, 6> diff{fit.params.amplitude - truth.amplitude, fit.params.center - truth.center,
                                         fit.params.sigma - truth.sigma,         fit.params.delta - truth.delta,
                                         fit.params.contrast - truth.contrast,
                                         std::remainder(fit.params.phase - truth.phase, 2.0 * pi)};
        for (int i = 0; i < 6; ++i) {
            const double z = diff[static_cast<std::size_t>(i)] / fit.error(i);
            sum_sq[static_cast<std::size_t>(i)] += z * z;
        }
    }
    for (double s : sum_sq) {
        const double rms = std::sqrt(s / trials);
        CHECK(rms > 0.85);
        CHECK(rms < 1.2);
    }
}

TEST_CASE("unwrap_phase") {
    SUBCASE("removes 2 pi wraps") {
        const std::vector<double> wrapped{6.0, 0.1, 0.5, 6.2};
        const auto out = unwrap_phase(wrapped, std::vector<bool>(4, false));
        CHECK(out[1] == doctest::Approx(0.1 + 2.0 * pi));
        CHECK(out[3] == doctest::Approx(6.2));
    }
    SUBCASE("flagged points never become the reference") {
        const std::vector<double> wrapped{0.0, 3.0, 0.2};
        const auto out = unwrap_phase(wrapped, {false, true, false});
        CHECK(out[2] == doctest::Approx(0.2));
    }
    SUBCASE("jumps between unflagged neighbours never exceed pi") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
        std::vector<double> wrapped(200);
        for (auto& v : wrapped) {
            v = u(rng);
        }
        const auto out = unwrap_phase(wrapped, std::vector<bool>(200, false));
        for (std::size_t i = 1; i < out.size(); ++i) {
            CHECK(std::abs(out[i] - out[i - 1]) <= pi + 1e-12);
        }
    }
}

TEST_CASE("extract_trace") {
    const auto geom = TOFGeometry::reference();
    const auto times = linspace(0.0, 1e-3, 25);

    SUBCASE("single atoms: C = 1, phi = 0") {
        const auto s = SplitterParams::from_hz(2880.0, 0.0);
        const auto samples = synthesize_trace(OccupationDistribution::pure(1, 4), s, geom, times, {});
        std::vector<FringeProfile> profiles;
        for (const auto& sample : samples) {
            profiles.push_back(sample.profile);
        }
        const auto trace = extract_trace(times, profiles);
        for (std::size_t i = 0; i < trace.size(); ++i) {
            CHECK(trace.contrast[i] == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(phase_distance(trace.phase[i], 0.0) < 1e-6);
            CHECK_FALSE(trace.low_signal[i]);
        }
    }
    SUBCASE("pairs: pi jumps between revivals; low-signal flag is 2C < 0.1") {
        const auto s = SplitterParams::from_hz(2880.0, 0.0);
        const double revival = s.revival_period();
        const auto pair_times = linspace(0.0, 2.0 * revival, 41);
        const auto samples = synthesize_trace(OccupationDistribution::pure(2, 4), s, geom, pair_times, {});
        std::vector<FringeProfile> profiles;
        for (const auto& sample : samples) {
            profiles.push_back(sample.profile);
        }
        const auto trace = extract_trace(pair_times, profiles);
        for (std::size_t i = 0; i < trace.size(); ++i) {
            CHECK(trace.low_signal[i] == (2.0 * trace.contrast[i] < 0.1));
        }
        for (int k = 0; k + 10 < 41; k += 10) {
            const double jump = trace.phase[static_cast<std::size_t>(k + 10)] - trace.phase[static_cast<std::size_t>(k)];
            CHECK(std::abs(std::abs(jump) - pi) < 0.2);
        }
    }
    SUBCASE("a failed profile is flagged, not dropped") {
        std::vector<FringeProfile> profiles(2);
        profiles[0] = synthesize_profile(geom, 0.5, 0.0, 1.0, {});
        profiles[1].x = linspace(0.0, 1.0, 30);
        profiles[1].intensity.assign(30, -1.0);
        const std::vector<double> t{0.0, 1e-4};
        const auto trace = extract_trace(t, profiles);
        REQUIRE(trace.size() == 2);
        CHECK_FALSE(trace.failed[0]);
        CHECK(trace.failed[1]);
    }
}

TEST_CASE("fit_visibility_model") {
    const auto params = SplitterParams::from_hz(2880.0, 0.0, 200.0);

    SUBCASE("noiseless Mott-like trace recovers every parameter") {
        const auto d = OccupationDistribution({0.0, 0.94, 0.06, 0.0, 0.0});
        const auto times = linspace(0.0, 1e-3, 20);
        const auto fit = fit_visibility_model(trace_from_model(d, params, times));
        CHECK(fit.fraction(1) == doctest::Approx(0.94).epsilon(1e-4));
        CHECK(fit.fraction(2) == doctest::Approx(0.06).epsilon(1e-4));
        CHECK(fit.fraction(3) < 1e-4);
        CHECK(fit.interaction == doctest::Approx(params.interaction).epsilon(1e-4));
        CHECK(fit.dephasing == doctest::Approx(200.0).epsilon(1e-4));
        const double total = std::accumulate(fit.fractions.begin(), fit.fractions.end(), 0.0);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("noiseless Poisson trace recovers U within 1e-4") {
        const auto s = SplitterParams::from_hz(2880.0, 0.0, 0.0);
        const auto d = poisson_distribution(1.0, 4);
        const auto times = linspace(0.0, 1e-3, 41);
        const auto fit = fit_visibility_model(trace_from_model(d, s, times));
        CHECK(fit.interaction / constants::two_pi == doctest::Approx(2880.0).epsilon(1e-4));
        const auto occupied = d.occupied_fractions();
        for (int n = 1; n <= 4; ++n) {
            CHECK(fit.fraction(n) == doctest::Approx(occupied[static_cast<std::size_t>(n - 1)]).epsilon(1e-4));
        }
        CHECK(2.0 * pi / fit.interaction * 1e6 == doctest::Approx(347.2).epsilon(1e-3));
    }
    SUBCASE("constant trace forces N = 1 and no dephasing") {
        const auto s = SplitterParams::from_hz(2880.0, 0.0, 0.0);
        const auto times = linspace(0.0, 1e-3, 20);
        const auto fit = fit_visibility_model(trace_from_model(OccupationDistribution::pure(1, 4), s, times));
        CHECK(fit.fraction(1) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(fit.dephasing < 1e-3 / 1e-3);
    }
    SUBCASE("fixed U is echoed") {
        const auto d = OccupationDistribution({0.0, 0.8, 0.2});
        const auto times = linspace(0.0, 1e-3, 20);
        VisibilityFitOptions options;
        options.max_atoms = 2;
        options.fixed_interaction = params.interaction;
        const auto fit = fit_visibility_model(trace_from_model(d, params, times), options);
        CHECK(fit.interaction_fixed);
        CHECK(fit.interaction == params.interaction);
        CHECK(fit.fraction(2) == doctest::Approx(0.2).epsilon(1e-6));
    }
    SUBCASE("fractions stay on the simplex") {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> noise(0.0, 0.05);
        const auto times = linspace(0.0, 1e-3, 16);
        auto trace = trace_from_model(poisson_distribution(1.5, 4), params, times);
        for (auto& c : trace.contrast) {
            c = std::max(0.0, c + noise(rng));
        }
        const auto fit = fit_visibility_model(trace);
        double total = 0.0;
        for (double f : fit.fractions) {
            CHECK(f >= 0.0);
            total += f;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("cost is invariant under permutation and uniform rescaling of errors") {
        const auto times = linspace(0.0, 1e-3, 12);
        auto trace = trace_from_model(poisson_distribution(1.0, 4), params, times);
        for (std::size_t i = 0; i < trace.size(); ++i) {
            trace.contrast_error[i] = 0.01 + 0.001 * i;
            trace.contrast[i] += 0.003 * std::sin(static_cast<double>(i));
        }
        VisibilityModelPoint point{{0.5, 0.3, 0.15, 0.05}, params.interaction * 1.01, 150.0};
        const double base = visibility_model_cost(trace, point);

        auto scaled = trace;
        for (auto& e : scaled.contrast_error) {
            e *= 7.0;
        }
        CHECK(visibility_model_cost(scaled, point) == doctest::Approx(base).epsilon(1e-12));

        VisibilityTrace permuted = trace;
        std::vector<std::size_t> order(trace.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(1);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < order.size(); ++i) {
            permuted.times[i] = trace.times[order[i]];
            permuted.contrast[i] = trace.contrast[order[i]];
            permuted.contrast_error[i] = trace.contrast_error[order[i]];
        }
        CHECK(visibility_model_cost(permuted, point) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("errors") {
        const auto few = linspace(0.0, 1e-3, 5);
        CHECK_THROWS_AS(fit_visibility_model(trace_from_model(poisson_distribution(1.0, 4), params, few)), ArityError);
        const auto times = linspace(0.0, 1e-3, 12);
        auto dark = trace_from_model(poisson_distribution(1.0, 4), params, times);
        std::fill(dark.contrast.begin(), dark.contrast.end(), 0.01);
        std::fill(dark.low_signal.begin(), dark.low_signal.end(), true);
        CHECK_THROWS_AS(fit_visibility_model(dark), DegenerateError);
        VisibilityFitOptions too_many;
        too_many.max_atoms = 13;
        CHECK_THROWS_AS(fit_visibility_model(trace_from_model(poisson_distribution(1.0, 4), params, times), too_many),
                        CapacityError);
    }
}

TEST_CASE("fit_tf_poisson") {
    SUBCASE("self-consistent round trip") {
        for (double n0 : {0.3, 1.0, 3.0}) {
            for (auto dim : {ProfileDimension::three, ProfileDimension::two}) {
                const auto occupied = tf_weighted_poisson({n0, dim}, 4).occupied_fractions();
                const auto fit = fit_tf_poisson(occupied, {}, dim);
                CHECK(fit.peak_mean == doctest::Approx(n0).epsilon(1e-4));
                CHECK_FALSE(fit.degenerate);
            }
        }
    }
    SUBCASE("f_0 never influences the fit") {
        auto d = tf_weighted_poisson({1.0, ProfileDimension::three}, 4);
        std::vector<double> rescaled(d.fractions().begin() + 1, d.fractions().end());
        for (auto& v : rescaled) {
            v *= 0.37;
        }
        CHECK(fit_tf_poisson(rescaled, {}, ProfileDimension::three).peak_mean == doctest::Approx(1.0).epsilon(1e-4));
    }
    SUBCASE("n0 -> 0 limit goes to the bottom of the search range") {
        const auto occupied = tf_weighted_poisson({1e-4, ProfileDimension::three}, 4).occupied_fractions();
        CHECK(fit_tf_poisson(occupied, {}, ProfileDimension::three).peak_mean < 0.011);
    }
    SUBCASE("single occupied fraction is flagged with infinite uncertainty") {
        const std::vector<double> only_ones{1.0, 0.0, 0.0, 0.0};
        const auto fit = fit_tf_poisson(only_ones, {}, ProfileDimension::three);
        CHECK(fit.degenerate);
        CHECK(std::isinf(fit.uncertainty));
    }
    SUBCASE("uncertainty propagates from fraction errors") {
        const auto occupied = tf_weighted_poisson({1.5, ProfileDimension::three}, 4).occupied_fractions();
        const std::vector<double> errors(4, 0.01);
        const auto fit = fit_tf_poisson(occupied, errors, ProfileDimension::three);
        CHECK(fit.uncertainty > 0.0);
        CHECK(fit.uncertainty < 0.5);
        const std::vector<double> bigger(4, 0.02);
        CHECK(fit_tf_poisson(occupied, bigger, ProfileDimension::three).uncertainty ==
              doctest::Approx(2.0 * fit.uncertainty).epsilon(1e-6));
    }
}

TEST_CASE("fit_power_law") {
    SUBCASE("exact power law") {
        std::vector<double> x;
        std::vector<double> y;
        for (double n : {1e4, 2e4, 3e4, 5e4, 8e4}) {
            x.push_back(n);
            y.push_back(0.02 * std::pow(n, 0.4));
        }
        const auto fit = fit_power_law(x, y);
        CHECK(std::abs(fit.exponent - 0.4) < 1e-9);
        CHECK(fit.prefactor == doctest::Approx(0.02).epsilon(1e-9));
        CHECK(fit.exponent_error < 1e-9);
    }
    SUBCASE("two points") {
        const std::vector<double> x{3.0, 6.0};
        const std::vector<double> y{2.0, 2.0 * 1.3195};
        CHECK(fit_power_law(x, y).exponent == doctest::Approx(0.400).epsilon(1e-4));
    }
    SUBCASE("10% multiplicative noise, 12 points over a decade") {
        int inside = 0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> noise(0.0, 0.1);
            std::vector<double> x;
            std::vector<double> y;
            for (int i = 0; i < 12; ++i) {
                const double n = 1e4 * std::pow(10.0, i / 11.0);
                x.push_back(n);
                y.push_back(std::pow(n, 0.4) * (1.0 + noise(rng)));
            }
            inside += std::abs(fit_power_law(x, y).exponent - 0.4) <= 0.1 ? 1 : 0;
        }
        CHECK(inside >= 190);
    }
    SUBCASE("errors") {
        const std::vector<double> x{1.0, 2.0, 3.0};
        const std::vector<double> y{1.0, -2.0, 3.0};
        CHECK_THROWS_AS(fit_power_law(x, y), DomainError);
        const std::vector<double> one{1.0};
        CHECK_THROWS_AS(fit_power_law(one, one), ArityError);
    }
}
