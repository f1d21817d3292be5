#include "fockfringe/signal_synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "fockfringe/constants.hpp"
#include "fockfringe/errors.hpp"

namespace fockfringe {

double FringeParams::evaluate(double x) const noexcept {
    const double u = x - center;
    const double envelope = amplitude * std::exp(-0.5 * u * u / (sigma * sigma));
    return envelope * (1.0 + contrast * std::cos(u / delta + phase));
}

void TOFGeometry::validate() const {
    if (!(tof > 0.0 && separation > 0.0 && source_width > 0.0 && mass > 0.0 && pixel_pitch > 0.0 &&
          extent > 0.0)) {
        throw DomainError("TOF geometry values must all be positive");
    }
    if (extent < 4.0 * envelope_sigma()) {
        throw DomainError("pixel grid must span at least 4 sigma of the envelope");
    }
}

double lattice_site_width(double depth_recoils, double wavelength, double mass) {
    using constants::hbar;
    const double k = constants::two_pi / wavelength;
    const double recoil = hbar * hbar * k * k / (2.0 * mass);
    const double omega = 2.0 * std::sqrt(depth_recoils) * recoil / hbar;
    return std::sqrt(hbar / (mass * omega));
}

TOFGeometry TOFGeometry::reference() {
    TOFGeometry g;
    g.tof = 13e-3;
    g.separation = 0.5 * constants::lattice_wavelength;
    g.mass = constants::rb87_mass;
    g.source_width = lattice_site_width(30.0, constants::lattice_wavelength, g.mass);
    g.pixel_pitch = 5e-6;
    g.extent = 10.0 * g.envelope_sigma();
    return g;
}

double TOFGeometry::envelope_sigma() const noexcept {
    return constants::hbar * tof / (mass * source_width);
}

std::vector<double> TOFGeometry::pixel_positions() const {
    const auto count = static_cast<std::size_t>(std::floor(extent / pixel_pitch)) + 1;
    std::vector<double> x(count);
    const double offset = 0.5 * static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        x[i] = (static_cast<double>(i) - offset) * pixel_pitch;
    }
    return x;
}

FringePeriod fringe_period(const TOFGeometry& geom) {
    if (!(geom.tof > 0.0 && geom.mass > 0.0 && geom.separation > 0.0)) {
        throw DomainError("fringe period needs positive TOF, mass and separation");
    }
    FringePeriod p;
    p.period = constants::planck * geom.tof / (geom.mass * geom.separation);
    p.delta = p.period / constants::two_pi;
    return p;
}

void NoiseSpec::validate() const {
    if (!(pixel_rms >= 0.0 && contrast_jitter >= 0.0 && phase_jitter >= 0.0)) {
        throw DomainError("noise rms values must be non-negative");
    }
}

void FringeProfile::validate() const {
    if (x.size() != intensity.size()) {
        throw DomainError("profile x and intensity arrays differ in length");
    }
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    // splitmix64 finalizer over a combination of both words
    std::uint64_t z = seed ^ (index + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

FringeProfile synthesize_profile(std::span<const double> x, const FringeParams& params,
                                 const NoiseSpec& noise, std::uint64_t stream) {
    if (!(params.contrast >= 0.0 && params.contrast <= 1.0)) {
        throw DomainError("contrast must lie in [0, 1]");
    }
    if (!(params.sigma > 0.0 && params.delta > 0.0)) {
        throw DomainError("envelope width and fringe scale must be positive");
    }
    noise.validate();

    std::mt19937_64 rng(stream);
    std::normal_distribution<double> normal(0.0, 1.0);

    FringeParams actual = params;
    const double contrast_kick = normal(rng);
    const double phase_kick = normal(rng);
    actual.contrast = std::clamp(params.contrast * (1.0 + noise.contrast_jitter * contrast_kick), 0.0, 1.0);
    actual.phase = params.phase + noise.phase_jitter * phase_kick;

    FringeProfile profile;
    profile.x.assign(x.begin(), x.end());
    profile.intensity.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        profile.intensity[i] = actual.evaluate(x[i]);
    }
    if (noise.pixel_rms > 0.0) {
        for (auto& v : profile.intensity) {
            v += noise.pixel_rms * normal(rng);
        }
    }
    profile.truth = actual;
    return profile;
}

FringeProfile synthesize_profile(const TOFGeometry& geom, double contrast, double phase,
                                 double amplitude, const NoiseSpec& noise, std::uint64_t index) {
    geom.validate();
    FringeParams params;
    params.amplitude = amplitude;
    params.center = 0.0;
    params.sigma = geom.envelope_sigma();
    params.delta = fringe_period(geom).delta;
    params.contrast = contrast;
    params.phase = phase;
    const auto x = geom.pixel_positions();
    return synthesize_profile(x, params, noise, stream_seed(noise.seed, index));
}

std::vector<TraceSample> synthesize_trace(const OccupationDistribution& dist,
                                          const SplitterParams& params, const TOFGeometry& geom,
                                          std::span<const double> times, const NoiseSpec& noise,
                                          std::optional<BandMixture> mixture, double amplitude) {
    params.validate();
    geom.validate();
    noise.validate();
    const double scale = mixture ? band_mixture_contrast_scale(*mixture) : 1.0;

    std::vector<TraceSample> samples;
    samples.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        TraceSample s;
        s.time = times[i];
        s.contrast = scale * closed_form_visibility(dist, params, s.time);
        s.phase = phase_trace(dist, params, s.time);
        s.profile = synthesize_profile(geom, s.contrast, s.phase, amplitude, noise, i);
        samples.push_back(std::move(s));
    }
    return samples;
}

void CalibrationModel::validate() const {
    if (!(slope > 0.0)) {
        throw DomainError("calibration slope must be positive");
    }
}

double CalibrationModel::left_fraction(double offset) const noexcept {
    return 1.0 / (1.0 + std::exp(-slope * (offset - center)));
}

CalibrationCurves calibration_curves(const CalibrationModel& model, std::span<const double> offsets) {
    model.validate();
    CalibrationCurves curves;
    curves.offsets.assign(offsets.begin(), offsets.end());
    curves.left.reserve(offsets.size());
    curves.right.reserve(offsets.size());
    for (double dx : offsets) {
        const double left = model.left_fraction(dx);
        curves.left.push_back(left);
        curves.right.push_back(1.0 - left);
    }
    return curves;
}

double find_crossing(std::span<const double> offsets, std::span<const double> left,
                     std::span<const double> right) {
    if (offsets.size() != left.size() || offsets.size() != right.size()) {
        throw DomainError("calibration curves must share one grid");
    }
    if (offsets.size() < 2) {
        throw ArityError("need at least two grid points to locate a crossing");
    }
    for (std::size_t i = 1; i < offsets.size(); ++i) {
        if (!(offsets[i] > offsets[i - 1])) {
            throw DomainError("calibration grid must be strictly increasing");
        }
    }

    std::vector<double> roots;
    auto diff = [&](std::size_t i) { return left[i] - right[i]; };
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const double d = diff(i);
        if (d == 0.0) {
            roots.push_back(offsets[i]);
            continue;
        }
        if (i + 1 < offsets.size()) {
            const double next = diff(i + 1);
            if (next != 0.0 && (d < 0.0) != (next < 0.0)) {
                const double fraction = d / (d - next);
                roots.push_back(offsets[i] + fraction * (offsets[i + 1] - offsets[i]));
            }
        }
    }
    if (roots.empty()) {
        throw NoCrossingError("p_L - p_R never changes sign on the sampled grid");
    }
    if (roots.size() > 1) {
        throw AmbiguousCrossingError("p_L - p_R changes sign " + std::to_string(roots.size()) +
                                     " times; the crossing is ambiguous");
    }
    return roots.front();
}

} // namespace fockfringe
