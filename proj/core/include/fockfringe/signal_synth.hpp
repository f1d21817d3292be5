#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fockfringe/ensembles.hpp"
#include "fockfringe/quantum_core.hpp"

namespace fockfringe {

/// The six parameters of the double-slit profile
/// F(x) = A exp(-(x - x0)^2 / 2 sigma^2) [1 + C cos((x - x0)/Delta + phi)].
struct FringeParams {
    double amplitude = 1.0; // A
    double center = 0.0;    // x0, m
    double sigma = 0.0;     // envelope rms width, m
    double delta = 0.0;     // fringe period / 2 pi, m
    double contrast = 0.0;  // C
    double phase = 0.0;     // phi, rad

    double evaluate(double x) const noexcept;
};

/// Time-of-flight imaging geometry for one double well.
struct TOFGeometry {
    double tof = 13e-3;         // s
    double separation = 0.0;    // source separation d, m
    double source_width = 0.0;  // in-trap rms width sigma_0, m
    double mass = 0.0;          // kg
    double pixel_pitch = 0.0;   // m
    double extent = 0.0;        // full width of the pixel grid, m

    void validate() const;

    // 13 ms TOF of 87Rb from wells lambda/2 apart; sigma_0 is the harmonic
    // ground state of a 30 E_R lattice site; 5 um pixels over +-5 sigma.
    static TOFGeometry reference();

    // Far-field envelope width hbar t / (m sigma_0).
    double envelope_sigma() const noexcept;
    // Pixel centres, symmetric about x = 0.
    std::vector<double> pixel_positions() const;
};

// Ground-state rms width of a sin^2 lattice site of the given depth (in
// recoil energies of the wavelength lambda).
double lattice_site_width(double depth_recoils, double wavelength, double mass);

struct FringePeriod {
    double period = 0.0; // h t / (m d), m
    double delta = 0.0;  // period / 2 pi, m
};

FringePeriod fringe_period(const TOFGeometry& geom);

struct NoiseSpec {
    double pixel_rms = 0.0;       // additive, intensity units
    double contrast_jitter = 0.0; // multiplicative rms on C
    double phase_jitter = 0.0;    // additive rms on phi, rad
    std::uint64_t seed = 0;

    void validate() const;
    bool silent() const noexcept { return pixel_rms == 0.0 && contrast_jitter == 0.0 && phase_jitter == 0.0; }
};

struct FringeProfile {
    std::vector<double> x;
    std::vector<double> intensity;
    std::optional<FringeParams> truth;

    void validate() const;
    std::size_t size() const noexcept { return x.size(); }
};

// Per-profile random stream derived from (seed, index) so generation order
// does not matter.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept;

// Sample `params` on `x`, then apply contrast/phase jitter and pixel noise
// drawn from `stream`. The recorded truth holds the jittered C and phi.
FringeProfile synthesize_profile(std::span<const double> x, const FringeParams& params,
                                 const NoiseSpec& noise, std::uint64_t stream);

// Profile from TOF geometry: x0 = 0, sigma and Delta from the geometry.
FringeProfile synthesize_profile(const TOFGeometry& geom, double contrast, double phase,
                                 double amplitude, const NoiseSpec& noise, std::uint64_t index = 0);

struct TraceSample {
    double time = 0.0;
    double contrast = 0.0; // model C(t), before jitter
    double phase = 0.0;    // model phi(t)
    FringeProfile profile;
};

// One profile per time: C(t) from closed_form_visibility, phi(t) from
// phase_trace, C optionally scaled by an excited-band mixture.
std::vector<TraceSample> synthesize_trace(const OccupationDistribution& dist,
                                          const SplitterParams& params, const TOFGeometry& geom,
                                          std::span<const double> times, const NoiseSpec& noise,
                                          std::optional<BandMixture> mixture = std::nullopt,
                                          double amplitude = 1.0);

// Logistic splitting ratio p_L(dx) = 1 / (1 + exp(-slope (dx - center))).
struct CalibrationModel {
    double slope = 40.0; // per unit dx/lambda
    double center = 0.0; // dx/lambda of the 50/50 splitter

    void validate() const;
    double left_fraction(double offset) const noexcept;
};

struct CalibrationCurves {
    std::vector<double> offsets;
    std::vector<double> left;
    std::vector<double> right;
};

CalibrationCurves calibration_curves(const CalibrationModel& model, std::span<const double> offsets);

// Linear-interpolated root of p_L - p_R on the shared grid.
// Throws NoCrossingError / AmbiguousCrossingError.
double find_crossing(std::span<const double> offsets, std::span<const double> left,
                     std::span<const double> right);

} // namespace fockfringe
