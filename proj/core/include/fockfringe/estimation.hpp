#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "fockfringe/ensembles.hpp"
#include "fockfringe/quantum_core.hpp"
#include "fockfringe/signal_synth.hpp"

namespace fockfringe {

// ---------------------------------------------------------------------------
// Fringe fitting
// ---------------------------------------------------------------------------

/// Fitted double-slit profile. Parameter order in `covariance`:
/// A, x0, sigma, Delta, C, phi.
struct FringeFit {
    FringeParams params;
    Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Zero();
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    bool phase_identifiable = true;

    double error(int index) const;
    double contrast_error() const { return error(4); }
    double phase_error() const { return error(5); }
};

// Below this contrast the fringe phase carries no information.
inline constexpr double kUnidentifiableContrast = 1e-3;

// Starting point for fit_fringe: Gaussian moments for A, x0, sigma, then
// the strongest peak of the envelope-weighted residual spectrum for Delta,
// C and phi.
FringeParams initial_fringe_guess(const FringeProfile& profile);

FringeFit fit_fringe(const FringeProfile& profile);
FringeFit fit_fringe(const FringeProfile& profile, const FringeParams& initial);

// ---------------------------------------------------------------------------
// Visibility traces
// ---------------------------------------------------------------------------

// Phase points derived from a signal with 2 C below this are low-signal.
inline constexpr double kLowSignalTwiceContrast = 0.1;

struct VisibilityTrace {
    std::vector<double> times;
    std::vector<double> contrast;
    std::vector<double> contrast_error;
    std::vector<double> phase; // unwrapped
    std::vector<double> phase_error;
    std::vector<bool> low_signal;
    std::vector<bool> failed;

    std::size_t size() const noexcept { return times.size(); }
    void validate() const;
};

bool is_low_signal(double contrast) noexcept;

// Fit every profile, flag low-signal and failed points, unwrap phase.
VisibilityTrace extract_trace(std::span<const double> times, std::span<const FringeProfile> profiles);
VisibilityTrace assemble_trace(std::span<const double> times, std::span<const FringeFit> fits);

// Minimal-jump 2 pi unwrapping along time. Flagged points are unwrapped
// against the last unflagged point but never become the reference.
std::vector<double> unwrap_phase(std::span<const double> wrapped, const std::vector<bool>& flagged);

// ---------------------------------------------------------------------------
// Occupation statistics from C(t)
// ---------------------------------------------------------------------------

struct VisibilityFitOptions {
    int max_atoms = 4;
    std::optional<double> fixed_interaction; // U / hbar, rad/s
};

struct CtFitResult {
    // fractions[k] is f_{k+1}; f_0 is not constrained by C(t).
    std::vector<double> fractions;
    std::vector<double> fraction_errors;
    double interaction = 0.0; // U / hbar
    double interaction_error = 0.0;
    double dephasing = 0.0; // Gamma, 1/s
    double dephasing_error = 0.0;
    bool interaction_fixed = false;
    // Order: f_1..f_Nmax, U, Gamma.
    Eigen::MatrixXd covariance;
    double chi_squared = 0.0;
    double reduced_chi_squared = 0.0;
    double residual_rms = 0.0;
    int degrees_of_freedom = 0;
    bool converged = false;

    int max_atoms() const noexcept { return static_cast<int>(fractions.size()); }
    double fraction(int atoms) const;
    // f_0 = 0 distribution suitable for the forward model.
    OccupationDistribution distribution() const;
};

/// Model parameters as seen by the optimizer: softmax logits for
/// f_2..f_Nmax relative to f_1, then U and Gamma.
struct VisibilityModelPoint {
    std::vector<double> fractions; // f_1..f_Nmax, on the simplex
    double interaction = 0.0;
    double dephasing = 0.0;
};

double visibility_model(const VisibilityModelPoint& point, double time);

// Weighted cost 0.5 sum w_i (model - C_i)^2 with weights 1/sigma_i^2
// normalized to unit mean. Invariant under point permutation and uniform
// rescaling of the uncertainties.
double visibility_model_cost(const VisibilityTrace& trace, const VisibilityModelPoint& point);

CtFitResult fit_visibility_model(const VisibilityTrace& trace, const VisibilityFitOptions& options = {});

// ---------------------------------------------------------------------------
// Thomas-Fermi Poisson fit and power laws
// ---------------------------------------------------------------------------

struct PeakOccupationFit {
    double peak_mean = 0.0;
    double uncertainty = 0.0;
    double cost = 0.0;
    bool degenerate = false;
};

// Fractions f_1..f_Nmax (index 0 holds N = 1). Both sides are renormalized
// over N >= 1 before comparison. `errors` may be empty.
PeakOccupationFit fit_tf_poisson(std::span<const double> occupied_fractions,
                                 std::span<const double> errors, ProfileDimension dimension);
PeakOccupationFit fit_tf_poisson(const CtFitResult& result, ProfileDimension dimension);

struct PowerLawFit {
    double exponent = 0.0;
    double exponent_error = 0.0;
    double prefactor = 0.0;
    double prefactor_error = 0.0;
};

// y = prefactor * x^exponent by least squares in log-log coordinates.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

} // namespace fockfringe
