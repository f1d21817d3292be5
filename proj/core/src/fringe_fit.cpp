#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include "fockfringe/constants.hpp"
#include "fockfringe/errors.hpp"
#include "fockfringe/estimation.hpp"
#include "fockfringe/least_squares.hpp"

namespace fockfringe {

namespace {

constexpr std::size_t kMinSamples = 20;
// Lowest fringe wavenumber considered, in units of 1/sigma.
constexpr double kMinFringeWavenumber = 1.5;

enum Param : Eigen::Index { kA = 0, kCenter, kSigma, kDelta, kContrast, kPhase };

void check_profile(const FringeProfile& profile) {
    profile.validate();
    if (profile.size() < kMinSamples) {
        throw ArityError("fringe fit needs at least " + std::to_string(kMinSamples) + " samples, got " +
                         std::to_string(profile.size()));
    }
    for (std::size_t i = 1; i < profile.size(); ++i) {
        if (!(profile.x[i] > profile.x[i - 1])) {
            throw DomainError("profile x samples must be strictly increasing");
        }
    }
}

FringeParams to_params(const Eigen::VectorXd& p) {
    FringeParams f;
    f.amplitude = p[kA];
    f.center = p[kCenter];
    f.sigma = p[kSigma];
    f.delta = p[kDelta];
    f.contrast = p[kContrast];
    f.phase = p[kPhase];
    return f;
}

// Envelope-weighted spectrum of the residual after the envelope,
// sum_i g_i e_i exp(-i k (x_i - x0)).
std::complex<double> weighted_spectrum(const FringeProfile& profile, const std::vector<double>& envelope,
                                       const std::vector<double>& excess, double center, double k) {
    std::complex<double> sum{};
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double arg = -k * (profile.x[i] - center);
        sum += envelope[i] * excess[i] * std::complex<double>(std::cos(arg), std::sin(arg));
    }
    return sum;
}

// Least-squares Gaussian through the profile, started from the moments.
// Pixel noise far out in the wings skews the second moment; the fit does not
// care, and its residual carries no low-wavenumber envelope mismatch.
void refine_envelope(const FringeProfile& profile, double pitch, FringeParams& guess) {
    const auto m = profile.size();
    LeastSquaresProblem problem;
    problem.residual_count = m;
    problem.residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < m; ++i) {
            const double u = (profile.x[i] - p[1]) / p[2];
            r[static_cast<Eigen::Index>(i)] = p[0] * std::exp(-0.5 * u * u) - profile.intensity[i];
        }
    };
    problem.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& J) {
        for (std::size_t i = 0; i < m; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const double u = (profile.x[i] - p[1]) / p[2];
            const double g = std::exp(-0.5 * u * u);
            J(row, 0) = g;
            J(row, 1) = p[0] * g * u / p[2];
            J(row, 2) = p[0] * g * u * u / p[2];
        }
    };
    problem.project = [pitch](Eigen::VectorXd& p) { p[2] = std::max(std::abs(p[2]), 2.0 * pitch); };
    Eigen::VectorXd start(3);
    start << guess.amplitude, guess.center, guess.sigma;
    LeastSquaresOptions options;
    options.max_iterations = 50;
    const auto solved = levenberg_marquardt(problem, start, options);
    const auto& p = solved.params;
    if (p.allFinite() && p[0] > 0.0 && p[2] > 0.0) {
        guess.amplitude = p[0];
        guess.center = p[1];
        guess.sigma = p[2];
    }
}

} // namespace

double FringeFit::error(int index) const {
    const double v = covariance(index, index);
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

FringeParams initial_fringe_guess(const FringeProfile& profile) {
    check_profile(profile);
    const auto n = profile.size();
    const double pitch = (profile.x.back() - profile.x.front()) / static_cast<double>(n - 1);

    double total = 0.0;
    double first = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += profile.intensity[i];
        first += profile.intensity[i] * profile.x[i];
    }
    if (!(total > 0.0)) {
        throw DegenerateError("profile carries no positive signal");
    }
    FringeParams guess;
    guess.center = first / total;
    double second = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = profile.x[i] - guess.center;
        second += profile.intensity[i] * u * u;
    }
    const double span = profile.x.back() - profile.x.front();
    guess.sigma = second > 0.0 ? std::sqrt(second / total) : span / 6.0;
    guess.sigma = std::clamp(guess.sigma, 2.0 * pitch, span);
    guess.amplitude = total * pitch / (std::sqrt(constants::two_pi) * guess.sigma);
    refine_envelope(profile, pitch, guess);

    std::vector<double> envelope(n);
    std::vector<double> excess(n);
    double envelope_power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = profile.x[i] - guess.center;
        envelope[i] = std::exp(-0.5 * u * u / (guess.sigma * guess.sigma));
        excess[i] = profile.intensity[i] - guess.amplitude * envelope[i];
        envelope_power += envelope[i] * envelope[i];
    }

    // Fringes live well above the envelope bandwidth and below Nyquist.
    const double k_min = kMinFringeWavenumber / guess.sigma;
    const double k_max = constants::pi / pitch;
    const double k_step = 0.25 / guess.sigma;
    double best_k = k_min;
    double best_power = -1.0;
    for (double k = k_min; k <= k_max; k += k_step) {
        const double power = std::norm(weighted_spectrum(profile, envelope, excess, guess.center, k));
        if (power > best_power) {
            best_power = power;
            best_k = k;
        }
    }

    // Golden-section refinement of the spectral peak.
    constexpr double inv_phi = 0.6180339887498949;
    double lo = std::max(best_k - k_step, 0.5 * k_min);
    double hi = best_k + k_step;
    auto power_at = [&](double k) {
        return std::norm(weighted_spectrum(profile, envelope, excess, guess.center, k));
    };
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double pa = power_at(a);
    double pb = power_at(b);
    for (int iter = 0; iter < 60 && (hi - lo) > 1e-9 * best_k; ++iter) {
        if (pa > pb) {
            hi = b;
            b = a;
            pb = pa;
            a = hi - inv_phi * (hi - lo);
            pa = power_at(a);
        } else {
            lo = a;
            a = b;
            pa = pb;
            b = lo + inv_phi * (hi - lo);
            pb = power_at(b);
        }
    }
    const double k_peak = 0.5 * (lo + hi);
    const auto peak = weighted_spectrum(profile, envelope, excess, guess.center, k_peak);

    guess.delta = 1.0 / k_peak;
    guess.contrast = std::clamp(2.0 * std::abs(peak) / (guess.amplitude * envelope_power), 0.0, 1.0);
    guess.phase = wrap_phase(std::arg(peak));
    return guess;
}

FringeFit fit_fringe(const FringeProfile& profile) { return fit_fringe(profile, initial_fringe_guess(profile)); }

FringeFit fit_fringe(const FringeProfile& profile, const FringeParams& initial) {
    check_profile(profile);
    const auto m = profile.size();

    LeastSquaresProblem problem;
    problem.residual_count = m;
    problem.residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const FringeParams f = to_params(p);
        for (std::size_t i = 0; i < m; ++i) {
            r[static_cast<Eigen::Index>(i)] = f.evaluate(profile.x[i]) - profile.intensity[i];
        }
    };
    problem.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& J) {
        const double amp = p[kA];
        const double sigma = p[kSigma];
        const double delta = p[kDelta];
        const double contrast = p[kContrast];
        for (std::size_t i = 0; i < m; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const double u = profile.x[i] - p[kCenter];
            const double g = std::exp(-0.5 * u * u / (sigma * sigma));
            const double theta = u / delta + p[kPhase];
            const double c = std::cos(theta);
            const double s = std::sin(theta);
            const double carrier = 1.0 + contrast * c;
            J(row, kA) = g * carrier;
            J(row, kCenter) = amp * g * (u / (sigma * sigma) * carrier + contrast * s / delta);
            J(row, kSigma) = amp * g * (u * u / (sigma * sigma * sigma)) * carrier;
            J(row, kDelta) = amp * g * contrast * s * u / (delta * delta);
            J(row, kContrast) = amp * g * c;
            J(row, kPhase) = -amp * g * contrast * s;
        }
    };

    // A "fringe" slower than the envelope trades off against x0 and sigma
    // along an almost flat valley when C ~ 0; keep Delta inside the band the
    // initial scan searches.
    problem.project = [](Eigen::VectorXd& p) {
        const double limit = std::abs(p[kSigma]) / kMinFringeWavenumber;
        if (std::abs(p[kDelta]) > limit) {
            p[kDelta] = std::copysign(limit, p[kDelta]);
        }
    };

    Eigen::VectorXd start(6);
    start << initial.amplitude, initial.center, initial.sigma, initial.delta, initial.contrast, initial.phase;
    const LeastSquaresResult solved = levenberg_marquardt(problem, start);

    // Canonical form: sigma, Delta > 0, C >= 0, phi in [0, 2 pi).
    Eigen::VectorXd p = solved.params;
    Eigen::Matrix<double, 6, 1> sign = Eigen::Matrix<double, 6, 1>::Ones();
    if (p[kSigma] < 0.0) {
        p[kSigma] = -p[kSigma];
        sign[kSigma] = -sign[kSigma];
    }
    if (p[kDelta] < 0.0) {
        p[kDelta] = -p[kDelta];
        p[kPhase] = -p[kPhase];
        sign[kDelta] = -sign[kDelta];
        sign[kPhase] = -sign[kPhase];
    }
    if (p[kContrast] < 0.0) {
        p[kContrast] = -p[kContrast];
        p[kPhase] += constants::pi;
        sign[kContrast] = -sign[kContrast];
    }
    p[kPhase] = wrap_phase(p[kPhase]);

    FringeFit fit;
    fit.params = to_params(p);
    fit.covariance = sign.asDiagonal() * solved.covariance * sign.asDiagonal();
    fit.residual_rms = std::sqrt(2.0 * solved.cost / static_cast<double>(m));
    fit.iterations = solved.iterations;
    fit.converged = solved.converged && p.allFinite();
    fit.phase_identifiable =
        fit.params.contrast >= kUnidentifiableContrast && fit.params.contrast > fit.contrast_error();
    return fit;
}

bool is_low_signal(double contrast) noexcept { return 2.0 * contrast < kLowSignalTwiceContrast; }

void VisibilityTrace::validate() const {
    const auto n = times.size();
    if (contrast.size() != n || contrast_error.size() != n || phase.size() != n ||
        phase_error.size() != n || low_signal.size() != n || failed.size() != n) {
        throw DomainError("visibility trace columns differ in length");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (contrast_error[i] < 0.0 || phase_error[i] < 0.0) {
            throw DomainError("visibility trace uncertainties must be non-negative");
        }
    }
}

std::vector<double> unwrap_phase(std::span<const double> wrapped, const std::vector<bool>& flagged) {
    if (flagged.size() != wrapped.size()) {
        throw DomainError("phase and flag arrays differ in length");
    }
    std::vector<double> out(wrapped.size());
    bool have_reference = false;
    double reference = 0.0;
    for (std::size_t i = 0; i < wrapped.size(); ++i) {
        double value = wrapped[i];
        if (have_reference) {
            value += constants::two_pi * std::round((reference - value) / constants::two_pi);
        }
        out[i] = value;
        if (!flagged[i]) {
            reference = value;
            have_reference = true;
        }
    }
    return out;
}

VisibilityTrace assemble_trace(std::span<const double> times, std::span<const FringeFit> fits) {
    if (times.size() != fits.size()) {
        throw DomainError("one fringe fit per time point is required");
    }
    VisibilityTrace trace;
    trace.times.assign(times.begin(), times.end());
    std::vector<double> wrapped;
    std::vector<bool> phase_flag;
    for (const auto& fit : fits) {
        const bool failed = !fit.converged || !(fit.params.sigma > 0.0) || !std::isfinite(fit.params.contrast);
        trace.contrast.push_back(fit.params.contrast);
        trace.contrast_error.push_back(fit.contrast_error());
        trace.phase_error.push_back(fit.phase_error());
        trace.low_signal.push_back(is_low_signal(fit.params.contrast));
        trace.failed.push_back(failed);
        wrapped.push_back(fit.params.phase);
        phase_flag.push_back(failed || is_low_signal(fit.params.contrast) || !fit.phase_identifiable);
    }
    trace.phase = unwrap_phase(wrapped, phase_flag);
    return trace;
}

VisibilityTrace extract_trace(std::span<const double> times, std::span<const FringeProfile> profiles) {
    if (times.size() != profiles.size()) {
        throw DomainError("one profile per time point is required");
    }
    std::vector<FringeFit> fits;
    fits.reserve(profiles.size());
    for (const auto& profile : profiles) {
        try {
            fits.push_back(fit_fringe(profile));
        } catch (const Error&) {
            fits.emplace_back(); // flagged as failed by assemble_trace
        }
    }
    return assemble_trace(times, fits);
}

} // namespace fockfringe
