#include "fockfringe/quantum_core.hpp"

#include <cmath>
#include <string>

#include "fockfringe/constants.hpp"
#include "fockfringe/ensembles.hpp"
#include "fockfringe/errors.hpp"

namespace fockfringe {

namespace {

void check_atom_number(int total_atoms) {
    if (total_atoms < 0) {
        throw DomainError("atom number must be non-negative, got " + std::to_string(total_atoms));
    }
    if (total_atoms > kMaxAtomsPerSite) {
        throw CapacityError("atom number " + std::to_string(total_atoms) + " exceeds the cap of " +
                            std::to_string(kMaxAtomsPerSite));
    }
}

double binomial_coefficient(int n, int k) {
    double result = 1.0;
    for (int i = 1; i <= k; ++i) {
        result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return result;
}

} // namespace

TwoModeState::TwoModeState(int total_atoms, std::vector<Complex> amplitudes)
    : total_atoms_(total_atoms), amplitudes_(std::move(amplitudes)) {
    check_atom_number(total_atoms_);
    if (amplitudes_.size() != static_cast<std::size_t>(total_atoms_) + 1) {
        throw DomainError("a state of " + std::to_string(total_atoms_) + " atoms needs " +
                          std::to_string(total_atoms_ + 1) + " amplitudes, got " +
                          std::to_string(amplitudes_.size()));
    }
    if (std::abs(norm_squared() - 1.0) > 1e-12) {
        throw DomainError("state is not normalized: |psi|^2 = " + std::to_string(norm_squared()));
    }
}

double TwoModeState::norm_squared() const noexcept {
    double sum = 0.0;
    for (const auto& a : amplitudes_) {
        sum += std::norm(a);
    }
    return sum;
}

void SplitterParams::validate() const {
    if (!(dephasing >= 0.0)) {
        throw DomainError("dephasing rate must be non-negative");
    }
    if (!(split_ratio >= 0.0 && split_ratio <= 1.0)) {
        throw DomainError("split ratio must lie in [0, 1]");
    }
    if (!std::isfinite(interaction) || !std::isfinite(tilt)) {
        throw DomainError("interaction and tilt must be finite");
    }
}

SplitterParams SplitterParams::from_hz(double u_over_h_hz, double v_over_h_hz, double gamma,
                                       double split_ratio) {
    SplitterParams p;
    p.interaction = constants::two_pi * u_over_h_hz;
    p.tilt = constants::two_pi * v_over_h_hz;
    p.dephasing = gamma;
    p.split_ratio = split_ratio;
    p.validate();
    return p;
}

double SplitterParams::interaction_hz() const noexcept { return interaction / constants::two_pi; }
double SplitterParams::tilt_hz() const noexcept { return tilt / constants::two_pi; }

double SplitterParams::revival_period() const {
    if (interaction == 0.0) {
        throw DomainError("no revival without interaction");
    }
    return constants::two_pi / std::abs(interaction);
}

TwoModeState binomial_split(int total_atoms, double split_ratio) {
    check_atom_number(total_atoms);
    if (!(split_ratio >= 0.0 && split_ratio <= 1.0)) {
        throw DomainError("split ratio must lie in [0, 1]");
    }
    std::vector<Complex> amplitudes(static_cast<std::size_t>(total_atoms) + 1);
    for (int n_left = 0; n_left <= total_atoms; ++n_left) {
        const double probability = binomial_coefficient(total_atoms, n_left) *
                                   std::pow(split_ratio, n_left) *
                                   std::pow(1.0 - split_ratio, total_atoms - n_left);
        amplitudes[static_cast<std::size_t>(n_left)] = std::sqrt(probability);
    }
    return TwoModeState(total_atoms, std::move(amplitudes));
}

double fock_frequency(int n_left, int n_right, const SplitterParams& params) noexcept {
    const double pairs = 0.5 * (static_cast<double>(n_left) * (n_left - 1) +
                                static_cast<double>(n_right) * (n_right - 1));
    return static_cast<double>(n_left) * params.tilt + params.interaction * pairs;
}

TwoModeState evolve(const TwoModeState& state, const SplitterParams& params, double time) {
    const int total = state.total_atoms();
    std::vector<Complex> amplitudes(state.amplitudes().begin(), state.amplitudes().end());
    for (int n_left = 0; n_left <= total; ++n_left) {
        const double omega = fock_frequency(n_left, total - n_left, params);
        amplitudes[static_cast<std::size_t>(n_left)] *= std::polar(1.0, -omega * time);
    }
    return TwoModeState(total, std::move(amplitudes));
}

CoherenceSample one_body_coherence(const TwoModeState& state, double time) {
    const int total = state.total_atoms();
    if (total == 0) {
        throw DegenerateError("one-body coherence is undefined for an empty double well");
    }
    Complex sum{};
    for (int n_left = 0; n_left < total; ++n_left) {
        const double matrix_element = std::sqrt(static_cast<double>(n_left + 1) * (total - n_left));
        sum += std::conj(state.amplitude(n_left + 1)) * state.amplitude(n_left) * matrix_element;
    }
    CoherenceSample sample;
    sample.time = time;
    sample.coherence = sum;
    sample.contrast = std::abs(sum) / (0.5 * total);
    sample.phase = std::arg(sum);
    return sample;
}

double signed_visibility(const OccupationDistribution& dist, const SplitterParams& params, double time) {
    if (dist.max_atoms() > kMaxAtomsPerSite) {
        throw CapacityError("distribution N_max " + std::to_string(dist.max_atoms()) +
                            " exceeds the cap of " + std::to_string(kMaxAtomsPerSite));
    }
    const double c = std::cos(params.interaction * time);
    double numerator = 0.0;
    double denominator = 0.0;
    double power = 1.0; // cos^{N-1}
    for (int n = 1; n <= dist.max_atoms(); ++n) {
        const double weight = dist.fraction(n) * n;
        numerator += weight * power;
        denominator += weight;
        power *= c;
    }
    if (denominator <= 0.0) {
        throw DegenerateError("distribution has no occupied sites (all weight on N = 0)");
    }
    return numerator / denominator;
}

double closed_form_visibility(const OccupationDistribution& dist, const SplitterParams& params,
                              double time) {
    const double signed_sum = signed_visibility(dist, params, time);
    const double value = std::exp(-params.dephasing * time) * std::abs(signed_sum);
    return std::min(value, 1.0);
}

double phase_trace(const OccupationDistribution& dist, const SplitterParams& params, double time) {
    const double signed_sum = signed_visibility(dist, params, time);
    const double flip = signed_sum < 0.0 ? constants::pi : 0.0;
    return wrap_phase(params.tilt * time + flip);
}

double wrap_phase(double angle) noexcept {
    double wrapped = std::fmod(angle, constants::two_pi);
    if (wrapped < 0.0) {
        wrapped += constants::two_pi;
    }
    if (wrapped >= constants::two_pi) {
        wrapped = 0.0;
    }
    return wrapped;
}

} // namespace fockfringe
