#include "fockfringe/ensembles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "fockfringe/constants.hpp"
#include "fockfringe/errors.hpp"

namespace fockfringe {

namespace {

constexpr double kNormalizationTolerance = 1e-9;

struct GaussLegendreRule {
    static constexpr int order = 20;
    std::array<double, order> nodes{};   // on [-1, 1]
    std::array<double, order> weights{};
};

// Newton iteration on P_n from the Chebyshev initial guesses.
GaussLegendreRule make_gauss_legendre() {
    GaussLegendreRule rule;
    constexpr int n = GaussLegendreRule::order;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(constants::pi * (i + 0.75) / (n + 0.5));
        double derivative = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            derivative = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / derivative;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        const double weight = 2.0 / ((1.0 - x * x) * derivative * derivative);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = weight;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = weight;
    }
    return rule;
}

const GaussLegendreRule& gauss_legendre() {
    static const GaussLegendreRule rule = make_gauss_legendre();
    return rule;
}

// Composite Gauss-Legendre over [0, 1] of a vector-valued integrand;
// f(x, out) adds nothing, it overwrites `out`.
template <class F>
std::vector<double> integrate_unit_interval(F&& f, std::size_t components, int panels) {
    const auto& rule = gauss_legendre();
    const double width = 1.0 / panels;
    std::vector<double> sum(components, 0.0);
    std::vector<double> value(components);
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * width;
        for (int i = 0; i < GaussLegendreRule::order; ++i) {
            f(mid + 0.5 * width * rule.nodes[static_cast<std::size_t>(i)], value);
            const double w = 0.5 * width * rule.weights[static_cast<std::size_t>(i)];
            for (std::size_t c = 0; c < components; ++c) {
                sum[c] += w * value[c];
            }
        }
    }
    return sum;
}

// out[n] = weight * Poisson(n; mean) for n < out.size().
void poisson_row(double mean, double weight, std::vector<double>& out) {
    double term = weight * std::exp(-mean);
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = term;
        term *= mean / static_cast<double>(n + 1);
    }
}

void check_max_atoms(int max_atoms) {
    if (max_atoms < 1) {
        throw DomainError("N_max must be at least 1, got " + std::to_string(max_atoms));
    }
}

// Fold the mass missing from f_0..f_{N_max-1} into f_{N_max}.
OccupationDistribution absorb_tail(std::vector<double> fractions) {
    const double head = std::accumulate(fractions.begin(), fractions.end() - 1, 0.0);
    fractions.back() = std::max(0.0, 1.0 - head);
    return OccupationDistribution::normalized(std::move(fractions));
}

} // namespace

OccupationDistribution::OccupationDistribution(std::vector<double> fractions)
    : fractions_(std::move(fractions)) {
    if (fractions_.size() < 2) {
        throw DomainError("occupation distribution needs N_max >= 1");
    }
    double sum = 0.0;
    for (std::size_t n = 0; n < fractions_.size(); ++n) {
        if (!(fractions_[n] >= 0.0) || !std::isfinite(fractions_[n])) {
            throw DomainError("fraction f_" + std::to_string(n) + " must be finite and non-negative");
        }
        sum += fractions_[n];
    }
    if (std::abs(sum - 1.0) > kNormalizationTolerance) {
        throw DomainError("fractions must sum to 1, got " + std::to_string(sum));
    }
}

OccupationDistribution OccupationDistribution::normalized(std::vector<double> weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(sum > 0.0)) {
        throw DomainError("cannot normalize weights with zero total");
    }
    for (auto& w : weights) {
        w /= sum;
    }
    return OccupationDistribution(std::move(weights));
}

OccupationDistribution OccupationDistribution::pure(int atoms, int max_atoms) {
    check_max_atoms(max_atoms);
    if (atoms < 0 || atoms > max_atoms) {
        throw DomainError("pure occupation " + std::to_string(atoms) + " outside 0..N_max");
    }
    std::vector<double> f(static_cast<std::size_t>(max_atoms) + 1, 0.0);
    f[static_cast<std::size_t>(atoms)] = 1.0;
    return OccupationDistribution(std::move(f));
}

double OccupationDistribution::fraction(int atoms) const {
    if (atoms < 0 || atoms > max_atoms()) {
        return 0.0;
    }
    return fractions_[static_cast<std::size_t>(atoms)];
}

double OccupationDistribution::mean() const noexcept {
    double sum = 0.0;
    for (std::size_t n = 0; n < fractions_.size(); ++n) {
        sum += static_cast<double>(n) * fractions_[n];
    }
    return sum;
}

double OccupationDistribution::atom_weight() const noexcept { return mean(); }

std::vector<double> OccupationDistribution::occupied_fractions() const {
    const double occupied = 1.0 - fractions_.front();
    if (!(occupied > 0.0)) {
        throw DegenerateError("distribution has no occupied sites");
    }
    std::vector<double> result(fractions_.begin() + 1, fractions_.end());
    const double sum = std::accumulate(result.begin(), result.end(), 0.0);
    for (auto& f : result) {
        f /= sum;
    }
    return result;
}

ProfileDimension profile_dimension_from_int(int dimension) {
    switch (dimension) {
    case 2:
        return ProfileDimension::two;
    case 3:
        return ProfileDimension::three;
    default:
        throw DomainError("profile dimension must be 2 or 3, got " + std::to_string(dimension));
    }
}

void TrapConfig::validate() const {
    const bool positive = radial_frequency > 0.0 && axial_frequency > 0.0 && atom_number > 0.0 &&
                          scattering_length > 0.0 && atomic_mass > 0.0 && site_volume > 0.0;
    if (!positive) {
        throw DomainError("trap frequencies, atom number, scattering length, mass and site volume "
                          "must all be positive");
    }
}

TrapConfig TrapConfig::reference() {
    constexpr double lambda = constants::lattice_wavelength;
    TrapConfig trap;
    trap.radial_frequency = constants::two_pi * 24.0;
    trap.axial_frequency = constants::two_pi * 8.0;
    trap.atom_number = 2e4;
    trap.scattering_length = constants::rb87_scattering_length;
    trap.atomic_mass = constants::rb87_mass;
    trap.site_volume = lambda * (0.5 * lambda) * (0.5 * lambda);
    return trap;
}

double poisson_pmf(int atoms, double mean) noexcept {
    if (atoms < 0) {
        return 0.0;
    }
    if (mean == 0.0) {
        return atoms == 0 ? 1.0 : 0.0;
    }
    return std::exp(atoms * std::log(mean) - mean - std::lgamma(atoms + 1.0));
}

OccupationDistribution poisson_distribution(double mean, int max_atoms) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw DomainError("Poisson mean must be finite and non-negative");
    }
    check_max_atoms(max_atoms);
    std::vector<double> f(static_cast<std::size_t>(max_atoms) + 1, 0.0);
    for (int n = 0; n < max_atoms; ++n) {
        f[static_cast<std::size_t>(n)] = poisson_pmf(n, mean);
    }
    return absorb_tail(std::move(f));
}

OccupationDistribution tf_weighted_poisson(const TFEnsembleParams& params, int max_atoms,
                                           QuadratureOptions quadrature) {
    if (!(params.peak_mean >= 0.0) || !std::isfinite(params.peak_mean)) {
        throw DomainError("peak mean occupation must be finite and non-negative");
    }
    if (params.dimension != ProfileDimension::two && params.dimension != ProfileDimension::three) {
        throw DomainError("profile dimension must be 2 or 3");
    }
    if (quadrature.panels < 1) {
        throw DomainError("quadrature needs at least one panel");
    }
    check_max_atoms(max_atoms);

    const double n0 = params.peak_mean;
    const auto head = static_cast<std::size_t>(max_atoms);
    std::vector<double> f;
    if (params.dimension == ProfileDimension::two) {
        // g_2(u) = 1
        f = integrate_unit_interval([&](double u, std::vector<double>& out) { poisson_row(n0 * u, 1.0, out); },
                                    head, quadrature.panels);
    } else {
        // g_3(u) = 1.5 sqrt(1 - u); with u = 1 - s^2 the integrand is 3 s^2 P(n; n0 (1 - s^2)).
        f = integrate_unit_interval(
            [&](double s, std::vector<double>& out) { poisson_row(n0 * (1.0 - s * s), 3.0 * s * s, out); },
            head, quadrature.panels);
    }
    f.push_back(0.0);
    return absorb_tail(std::move(f));
}

double estimate_temperature(double f2, double interaction) {
    if (!(f2 > 0.0 && f2 < 1.0)) {
        throw DomainError("temperature estimate needs 0 < f_2 < 1");
    }
    if (!(interaction > 0.0)) {
        throw DomainError("temperature estimate needs U > 0");
    }
    return constants::hbar * interaction / (constants::boltzmann * std::log(1.0 / f2));
}

double tf_peak_occupation(const TrapConfig& trap) {
    trap.validate();
    using constants::hbar;
    const double mean_frequency =
        std::cbrt(trap.radial_frequency * trap.radial_frequency * trap.axial_frequency);
    const double oscillator_length = std::sqrt(hbar / (trap.atomic_mass * mean_frequency));
    const double chemical_potential =
        0.5 * hbar * mean_frequency *
        std::pow(15.0 * trap.atom_number * trap.scattering_length / oscillator_length, 0.4);
    const double coupling =
        4.0 * constants::pi * hbar * hbar * trap.scattering_length / trap.atomic_mass;
    return chemical_potential / coupling * trap.site_volume;
}

double band_mixture_contrast_scale(const BandMixture& mix) {
    if (!(mix.excited_fraction >= 0.0 && mix.excited_fraction <= 1.0)) {
        throw DomainError("excited fraction must lie in [0, 1]");
    }
    return std::abs(1.0 - 2.0 * mix.excited_fraction);
}

} // namespace fockfringe
