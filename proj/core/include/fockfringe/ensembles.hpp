#pragma once

#include <span>
#include <vector>

namespace fockfringe {

/// Fractions f_N of lattice sites holding N = 0..N_max atoms.
///
/// Invariants: N_max >= 1, every f_N >= 0, sum f_N = 1 within 1e-9.
class OccupationDistribution {
public:
    explicit OccupationDistribution(std::vector<double> fractions);

    // Scales arbitrary non-negative weights onto the simplex.
    static OccupationDistribution normalized(std::vector<double> weights);
    // All sites hold exactly n atoms.
    static OccupationDistribution pure(int atoms, int max_atoms);

    int max_atoms() const noexcept { return static_cast<int>(fractions_.size()) - 1; }
    double fraction(int atoms) const;
    std::span<const double> fractions() const noexcept { return fractions_; }

    double mean() const noexcept;
    // sum_N f_N N, the normalization of the visibility formula.
    double atom_weight() const noexcept;
    // f_N / (1 - f_0) for N >= 1; index 0 of the result holds N = 1.
    std::vector<double> occupied_fractions() const;

private:
    std::vector<double> fractions_;
};

enum class ProfileDimension { two = 2, three = 3 };

ProfileDimension profile_dimension_from_int(int dimension);

struct TFEnsembleParams {
    double peak_mean = 0.0; // mean site occupation at the density peak
    ProfileDimension dimension = ProfileDimension::three;
};

/// Harmonic trap holding a Thomas-Fermi condensate, and the lattice site
/// volume used to turn peak density into peak site occupation.
struct TrapConfig {
    double radial_frequency = 0.0; // rad/s
    double axial_frequency = 0.0;  // rad/s
    double atom_number = 0.0;
    double scattering_length = 0.0; // m
    double atomic_mass = 0.0;       // kg
    double site_volume = 0.0;       // m^3

    void validate() const;

    // 24 Hz x 24 Hz x 8 Hz 87Rb trap, 2e4 atoms, one lambda x lambda/2 x lambda/2 site.
    static TrapConfig reference();
};

struct BandMixture {
    double excited_fraction = 0.0;
};

// Quadrature controls for tf_weighted_poisson. Nodes = panels * 20.
struct QuadratureOptions {
    int panels = 64;
};

// Poisson(mean) truncated at N_max; the tail mass is folded into f_{N_max}.
OccupationDistribution poisson_distribution(double mean, int max_atoms);

// Poisson pmf, exact at mean = 0.
double poisson_pmf(int atoms, double mean) noexcept;

// Site-averaged Poisson statistics for a lattice loaded from a Thomas-Fermi
// cloud: local mean proportional to the local density, averaged over the
// distribution of densities g_d(u) of an inverted parabola (g_3 = 1.5 sqrt(1-u),
// g_2 = 1).
OccupationDistribution tf_weighted_poisson(const TFEnsembleParams& params, int max_atoms,
                                           QuadratureOptions quadrature = {});

// T = hbar U / (k_B ln(1/f_2)), with U an angular frequency. Kelvin.
double estimate_temperature(double f2, double interaction);

// Peak density mu/g of the Thomas-Fermi cloud times the site volume.
double tf_peak_occupation(const TrapConfig& trap);

// Contrast left when a fraction f_e of atoms interferes pi out of phase.
double band_mixture_contrast_scale(const BandMixture& mix);

} // namespace fockfringe
