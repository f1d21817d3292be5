#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fockfringe {

class OccupationDistribution;

// Largest per-site atom number representable as a two-mode Fock state.
inline constexpr int kMaxAtomsPerSite = 12;

using Complex = std::complex<double>;

/// N atoms in a double well, expanded in the Fock basis |n_L, N - n_L>.
///
/// amplitude(n_L) is the coefficient of |n_L, N - n_L>. The state is
/// always normalized; construction from raw amplitudes validates this.
class TwoModeState {
public:
    TwoModeState(int total_atoms, std::vector<Complex> amplitudes);

    int total_atoms() const noexcept { return total_atoms_; }
    const Complex& amplitude(int n_left) const { return amplitudes_.at(static_cast<std::size_t>(n_left)); }
    std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }

    double norm_squared() const noexcept;

private:
    int total_atoms_;
    std::vector<Complex> amplitudes_;
};

/// Interaction energy, tilt and dephasing of the double-well interferometer.
///
/// U and V are stored as angular frequencies (energy / hbar, rad/s).
struct SplitterParams {
    double interaction = 0.0;   // U / hbar
    double tilt = 0.0;          // V / hbar
    double dephasing = 0.0;     // Gamma, 1/s
    double split_ratio = 0.5;   // probability that one atom enters |L>

    void validate() const;

    static SplitterParams from_hz(double u_over_h_hz, double v_over_h_hz, double gamma = 0.0,
                                  double split_ratio = 0.5);
    double interaction_hz() const noexcept;
    double tilt_hz() const noexcept;
    // h / U; zero interaction has no revival.
    double revival_period() const;
};

struct CoherenceSample {
    double time = 0.0;
    Complex coherence{};   // <a_L^dagger a_R>
    double contrast = 0.0; // |coherence| / (N/2)
    double phase = 0.0;    // arg(coherence)
};

// Binomial beam splitter: each atom independently enters |L> with
// probability p. Amplitudes are real and non-negative.
TwoModeState binomial_split(int total_atoms, double split_ratio = 0.5);

// Two-mode phase evolution exp(-i omega(n_L, n_R) t) with
// omega = n_L V + (U/2)[n_L(n_L-1) + n_R(n_R-1)].
TwoModeState evolve(const TwoModeState& state, const SplitterParams& params, double time);

// Angular frequency of |n_L, n_R> under the two-mode Hamiltonian.
double fock_frequency(int n_left, int n_right, const SplitterParams& params) noexcept;

// Brute-force <a_L^dagger a_R> summed over the Fock basis.
// Throws DegenerateError for N = 0.
CoherenceSample one_body_coherence(const TwoModeState& state, double time = 0.0);

// Signed, atom-weighted sum  sum_N f_N N cos^{N-1}(U t) / sum_N f_N N.
// Both closed_form_visibility and phase_trace are read off this quantity.
double signed_visibility(const OccupationDistribution& dist, const SplitterParams& params, double time);

// C(t) = e^{-Gamma t} |sum_N f_N N cos^{N-1}(U t)| / sum_N f_N N.
double closed_form_visibility(const OccupationDistribution& dist, const SplitterParams& params,
                              double time);

// phi(t) = V t + (pi when the signed sum is negative), reduced into [0, 2 pi).
double phase_trace(const OccupationDistribution& dist, const SplitterParams& params, double time);

// Reduce an angle into [0, 2 pi).
double wrap_phase(double angle) noexcept;

} // namespace fockfringe
