#pragma once

#include <numbers>

// CODATA 2018 values (SI). h and k_B are exact by definition.
namespace fockfringe::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double hbar = planck / two_pi;         // J s
inline constexpr double boltzmann = 1.380649e-23;       // J/K
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double bohr_radius = 5.29177210903e-11;      // m

inline constexpr double rb87_mass = 86.909180527 * atomic_mass_unit;
// |F=1, m_F=-1> triplet-dominated s-wave scattering length.
inline constexpr double rb87_scattering_length = 100.4 * bohr_radius;

// Lattice laser wavelength of the double-well lattice.
inline constexpr double lattice_wavelength = 815e-9;

} // namespace fockfringe::constants
