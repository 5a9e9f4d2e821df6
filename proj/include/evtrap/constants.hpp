#pragma once

#include <numbers>

namespace evtrap {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

namespace phys {
inline constexpr double planck = 6.62607015e-34;  // J s, exact
inline constexpr double hbar = planck / two_pi;
inline constexpr double boltzmann = 1.380649e-23;  // J/K, exact
inline constexpr double atomic_mass_unit = 1.66053906660e-27;
inline constexpr double standard_gravity = 9.81;
}  // namespace phys

// Energies are Joules internally; the interfaces quote them as E/h.
constexpr double energy_from_hz(double f) { return phys::planck * f; }
constexpr double hz_from_energy(double e) { return e / phys::planck; }
constexpr double angular(double f_hz) { return two_pi * f_hz; }
constexpr double ordinary(double omega) { return omega / two_pi; }

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double MHz = 1e6;
inline constexpr double GHz = 1e9;

}  // namespace evtrap
