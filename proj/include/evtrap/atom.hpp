#pragma once

namespace evtrap {

// Fixed constants of the simulated alkali atom. Defaults are 87Rb on the D2 line.
struct AtomSpecies {
  double mass = 86.909180527 * 1.66053906660e-27;  // kg
  double gamma = 2.0 * 3.14159265358979323846 * 3.03e6;  // half-linewidth, rad/s (2*gamma = 2pi * 6.06 MHz)
  double i_sat = 25.0;                // W/m^2
  double hyperfine_splitting = 6.8e9;  // ground-state splitting, Hz
  double branch_to_f1 = 0.75;
  double branch_to_f2 = 0.25;
  double transition_wavelength = 780.241e-9;  // m

  static AtomSpecies rubidium87() { return {}; }

  double gamma_hz() const;
  double recoil_velocity() const;  // h / (m lambda)
  double recoil_energy() const;    // m v_rec^2 / 2
  double free_space_lifetime() const;  // 1 / (2 gamma)

  // Throws DomainError when an invariant is violated.
  void validate() const;
};

}  // namespace evtrap
