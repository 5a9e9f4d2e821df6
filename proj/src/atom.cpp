#include "evtrap/atom.hpp"

#include <cmath>

#include "evtrap/constants.hpp"
#include "evtrap/errors.hpp"

namespace evtrap {

double AtomSpecies::gamma_hz() const { return gamma / two_pi; }

double AtomSpecies::recoil_velocity() const {
  return phys::planck / (mass * transition_wavelength);
}

double AtomSpecies::recoil_energy() const {
  double v = recoil_velocity();
  return 0.5 * mass * v * v;
}

double AtomSpecies::free_space_lifetime() const { return 1.0 / (2.0 * gamma); }

void AtomSpecies::validate() const {
  if (!(mass > 0.0)) throw DomainError("atom mass must be positive");
  if (!(gamma > 0.0)) throw DomainError("atom gamma must be positive");
  if (!(i_sat > 0.0)) throw DomainError("atom i_sat must be positive");
  if (!(hyperfine_splitting > 0.0)) throw DomainError("hyperfine splitting must be positive");
  if (!(transition_wavelength > 0.0)) throw DomainError("transition wavelength must be positive");
  if (branch_to_f1 < 0.0 || branch_to_f2 < 0.0 ||
      std::abs(branch_to_f1 + branch_to_f2 - 1.0) > 1e-12)
    throw DomainError("branching ratios must be nonnegative and sum to 1");
}

}  // namespace evtrap
