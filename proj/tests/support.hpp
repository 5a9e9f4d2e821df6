#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "evtrap/constants.hpp"
#include "evtrap/potentials.hpp"

namespace evtrap::testing {

// The stack used throughout: r = 0.4, C3/h = 900 Hz um^3, tweezer calibrated to
// a 180 nm / 650 kHz F2 trap with the loading field off.
inline PotentialStack calibrated_stack() {
  static const PotentialStack cached = [] {
    PotentialStack s;
    s.surface.c3 = energy_from_hz(900.0) * 1e-18;
    s.tweezer.r_refl = 0.4;
    s.tweezer.u_inc = energy_from_hz(20.0 * MHz);
    CalibrationTargets t;
    t.x_min = 180e-9;
    t.freq_x = 650e3;
    return calibrate_tweezer(t, s).stack;
  }();
  return cached;
}

inline PotentialStack loading_stack(double detuning_mhz, double saturation) {
  PotentialStack s = calibrated_stack();
  s.evanescent.detuning_f1 = angular(detuning_mhz * MHz);
  s.evanescent.i0 = saturation * s.atom.i_sat;
  return s;
}

inline std::filesystem::path tmp_dir(const std::string& name) {
  auto p = std::filesystem::path(EVTRAP_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace evtrap::testing
