#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evtrap/potentials.hpp"
#include "evtrap/resonator.hpp"
#include "evtrap/sslmc.hpp"
#include "evtrap/timetag.hpp"
#include "evtrap/tunneling.hpp"

namespace evtrap {

// A 1D grid given either as {lo, hi, n, log} or as an explicit list.
struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
  bool log = false;
  std::vector<double> list;

  std::vector<double> values() const;
  static GridSpec linear(double lo, double hi, int n) { return {lo, hi, n, false, {}}; }
  static GridSpec logarithmic(double lo, double hi, int n) { return {lo, hi, n, true, {}}; }
};

struct PotentialConfig {
  PotentialStack stack;  // c3, tweezer and loading field; u_inc/phi are starting values
  bool calibrate = true;
  CalibrationTargets targets;

  PotentialConfig();

  double profile_lo = 10e-9;   // m
  double profile_hi = 1000e-9; // m
  double profile_step = 1e-9;  // m
  GridSpec sweep_wavelength_nm;
};

struct ScanConfig {
  std::string kind = "detuning_saturation";
  GridSpec detuning_mhz = GridSpec::linear(-100.0, 400.0, 21);
  GridSpec saturation = GridSpec::logarithmic(1e3, 1e8, 21);
  GridSpec velocity = GridSpec::linear(0.1, 1.0, 10);
  double velocity_saturation = 2e5;
  SimParams sim;
};

struct TunnelingConfig {
  HyperfineState state = HyperfineState::F2;
  WkbOptions wkb;
  GridSpec delta_e_mhz = GridSpec::linear(-5.0, -1.0, 100);
  GridSpec survival_tau_s = GridSpec::logarithmic(1e-6, 1e3, 91);
};

struct ResonatorConfig {
  ResonatorParams params;
  GridSpec model_detuning_ghz = GridSpec::linear(-10.0, 10.0, 401);
  double p_in = 400e-9;             // W
  double input_loss = 0.5;
  double power_detuning_hz = 6.8e9; // ordinary frequency
  double lifetime = 16.3e-9;        // s, for the cooperativity report
  std::optional<std::string> spectrum;
};

struct TagsConfig {
  CycleSpec cycle;
  int threshold = 2;
  std::uint64_t hist_bin = 10'000;
  G2Options g2{10, 3000, true, 77.0, 50.0};
  std::uint64_t dead_time = 0;
  std::optional<std::uint64_t> run_duration;
  int n_min = 2;
  double lifetime_start = 10.0;  // ns
  SurvivalOptions survival;
  std::string synth_mode = "emitter";  // or "poisson"
  EmitterParams emitter;
  double poisson_rate = 1e5;        // Hz per channel
};

struct Config {
  std::string source;  // path it was read from, empty for defaults
  AtomSpecies atom;
  PotentialConfig potential;
  ScanConfig scan;
  TunnelingConfig tunneling;
  ResonatorConfig resonator;
  TagsConfig tags;

  void validate() const;
};

// Throws ConfigError (with a line number when known) on syntax, type, range
// or unknown-key problems. Missing c3 in [potential] is an error.
Config load_config(const std::string& path);
Config parse_config(const std::string& text, const std::string& source_name = "<string>");

// Resolved configuration in canonical units, used for manifests.
std::string config_to_json(const Config& cfg);

}  // namespace evtrap
