#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "evtrap/potentials.hpp"
#include "evtrap/resonator.hpp"
#include "evtrap/rng.hpp"

namespace evtrap {

enum class Outcome { Trapped, SurfaceHit, Reflected };
enum class Termination { PulseEnd, Surface, Escape };

// How the tweezer shifts the scattering resonance. U_excited = scale * U_ground
// for ScaledExcited; GroundOnly is scale 0.
enum class LightShiftModel { None, GroundOnly, ScaledExcited };

enum class RecoilMode { Single, Double };

// Prefactor of the saturated two-level rate: gamma in s^-1 (textbook) or the
// same number read as Hz (gamma / 2pi).
enum class RatePrefactor { Gamma, GammaHz };

const char* to_string(Outcome o);
const char* to_string(LightShiftModel m);

struct ScatteringModel {
  LightShiftModel light_shift = LightShiftModel::ScaledExcited;
  double excited_shift_scale = -3.0;
  RatePrefactor prefactor = RatePrefactor::Gamma;
};

struct SimParams {
  double pulse_duration = 0.5e-3;
  double dt = 1e-9;
  double x_start = 2e-6;
  double x_escape = 2e-6;
  double v_mean = 0.3;
  double temperature = 30e-6;
  int n_traj = 300;
  std::uint64_t seed = 1;
  double trapped_fraction_threshold = 0.5;
  std::optional<Window> trap_region;  // default: [x_contact, F2 outer barrier]
  bool include_back_scatter_to_f1 = false;
  ScatteringModel scattering;
  RecoilMode recoil = RecoilMode::Single;

  // The sampled far-field speed is converted to the speed at x_start by energy
  // conservation from U = 0.
  bool accelerate_from_far_field = true;
  // Skip integration once an F2 atom is confined to a closed orbit.
  bool fast_forward = true;
  int record_stride = 0;  // 0: no path samples
  // A step whose position change would exceed lambda_ev/10 is split into at
  // most this many equal sub-steps. 1 restores the strict StepTooLarge guard.
  int max_substeps = 1024;

  // Test hooks.
  bool disable_scattering = false;
  std::optional<double> forced_rate;  // constant jump rate in every state, 1/s
  bool freeze_motion = false;

  void validate(const PotentialStack& stack) const;
};

struct InitialState {
  double x = 0.0;
  double v = 0.0;
  HyperfineState f = HyperfineState::F1;
};

struct ScatterEvent {
  double t = 0.0;
  double x = 0.0;
  HyperfineState to = HyperfineState::F1;
  int recoil_sign = 1;
};

struct PathSample {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
  HyperfineState f = HyperfineState::F1;
};

struct TrajectoryRecord {
  std::vector<PathSample> path;
  std::vector<ScatterEvent> scatter_events;
  Termination termination = Termination::PulseEnd;
  Outcome outcome = Outcome::Reflected;
  std::int64_t steps = 0;
  std::int64_t steps_in_region = 0;
  double time_in_trap_region = 0.0;
  double end_time = 0.0;
  double x_final = 0.0;
  double v_final = 0.0;
  HyperfineState f_final = HyperfineState::F1;
  double energy = 0.0;                   // KE + U(x, F) at the end, J
  double energy_rel_f2_min = 0.0;        // energy - u_min(F2), J
  bool fast_forwarded = false;
};

// Trap geometry seen by the simulator for one stack (loading field on).
struct TrapContext {
  Window region;
  bool trap_exists = false;
  double u_min_f2 = 0.0;
  double depth_f2 = 0.0;
  double x_min_f2 = 0.0;
};

TrapContext make_trap_context(const PotentialStack& stack, const SimParams& params);

double saturation_at(double x, const PotentialStack& stack);
double effective_detuning(double x, HyperfineState f, const PotentialStack& stack,
                          const ScatteringModel& model);
double scattering_rate(double x, HyperfineState f, const PotentialStack& stack,
                       const ScatteringModel& model = {});

InitialState sample_initial_state(const SimParams& params, const PotentialStack& stack,
                                  RngStream& rng);

TrajectoryRecord simulate_trajectory(const InitialState& init, const SimParams& params,
                                     const PotentialStack& stack, const TrapContext& ctx,
                                     RngStream& rng);
TrajectoryRecord simulate_trajectory(const InitialState& init, const SimParams& params,
                                     const PotentialStack& stack, RngStream& rng);

Outcome classify_outcome(const TrajectoryRecord& rec, const SimParams& params);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

inline constexpr double kWilsonZ95 = 1.959963984540054;
Interval wilson_interval(std::int64_t k, std::int64_t n, double z = kWilsonZ95);

struct CellStats {
  std::int64_t n = 0;
  std::int64_t trapped = 0;
  std::int64_t surface = 0;
  std::int64_t reflected = 0;
  double trapped_fraction = 0.0;
  double surface_fraction = 0.0;
  double reflected_fraction = 0.0;
  Interval trapped_ci;
  Interval surface_ci;
  Interval reflected_ci;
  std::optional<double> mean_energy_over_depth;
  double trap_depth_f2 = 0.0;
  double x_min_f2 = 0.0;
  bool trap_destroyed = false;
};

struct TrajectorySummary {
  Outcome outcome = Outcome::Reflected;
  double energy_rel = 0.0;
};

CellStats reduce_cell(const std::vector<TrajectorySummary>& trajs, const TrapContext& ctx);

CellStats run_ensemble(const SimParams& params, const PotentialStack& stack, int threads = 1,
                       std::uint64_t cell_index = 0);

struct AxisSpec {
  std::string name;
  std::string unit;
  std::vector<double> values;  // in the unit above
};

struct PhaseDiagram {
  std::string kind;
  AxisSpec rows;
  AxisSpec cols;
  std::vector<CellStats> cells;  // row-major

  const CellStats& at(std::size_t i, std::size_t j) const { return cells[i * cols.values.size() + j]; }
};

// det_grid in rad/s, sat_grid as I0/I_sat.
PhaseDiagram scan_detuning_intensity(const std::vector<double>& det_grid,
                                     const std::vector<double>& sat_grid,
                                     const SimParams& params, const PotentialStack& stack_template,
                                     int threads = 1);

PhaseDiagram scan_velocity_detuning(const std::vector<double>& v_grid,
                                    const std::vector<double>& det_grid, double saturation,
                                    const SimParams& params, const PotentialStack& stack_template,
                                    int threads = 1);

void write_phase_csv(std::ostream& os, const PhaseDiagram& pd);
std::string phase_summary_json(const PhaseDiagram& pd);
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec);

struct PowerChain {
  double finesse = 0.0;
  double p_circ = 0.0;      // W
  double intensity = 0.0;   // W/m^2
  double saturation = 0.0;  // I0 / I_sat
};

// detuning in rad/s; resonator rates in Hz.
PowerChain power_to_saturation(double p_in, double detuning, const ResonatorParams& res,
                               double input_loss = 0.5, const AtomSpecies& atom = {});

}  // namespace evtrap
