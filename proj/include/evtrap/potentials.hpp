#pragma once

#include <optional>

#include "evtrap/atom.hpp"

namespace evtrap {

enum class HyperfineState { F1, F2 };

const char* to_string(HyperfineState f);

// Blue-detuned loading field guided by the resonator. Decays as exp(-x/lambda_ev)
// in amplitude, so the intensity goes as exp(-2x/lambda_ev).
struct EvanescentField {
  double i0 = 0.0;            // intensity at the waveguide surface, W/m^2
  double lambda_ev = 86e-9;   // m
  double detuning_f1 = 0.0;   // from the F=1 transition, rad/s

  // F=2 sees the field one ground-state splitting further to the blue.
  double detuning(HyperfineState f, const AtomSpecies& atom) const;
  double saturation_at_surface(const AtomSpecies& atom) const { return i0 / atom.i_sat; }
};

// Plane-wave surrogate for the tweezer reflected off the chip: the incident beam
// interferes with a partial reflection of amplitude r_refl and phase phi_refl.
struct TweezerField {
  double wavelength = 835e-9;  // m
  double u_inc = 0.0;          // single-pass depth scale, J
  double r_refl = 0.0;
  double phi_refl = 3.14159265358979323846;

  double wavenumber() const;
};

struct SurfaceModel {
  double c3 = 0.0;           // J m^3
  double x_contact = 5e-9;   // m
};

struct PotentialTerms {
  double evanescent = 0.0;
  double tweezer = 0.0;
  double casimir_polder = 0.0;
  double gravity = 0.0;

  double total() const { return evanescent + tweezer + casimir_polder + gravity; }
};

struct PotentialStack {
  AtomSpecies atom;
  EvanescentField evanescent;
  TweezerField tweezer;
  SurfaceModel surface;
  bool include_gravity = true;
  double gravity_accel = 9.81;

  double operator()(double x, HyperfineState f) const;
  void validate() const;
};

double evanescent_potential(double x, HyperfineState f, const EvanescentField& field,
                            const AtomSpecies& atom);
double tweezer_potential(double x, const TweezerField& tw);
double casimir_polder(double x, const SurfaceModel& surface);
double total_potential(double x, HyperfineState f, const PotentialStack& stack);
PotentialTerms potential_terms(double x, HyperfineState f, const PotentialStack& stack);

// Analytic dU/dx of the total potential; used by the trajectory integrator.
double potential_gradient(double x, HyperfineState f, const PotentialStack& stack);

struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

struct TrapMinimum {
  double x = 0.0;
  double u = 0.0;
};

// Lowest interior local minimum of U over the window, refined by golden section
// to 0.01 nm. Throws NoMinimum when U has no interior minimum there.
TrapMinimum find_trap_minimum(const PotentialStack& stack, HyperfineState f, Window window);

// [x_contact, first tweezer antinode beyond contact + lambda/4]: the fringe that
// forms the near-surface trap.
Window default_trap_window(const PotentialStack& stack);

struct TrapMetrics {
  double x_min = 0.0;
  double u_min = 0.0;
  double depth_to_vacuum = 0.0;
  double barrier_to_surface = 0.0;
  double freq_x = 0.0;
  double x_barrier = 0.0;  // position of the barrier toward the surface
  double x_outer = 0.0;    // position of the outer barrier (or the window edge)

  // Energy needed to leave the well in either direction.
  double depth() const {
    return barrier_to_surface < depth_to_vacuum ? barrier_to_surface : depth_to_vacuum;
  }
};

TrapMetrics trap_metrics(const PotentialStack& stack, HyperfineState f);

// Finite-difference second derivative with the 0.1 nm step used for trap frequencies.
double potential_curvature(const PotentialStack& stack, HyperfineState f, double x);

struct CalibrationTargets {
  std::optional<double> x_min;   // m
  std::optional<double> freq_x;  // Hz
};

struct CalibrationResult {
  double u_inc = 0.0;
  double phi_refl = 0.0;
  double residual = 0.0;  // root-sum-square relative error over the given targets
  PotentialStack stack;
  TrapMetrics metrics;
};

// Fits (u_inc, phi_refl) of the template's tweezer to the targets, evaluated on
// the F=2 curve. Throws CalibrationFailed when the residual exceeds 5%.
CalibrationResult calibrate_tweezer(const CalibrationTargets& targets,
                                    const PotentialStack& stack_template,
                                    double u_max = 0.0);

}  // namespace evtrap
