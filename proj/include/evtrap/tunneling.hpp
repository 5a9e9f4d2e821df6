#pragma once

#include <functional>
#include <vector>

#include "evtrap/potentials.hpp"

namespace evtrap {

using Potential1D = std::function<double(double)>;

enum class AttemptFrequency { ClassicalPeriod, Harmonic };
enum class EscapeSide { Surface, Outer };

struct WkbOptions {
  AttemptFrequency attempt = AttemptFrequency::ClassicalPeriod;
  EscapeSide side = EscapeSide::Surface;
  double rel_tol = 1e-8;
};

struct WkbResult {
  double time = 0.0;               // s
  double action = 0.0;             // dimensionless, integral of kappa(x) dx
  double transmission = 0.0;       // exp(-2 action)
  double period = 0.0;             // classical oscillation period at E, s
  double attempt_frequency = 0.0;  // Hz
  double energy = 0.0;             // J
  double delta_e = 0.0;            // E - U_barrier, J
  double u_barrier = 0.0;
  double x_barrier = 0.0;
  double x_tunnel_in = 0.0;   // turning point on the trap side of the barrier
  double x_tunnel_out = 0.0;  // turning point beyond the barrier
  double x_turn_far = 0.0;    // opposite turning point of the bound orbit
  bool above_barrier = false;
};

// Root of U(x) - e between lo and hi, which must bracket a sign change.
double turning_point(const Potential1D& u, double e, double lo, double hi);

// Integral of sqrt(2 m (U - E)) / hbar over [a, b].
double wkb_action(const Potential1D& u, double mass, double e, double a, double b,
                  double rel_tol = 1e-10);

// 2 * integral of dx / |v| over [a, b], i.e. the period of an orbit between
// turning points a and b.
double classical_period(const Potential1D& u, double mass, double e, double a, double b,
                        double rel_tol = 1e-10);

WkbResult wkb_tunneling_time(const PotentialStack& stack, HyperfineState f, double delta_e,
                             const WkbOptions& opts = {});

std::vector<WkbResult> wkb_sweep(const PotentialStack& stack, HyperfineState f,
                                 const std::vector<double>& delta_e, const WkbOptions& opts = {},
                                 int threads = 1);

struct WeightedEnergy {
  double delta_e = 0.0;
  double weight = 1.0;
};

struct SurvivalCurve {
  std::vector<double> tau;
  std::vector<double> survival;
  std::vector<double> lifetimes;  // per accepted sample
  int n_excluded = 0;
};

SurvivalCurve survival_curve(const std::vector<WeightedEnergy>& samples,
                             const std::vector<double>& tau_grid, const PotentialStack& stack,
                             HyperfineState f = HyperfineState::F2, const WkbOptions& opts = {},
                             int threads = 1);

std::vector<double> survival_from_lifetimes(const std::vector<double>& lifetimes,
                                            const std::vector<double>& weights,
                                            const std::vector<double>& tau_grid);

struct LogDecayFit {
  double amplitude = 0.0;
  double b = 0.0;
  double residual_rms = 0.0;
  double sigma_amplitude = 0.0;
  double sigma_b = 0.0;
};

// Least squares of S = A log(1 + b / tau).
LogDecayFit fit_log_decay(const std::vector<double>& tau, const std::vector<double>& s);

double recoil_photon_budget(double delta_e, const AtomSpecies& atom);

}  // namespace evtrap
