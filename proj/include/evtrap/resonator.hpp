#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace evtrap {

// Field rates are ordinary frequencies (Hz), as quoted in spectroscopy.
struct ResonatorParams {
  double kappa_ex = 1.15e9;
  double kappa_i = 1.16e9;
  double h_backscatter = 1.08e9;
  double fsr = 1.36e12;
  double lambda_ev = 86e-9;      // m
  double mode_area = 400e-9 * 450e-9;  // m^2
  std::optional<double> g0_max;  // Hz, coupling at the surface for the cycling transition
  double zeeman_floor = 0.816;

  double kappa() const { return kappa_ex + kappa_i; }
  void validate() const;
};

double transmission(double detuning_hz, const ResonatorParams& p);

struct SpectrumPoint {
  double detuning = 0.0;  // Hz
  double transmission = 0.0;
};

struct SpectrumFit {
  double kappa_ex = 0.0;
  double kappa_i = 0.0;
  double h_backscatter = 0.0;
  double offset = 0.0;
  double sigma_kappa_ex = 0.0;
  double sigma_kappa_i = 0.0;
  double sigma_h = 0.0;
  double sigma_offset = 0.0;
  double residual_rms = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  int n_points = 0;
};

struct SpectrumGuess {
  double kappa_ex = 1e9;
  double kappa_i = 1e9;
  double h_backscatter = 0.5e9;
  double offset = 0.0;
};

// Fits (kappa_ex, kappa_i, h, detuning offset) to normalized transmission data.
// The under-/over-coupled ambiguity is resolved by the initial guess.
SpectrumFit fit_spectrum(const std::vector<SpectrumPoint>& points,
                         const std::optional<SpectrumGuess>& guess = std::nullopt);

double finesse(const ResonatorParams& p);
double finesse(double fsr, double kappa);

struct Coupling {
  double g_max = 0.0;
  double g_floor = 0.0;
};

Coupling coupling_at_distance(double x, const ResonatorParams& p);

// gamma_hz is the atomic half-linewidth as an ordinary frequency (3.03 MHz).
double cooperativity(double g_hz, const ResonatorParams& p, double gamma_hz);
double cooperativity(double g_hz, double kappa_hz, double gamma_hz);
double lifetime_to_C(double tau_e, double gamma_hz);
double C_to_lifetime(double c, double gamma_hz);
double C_to_g(double c, const ResonatorParams& p, double gamma_hz);
double C_to_g(double c, double kappa_hz, double gamma_hz);

// sqrt(<3j^2>) over sigma+- transitions of an equally populated F' manifold,
// relative to the stretched transition. 2 -> 3 gives sqrt(2/3).
double zeeman_rms_dipole_ratio(int f_ground = 2, int f_excited = 3);
double wigner_3j(double j1, double j2, double j3, double m1, double m2, double m3);

}  // namespace evtrap
