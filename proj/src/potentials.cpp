#include "evtrap/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "evtrap/constants.hpp"
#include "evtrap/errors.hpp"
#include "evtrap/lsq.hpp"

namespace evtrap {

namespace {

constexpr double kSampleStep = 0.25e-9;
constexpr double kRefineTol = 1e-12;
constexpr double kCurvatureStep = 0.1e-9;
const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

template <class F>
double golden_min(F&& f, double a, double b, double tol) {
  double c = b - kGolden * (b - a);
  double d = a + kGolden * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct Samples {
  std::vector<double> x;
  std::vector<double> u;
};

Samples sample(const PotentialStack& s, HyperfineState f, double lo, double hi) {
  int n = std::max(8, static_cast<int>(std::ceil((hi - lo) / kSampleStep)));
  Samples out;
  out.x.resize(n + 1);
  out.u.resize(n + 1);
  for (int i = 0; i <= n; ++i) {
    double x = (i == n) ? hi : lo + (hi - lo) * i / n;
    out.x[i] = x;
    out.u[i] = total_potential(x, f, s);
  }
  return out;
}

double refine_max(const PotentialStack& s, HyperfineState f, double a, double b) {
  return golden_min([&](double x) { return -total_potential(x, f, s); }, a, b, kRefineTol);
}

}  // namespace

const char* to_string(HyperfineState f) { return f == HyperfineState::F1 ? "F1" : "F2"; }

double EvanescentField::detuning(HyperfineState f, const AtomSpecies& atom) const {
  if (f == HyperfineState::F1) return detuning_f1;
  return detuning_f1 + two_pi * atom.hyperfine_splitting;
}

double TweezerField::wavenumber() const { return two_pi / wavelength; }

double evanescent_potential(double x, HyperfineState f, const EvanescentField& field,
                            const AtomSpecies& atom) {
  if (field.i0 == 0.0) return 0.0;
  double d = field.detuning(f, atom);
  double q = d / atom.gamma;
  double s0 = field.i0 / atom.i_sat;
  return 0.5 * phys::hbar * d / (1.0 + q * q) * s0 * std::exp(-2.0 * x / field.lambda_ev);
}

double tweezer_potential(double x, const TweezerField& tw) {
  double r = tw.r_refl;
  return -tw.u_inc * (1.0 + r * r + 2.0 * r * std::cos(2.0 * tw.wavenumber() * x + tw.phi_refl));
}

double casimir_polder(double x, const SurfaceModel& surface) {
  if (x < surface.x_contact)
    throw DomainError("Casimir-Polder evaluated inside the contact distance");
  return -surface.c3 / (x * x * x);
}

PotentialTerms potential_terms(double x, HyperfineState f, const PotentialStack& s) {
  PotentialTerms t;
  t.evanescent = evanescent_potential(x, f, s.evanescent, s.atom);
  t.tweezer = tweezer_potential(x, s.tweezer);
  t.casimir_polder = casimir_polder(x, s.surface);
  if (s.include_gravity) t.gravity = -s.atom.mass * s.gravity_accel * x;
  return t;
}

double total_potential(double x, HyperfineState f, const PotentialStack& s) {
  return potential_terms(x, f, s).total();
}

double PotentialStack::operator()(double x, HyperfineState f) const {
  return total_potential(x, f, *this);
}

double potential_gradient(double x, HyperfineState f, const PotentialStack& s) {
  const TweezerField& tw = s.tweezer;
  double k2 = 2.0 * tw.wavenumber();
  double g = 2.0 * tw.u_inc * tw.r_refl * k2 * std::sin(k2 * x + tw.phi_refl);
  g += -2.0 / s.evanescent.lambda_ev * evanescent_potential(x, f, s.evanescent, s.atom);
  double x2 = x * x;
  g += 3.0 * s.surface.c3 / (x2 * x2);
  if (s.include_gravity) g -= s.atom.mass * s.gravity_accel;
  return g;
}

void PotentialStack::validate() const {
  atom.validate();
  if (evanescent.i0 < 0.0) throw DomainError("evanescent i0 must be >= 0");
  if (!(evanescent.lambda_ev > 0.0)) throw DomainError("evanescent decay length must be > 0");
  if (!(tweezer.wavelength > 0.0)) throw DomainError("tweezer wavelength must be > 0");
  if (tweezer.u_inc < 0.0) throw DomainError("tweezer u_inc must be >= 0");
  if (tweezer.r_refl < 0.0 || tweezer.r_refl > 1.0)
    throw DomainError("tweezer reflection amplitude must lie in [0, 1]");
  if (surface.c3 < 0.0) throw DomainError("c3 must be >= 0");
  if (!(surface.x_contact > 0.0)) throw DomainError("x_contact must be > 0");
}

Window default_trap_window(const PotentialStack& s) {
  const TweezerField& tw = s.tweezer;
  double xc = s.surface.x_contact;
  if (tw.r_refl * tw.u_inc == 0.0) return {xc, xc + 0.5 * tw.wavelength};
  double phase = std::fmod(two_pi - tw.phi_refl, two_pi);
  if (phase < 0.0) phase += two_pi;
  double x1 = phase / (2.0 * tw.wavenumber());
  while (x1 < xc) x1 += 0.5 * tw.wavelength;
  return {xc, x1 + 0.25 * tw.wavelength};
}

TrapMinimum find_trap_minimum(const PotentialStack& s, HyperfineState f, Window w) {
  if (!(w.hi > w.lo)) throw DomainError("empty search window");
  if (w.lo < s.surface.x_contact) w.lo = s.surface.x_contact;
  Samples smp = sample(s, f, w.lo, w.hi);
  std::size_t best = 0;
  double best_u = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < smp.x.size(); ++i) {
    if (smp.u[i] < smp.u[i - 1] && smp.u[i] <= smp.u[i + 1] && smp.u[i] < best_u) {
      best = i;
      best_u = smp.u[i];
    }
  }
  if (best == 0) throw NoMinimum("potential has no interior minimum in the window");
  double x = golden_min([&](double y) { return total_potential(y, f, s); }, smp.x[best - 1],
                        smp.x[best + 1], kRefineTol);
  return {x, total_potential(x, f, s)};
}

double potential_curvature(const PotentialStack& s, HyperfineState f, double x) {
  double h = kCurvatureStep;
  double lo = std::max(x - h, s.surface.x_contact);
  double hi = lo + 2.0 * h;
  double mid = lo + h;
  return (total_potential(hi, f, s) - 2.0 * total_potential(mid, f, s) + total_potential(lo, f, s)) /
         (h * h);
}

TrapMetrics trap_metrics(const PotentialStack& s, HyperfineState f) {
  TrapMinimum mn = find_trap_minimum(s, f, default_trap_window(s));
  TrapMetrics m;
  m.x_min = mn.x;
  m.u_min = mn.u;

  Samples in = sample(s, f, s.surface.x_contact, mn.x);
  std::size_t imax = 0;
  for (std::size_t i = 1; i < in.u.size(); ++i)
    if (in.u[i] > in.u[imax]) imax = i;
  double xb = in.x[imax];
  if (imax > 0 && imax + 1 < in.x.size()) xb = refine_max(s, f, in.x[imax - 1], in.x[imax + 1]);
  m.x_barrier = xb;
  m.barrier_to_surface = std::max(0.0, total_potential(xb, f, s) - mn.u);

  Samples out = sample(s, f, mn.x, mn.x + 0.5 * s.tweezer.wavelength);
  double xo = out.x.back();
  for (std::size_t i = 1; i + 1 < out.x.size(); ++i) {
    if (out.u[i] > out.u[i - 1] && out.u[i] >= out.u[i + 1]) {
      xo = refine_max(s, f, out.x[i - 1], out.x[i + 1]);
      break;
    }
  }
  m.x_outer = xo;
  m.depth_to_vacuum = std::max(0.0, total_potential(xo, f, s) - mn.u);

  double curv = potential_curvature(s, f, mn.x);
  m.freq_x = curv > 0.0 ? std::sqrt(curv / s.atom.mass) / two_pi : 0.0;
  return m;
}

CalibrationResult calibrate_tweezer(const CalibrationTargets& targets,
                                    const PotentialStack& tmpl, double u_max) {
  if (!targets.x_min && !targets.freq_x)
    throw DomainError("calibration needs at least one target");
  tmpl.validate();
  const double k = tmpl.tweezer.wavenumber();
  const double r = tmpl.tweezer.r_refl;
  if (r <= 0.0) throw CalibrationFailed("no standing wave without reflection", 1.0);

  const bool fit_phi = targets.x_min.has_value();
  const bool fit_u = targets.freq_x.has_value();

  double phi0 = tmpl.tweezer.phi_refl;
  if (fit_phi) phi0 = std::fmod(two_pi - 2.0 * k * *targets.x_min + 4.0 * two_pi, two_pi);
  double u0 = tmpl.tweezer.u_inc;
  if (fit_u) {
    double w = two_pi * *targets.freq_x;
    u0 = tmpl.atom.mass * w * w / (2.0 * r * 4.0 * k * k);
  }
  if (!(u0 > 0.0)) throw CalibrationFailed("template tweezer depth must be positive", 1.0);

  auto build = [&](double u, double phi) {
    PotentialStack s = tmpl;
    s.tweezer.u_inc = u;
    s.tweezer.phi_refl = std::fmod(std::fmod(phi, two_pi) + two_pi, two_pi);
    return s;
  };

  const int m = (fit_phi ? 1 : 0) + (fit_u ? 1 : 0);
  auto unpack = [&](const Eigen::VectorXd& p, double& u, double& phi) {
    int i = 0;
    u = fit_u ? std::exp(p[i++]) : u0;
    phi = fit_phi ? p[i] : phi0;
  };
  ResidualFn resid = [&](const Eigen::VectorXd& p, Eigen::VectorXd& out) {
    double u, phi;
    unpack(p, u, phi);
    out.resize(m);
    try {
      TrapMetrics tm = trap_metrics(build(u, phi), HyperfineState::F2);
      int i = 0;
      if (fit_phi) out[i++] = (tm.x_min - *targets.x_min) / *targets.x_min;
      if (fit_u) out[i] = (tm.freq_x - *targets.freq_x) / *targets.freq_x;
    } catch (const NoMinimum&) {
      out.setConstant(10.0);
    }
  };

  Eigen::VectorXd p0(m);
  {
    int i = 0;
    if (fit_u) p0[i++] = std::log(u0);
    if (fit_phi) p0[i] = phi0;
  }
  if (fit_phi) {
    // The minimum can sit on a neighbouring fringe when CP is strong, so
    // start from the best point of a coarse phase grid.
    Eigen::VectorXd r0(m), trial = p0;
    resid(p0, r0);
    double best = r0.squaredNorm();
    for (int j = 0; j < 64; ++j) {
      trial[m - 1] = phi0 + (j - 32) * (two_pi / 64.0) * 0.25;
      resid(trial, r0);
      if (r0.squaredNorm() < best) {
        best = r0.squaredNorm();
        p0 = trial;
      }
    }
  }

  LsqResult fit = least_squares(resid, m, p0);
  double u, phi;
  unpack(fit.params, u, phi);
  CalibrationResult out;
  out.residual = std::sqrt(fit.chi2);
  out.u_inc = u;
  out.stack = build(u, phi);
  out.phi_refl = out.stack.tweezer.phi_refl;
  if (u_max > 0.0 && u > u_max)
    throw CalibrationFailed("calibrated tweezer depth exceeds u_max", out.residual);
  if (!(out.residual <= 0.05))
    throw CalibrationFailed("calibration residual above 5%", out.residual);
  out.metrics = trap_metrics(out.stack, HyperfineState::F2);
  return out;
}

}  // namespace evtrap
