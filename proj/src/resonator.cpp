#include "evtrap/resonator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "evtrap/errors.hpp"
#include "evtrap/lsq.hpp"

namespace evtrap {

void ResonatorParams::validate() const {
  if (kappa_ex < 0.0 || kappa_i < 0.0 || h_backscatter < 0.0)
    throw DomainError("resonator rates must be >= 0");
  if (!(kappa() > 0.0)) throw DomainError("total resonator decay rate must be > 0");
  if (!(fsr > 0.0)) throw DomainError("fsr must be > 0");
  if (!(lambda_ev > 0.0)) throw DomainError("lambda_ev must be > 0");
  if (!(mode_area > 0.0)) throw DomainError("mode_area must be > 0");
  if (!(zeeman_floor > 0.0 && zeeman_floor <= 1.0))
    throw DomainError("zeeman_floor must lie in (0, 1]");
  if (g0_max && *g0_max < 0.0) throw DomainError("g0_max must be >= 0");
}

namespace {

double model_t(double d, double kex, double ki, double h) {
  using cd = std::complex<double>;
  const cd i(0.0, 1.0);
  cd a = i * (kex + ki) + d;
  cd t = 1.0 - 2.0 * i * kex * a / (a * a - h * h);
  return std::norm(t);
}

}  // namespace

double transmission(double detuning_hz, const ResonatorParams& p) {
  return model_t(detuning_hz, p.kappa_ex, p.kappa_i, p.h_backscatter);
}

SpectrumFit fit_spectrum(const std::vector<SpectrumPoint>& pts,
                         const std::optional<SpectrumGuess>& guess) {
  const int m = static_cast<int>(pts.size());
  if (m < 10) throw BadWindow("spectrum fit needs at least 10 points");
  std::size_t imin = 0;
  double tmax = pts[0].transmission;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].transmission < pts[imin].transmission) imin = i;
    tmax = std::max(tmax, pts[i].transmission);
  }
  if (tmax - pts[imin].transmission < 0.02)
    throw BadWindow("spectrum shows no transmission dip");
  double dlo = pts[0].detuning, dhi = pts[0].detuning;
  for (const auto& p : pts) {
    dlo = std::min(dlo, p.detuning);
    dhi = std::max(dhi, p.detuning);
  }
  if (pts[imin].detuning == dlo || pts[imin].detuning == dhi)
    throw BadWindow("transmission minimum lies at the edge of the window");

  SpectrumGuess g;
  if (guess) {
    g = *guess;
  } else {
    // Half width at half depth of the dip gives the total decay rate.
    double tmin = pts[imin].transmission;
    double half = 0.5 * (tmin + 1.0);
    double left = pts[imin].detuning, right = pts[imin].detuning;
    for (const auto& p : pts)
      if (p.transmission <= half) {
        left = std::min(left, p.detuning);
        right = std::max(right, p.detuning);
      }
    double kappa = std::max(0.5 * (right - left), (dhi - dlo) / m);
    double sq = std::sqrt(std::clamp(tmin, 0.0, 1.0));
    g.kappa_ex = 0.5 * kappa * (1.0 - sq);
    g.kappa_i = kappa - g.kappa_ex;
    g.h_backscatter = 0.3 * kappa;
    g.offset = pts[imin].detuning;
  }

  double scale = g.kappa_ex + g.kappa_i;
  if (!(scale > 0.0)) throw FitDegenerate("initial decay rate must be positive");
  ResidualFn f = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
    r.resize(m);
    double kex = std::abs(q[0]) * scale, ki = std::abs(q[1]) * scale, h = std::abs(q[2]) * scale;
    double off = q[3] * scale;
    for (int i = 0; i < m; ++i)
      r[i] = model_t(pts[i].detuning - off, kex, ki, h) - pts[i].transmission;
  };
  Eigen::VectorXd p0(4);
  p0 << g.kappa_ex / scale, g.kappa_i / scale, std::max(g.h_backscatter, 1e-3 * scale) / scale,
      g.offset / scale;
  LsqResult fit = least_squares(f, m, p0);
  if (fit.rank < 4) throw FitDegenerate("spectrum Jacobian is rank deficient");

  SpectrumFit out;
  out.n_points = m;
  out.kappa_ex = std::abs(fit.params[0]) * scale;
  out.kappa_i = std::abs(fit.params[1]) * scale;
  out.h_backscatter = std::abs(fit.params[2]) * scale;
  out.offset = fit.params[3] * scale;
  out.covariance = fit.covariance * (scale * scale);
  out.sigma_kappa_ex = std::sqrt(std::max(0.0, out.covariance(0, 0)));
  out.sigma_kappa_i = std::sqrt(std::max(0.0, out.covariance(1, 1)));
  out.sigma_h = std::sqrt(std::max(0.0, out.covariance(2, 2)));
  out.sigma_offset = std::sqrt(std::max(0.0, out.covariance(3, 3)));
  out.residual_rms = fit.rms();
  return out;
}

double finesse(double fsr, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be > 0");
  return fsr / (2.0 * kappa);
}

double finesse(const ResonatorParams& p) { return finesse(p.fsr, p.kappa()); }

Coupling coupling_at_distance(double x, const ResonatorParams& p) {
  if (x < 0.0) throw DomainError("distance must be >= 0");
  if (!p.g0_max) throw DomainError("g0_max is not configured");
  Coupling c;
  c.g_max = *p.g0_max * std::exp(-x / p.lambda_ev);
  c.g_floor = p.zeeman_floor * c.g_max;
  return c;
}

double cooperativity(double g, double kappa, double gamma) {
  if (!(kappa > 0.0 && gamma > 0.0)) throw DomainError("kappa and gamma must be > 0");
  return g * g / (kappa * gamma);
}

double cooperativity(double g, const ResonatorParams& p, double gamma) {
  return cooperativity(g, p.kappa(), gamma);
}

double lifetime_to_C(double tau_e, double gamma_hz) {
  if (!(tau_e > 0.0 && gamma_hz > 0.0)) throw DomainError("lifetime and gamma must be > 0");
  // (2 Gamma)^-1 = tau_e with Gamma an angular rate; Gamma/gamma - 1.
  double big_gamma = 1.0 / (2.0 * tau_e);
  double c = big_gamma / (2.0 * 3.14159265358979323846 * gamma_hz) - 1.0;
  if (c < 0.0) throw NonPhysical("lifetime exceeds the free-space value");
  return c;
}

double C_to_lifetime(double c, double gamma_hz) {
  return 1.0 / (2.0 * (1.0 + c) * 2.0 * 3.14159265358979323846 * gamma_hz);
}

double C_to_g(double c, double kappa, double gamma) {
  if (c < 0.0) throw DomainError("cooperativity must be >= 0");
  return std::sqrt(c * kappa * gamma);
}

double C_to_g(double c, const ResonatorParams& p, double gamma) { return C_to_g(c, p.kappa(), gamma); }

double wigner_3j(double j1, double j2, double j3, double m1, double m2, double m3) {
  auto fact = [](double n) { return std::tgamma(n + 1.0); };
  auto is_int = [](double v) { return std::abs(v - std::round(v)) < 1e-9; };
  if (std::abs(m1 + m2 + m3) > 1e-9) return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3) return 0.0;
  if (j3 < std::abs(j1 - j2) - 1e-9 || j3 > j1 + j2 + 1e-9) return 0.0;
  if (!is_int(j1 + j2 + j3)) return 0.0;
  double tri = fact(j1 + j2 - j3) * fact(j1 - j2 + j3) * fact(-j1 + j2 + j3) / fact(j1 + j2 + j3 + 1);
  double pre = std::sqrt(tri * fact(j1 + m1) * fact(j1 - m1) * fact(j2 + m2) * fact(j2 - m2) *
                         fact(j3 + m3) * fact(j3 - m3));
  double kmin = std::max({0.0, j2 - j3 - m1, j1 - j3 + m2});
  double kmax = std::min({j1 + j2 - j3, j1 - m1, j2 + m2});
  double sum = 0.0;
  for (double k = kmin; k <= kmax + 1e-9; k += 1.0) {
    double den = fact(k) * fact(j1 + j2 - j3 - k) * fact(j1 - m1 - k) * fact(j2 + m2 - k) *
                 fact(j3 - j2 + m1 + k) * fact(j3 - j1 - m2 + k);
    sum += (static_cast<long long>(std::llround(k)) % 2 ? -1.0 : 1.0) / den;
  }
  long long phase = std::llround(j1 - j2 - m3);
  return (phase % 2 ? -1.0 : 1.0) * pre * sum;
}

double zeeman_rms_dipole_ratio(int fg, int fe) {
  auto weight = [&](int me, int q) {
    int mg = me + q;
    if (std::abs(mg) > fg) return 0.0;
    double w = wigner_3j(fg, 1, fe, mg, -q, -me);
    return w * w;
  };
  double sum = 0.0;
  for (int me = -fe; me <= fe; ++me) sum += weight(me, 1) + weight(me, -1);
  double mean = sum / (2 * fe + 1);
  double stretched = weight(fe, -1);
  return std::sqrt(mean / stretched);
}

}  // namespace evtrap
