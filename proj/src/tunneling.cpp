#include "evtrap/tunneling.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "evtrap/constants.hpp"
#include "evtrap/errors.hpp"
#include "evtrap/lsq.hpp"
#include "evtrap/parallel.hpp"

namespace evtrap {

namespace {

constexpr double kScanStep = 0.25e-9;

// First sub-interval of [from, to] (either direction) where U - e changes sign
// relative to its value at `from`.
std::optional<std::pair<double, double>> scan_crossing(const Potential1D& u, double e, double from,
                                                       double to) {
  double span = to - from;
  int n = std::max(4, static_cast<int>(std::ceil(std::abs(span) / kScanStep)));
  double prev = from;
  bool above = u(from) > e;
  for (int i = 1; i <= n; ++i) {
    double x = (i == n) ? to : from + span * i / n;
    if ((u(x) > e) != above) return std::make_pair(prev, x);
    prev = x;
  }
  return std::nullopt;
}

double require_crossing(const Potential1D& u, double e, double from, double to, const char* what) {
  auto br = scan_crossing(u, e, from, to);
  if (!br) throw DomainError(what);
  return turning_point(u, e, br->first, br->second);
}

template <class F>
double integrate_pi(F&& g, double rel_tol) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(g, 0.0, pi, 20, rel_tol);
}

}  // namespace

double turning_point(const Potential1D& u, double e, double lo, double hi) {
  auto g = [&](double x) { return u(x) - e; };
  double glo = g(lo), ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if ((glo > 0.0) == (ghi > 0.0)) throw DomainError("turning point is not bracketed");
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(g, std::min(lo, hi), std::max(lo, hi),
                                             lo < hi ? glo : ghi, lo < hi ? ghi : glo,
                                             boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

// x = a + (b - a)(1 - cos t)/2 puts the square-root endpoint behaviour into
// the sin t Jacobian, so the integrands below stay smooth on [0, pi].
double wkb_action(const Potential1D& u, double mass, double e, double a, double b,
                  double rel_tol) {
  double half = 0.5 * (b - a);
  auto g = [&](double t) {
    double x = a + half * (1.0 - std::cos(t));
    double d = u(x) - e;
    if (d <= 0.0) return 0.0;
    return std::sqrt(2.0 * mass * d) / phys::hbar * half * std::sin(t);
  };
  return integrate_pi(g, rel_tol);
}

double classical_period(const Potential1D& u, double mass, double e, double a, double b,
                        double rel_tol) {
  double half = 0.5 * (b - a);
  auto g = [&](double t) {
    double s = std::sin(t);
    double x = a + half * (1.0 - std::cos(t));
    double d = e - u(x);
    if (d <= 0.0) return 0.0;
    return half * s / std::sqrt(2.0 * d / mass);
  };
  return 2.0 * integrate_pi(g, rel_tol);
}

WkbResult wkb_tunneling_time(const PotentialStack& stack, HyperfineState f, double delta_e,
                             const WkbOptions& opts) {
  TrapMetrics m = trap_metrics(stack, f);
  Potential1D u = [&](double x) { return total_potential(x, f, stack); };
  const double mass = stack.atom.mass;
  const double xc = stack.surface.x_contact;
  const bool surface = opts.side == EscapeSide::Surface;

  double barrier = surface ? m.barrier_to_surface : m.depth_to_vacuum;
  if (!(barrier > 0.0)) throw NoBarrier("trap barrier is absent");
  double xb = surface ? m.x_barrier : m.x_outer;
  // The other side of the well must hold the atom at this energy.
  double x_other = surface ? m.x_outer : m.x_barrier;

  WkbResult r;
  r.u_barrier = m.u_min + barrier;
  r.x_barrier = xb;
  r.delta_e = delta_e;
  r.energy = r.u_barrier + delta_e;
  if (!(r.energy > m.u_min)) throw DomainError("energy lies below the trap minimum");
  if (!(u(x_other) > r.energy)) throw DomainError("energy lies above the opposite barrier");

  r.x_turn_far = require_crossing(u, r.energy, m.x_min, x_other, "no turning point in the well");

  if (delta_e >= 0.0) {
    r.above_barrier = true;
    double e = r.energy;
    if (delta_e == 0.0) e += 1e-9 * barrier;
    r.energy = e;
    r.period = classical_period(u, mass, e, std::min(xb, r.x_turn_far), std::max(xb, r.x_turn_far),
                                opts.rel_tol);
    r.time = 0.5 * r.period;
    r.attempt_frequency = 1.0 / r.period;
    r.transmission = 1.0;
    r.x_tunnel_in = r.x_tunnel_out = xb;
    return r;
  }

  r.x_tunnel_in = require_crossing(u, r.energy, xb, m.x_min, "no turning point below the barrier");
  if (surface) {
    auto br = scan_crossing(u, r.energy, xb, xc);
    r.x_tunnel_out = br ? turning_point(u, r.energy, br->first, br->second) : xc;
  } else {
    r.x_tunnel_out = require_crossing(u, r.energy, xb, xb + 0.5 * stack.tweezer.wavelength,
                                      "no classically allowed region beyond the outer barrier");
  }

  r.action = wkb_action(u, mass, r.energy, std::min(r.x_tunnel_in, r.x_tunnel_out),
                        std::max(r.x_tunnel_in, r.x_tunnel_out), opts.rel_tol);
  r.transmission = std::exp(-2.0 * r.action);
  r.period = classical_period(u, mass, r.energy, std::min(r.x_tunnel_in, r.x_turn_far),
                              std::max(r.x_tunnel_in, r.x_turn_far), opts.rel_tol);
  r.attempt_frequency =
      opts.attempt == AttemptFrequency::Harmonic ? m.freq_x : 1.0 / r.period;
  r.time = std::exp(2.0 * r.action) / r.attempt_frequency;
  return r;
}

std::vector<WkbResult> wkb_sweep(const PotentialStack& stack, HyperfineState f,
                                 const std::vector<double>& delta_e, const WkbOptions& opts,
                                 int threads) {
  std::vector<WkbResult> out(delta_e.size());
  parallel_for(delta_e.size(), threads,
               [&](std::size_t i) { out[i] = wkb_tunneling_time(stack, f, delta_e[i], opts); });
  return out;
}

std::vector<double> survival_from_lifetimes(const std::vector<double>& lifetimes,
                                            const std::vector<double>& weights,
                                            const std::vector<double>& tau_grid) {
  if (lifetimes.size() != weights.size()) throw DomainError("lifetimes and weights differ in size");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::vector<double> s(tau_grid.size(), 0.0);
  if (!(wsum > 0.0)) return s;
  for (std::size_t k = 0; k < tau_grid.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < lifetimes.size(); ++i)
      acc += weights[i] * std::exp(-tau_grid[k] / lifetimes[i]);
    s[k] = acc / wsum;
  }
  return s;
}

SurvivalCurve survival_curve(const std::vector<WeightedEnergy>& samples,
                             const std::vector<double>& tau_grid, const PotentialStack& stack,
                             HyperfineState f, const WkbOptions& opts, int threads) {
  std::vector<std::optional<double>> times(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    try {
      WkbResult r = wkb_tunneling_time(stack, f, samples[i].delta_e, opts);
      times[i] = r.time;
    } catch (const Error&) {
      times[i].reset();
    }
  });
  SurvivalCurve out;
  out.tau = tau_grid;
  std::vector<double> w;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (times[i] && samples[i].delta_e < 0.0) {
      out.lifetimes.push_back(*times[i]);
      w.push_back(samples[i].weight);
    } else {
      ++out.n_excluded;
    }
  }
  out.survival = survival_from_lifetimes(out.lifetimes, w, tau_grid);
  return out;
}

LogDecayFit fit_log_decay(const std::vector<double>& tau, const std::vector<double>& s) {
  const std::size_t n = tau.size();
  if (n != s.size()) throw DomainError("tau and survival differ in size");
  if (n < 4) throw DomainError("log-decay fit needs at least 4 points");
  for (double t : tau)
    if (!(t > 0.0)) throw DomainError("tau must be positive");
  double smin = *std::min_element(s.begin(), s.end());
  double smax = *std::max_element(s.begin(), s.end());
  if (smax - smin <= 1e-12 * std::max(1.0, std::abs(smax)))
    throw FitDegenerate("survival data are constant");

  double tmin = *std::min_element(tau.begin(), tau.end());
  double tmax = *std::max_element(tau.begin(), tau.end());

  // Linear amplitude profiled out on a grid in log b.
  auto profile = [&](double logb, double& amp) {
    double b = std::exp(logb), sgg = 0.0, sgy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double g = std::log1p(b / tau[i]);
      sgg += g * g;
      sgy += g * s[i];
    }
    amp = sgg > 0.0 ? sgy / sgg : 0.0;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = amp * std::log1p(b / tau[i]) - s[i];
      rss += d * d;
    }
    return rss;
  };
  const double lo = std::log(tmin) - 12.0, hi = std::log(tmax) + 12.0;
  const int grid = 480;
  int best = 0;
  double best_rss = 0.0, amp = 0.0;
  for (int k = 0; k <= grid; ++k) {
    double a;
    double rss = profile(lo + (hi - lo) * k / grid, a);
    if (k == 0 || rss < best_rss) {
      best_rss = rss;
      best = k;
    }
  }
  if (best == 0 || best == grid) throw FitDegenerate("log-decay scale b is unbounded");
  double logb0 = lo + (hi - lo) * best / grid;
  profile(logb0, amp);

  ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    double b = std::exp(p[1]);
    for (std::size_t i = 0; i < n; ++i) r[i] = p[0] * std::log1p(b / tau[i]) - s[i];
  };
  Eigen::VectorXd p0(2);
  p0 << amp, logb0;
  LsqResult fit = least_squares(fn, static_cast<int>(n), p0);
  if (fit.rank < 2 || !std::isfinite(fit.params[1]) || fit.params[1] < lo - 1.0 ||
      fit.params[1] > hi + 1.0)
    throw FitDegenerate("log-decay fit did not converge to a bounded b");

  LogDecayFit out;
  out.amplitude = fit.params[0];
  out.b = std::exp(fit.params[1]);
  out.residual_rms = fit.rms();
  out.sigma_amplitude = std::sqrt(std::max(0.0, fit.covariance(0, 0)));
  out.sigma_b = out.b * std::sqrt(std::max(0.0, fit.covariance(1, 1)));
  return out;
}

double recoil_photon_budget(double delta_e, const AtomSpecies& atom) {
  if (!(delta_e < 0.0)) throw DomainError("recoil budget needs an energy below the barrier");
  return std::abs(delta_e) / (2.0 * atom.recoil_energy());
}

}  // namespace evtrap
