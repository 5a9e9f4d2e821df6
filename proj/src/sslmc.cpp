#include "evtrap/sslmc.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "evtrap/constants.hpp"
#include "evtrap/errors.hpp"
#include "evtrap/format.hpp"
#include "evtrap/parallel.hpp"

namespace evtrap {

namespace {

constexpr double kTurningScanStep = 0.5e-9;

bool in_window(double x, const Window& w) { return x >= w.lo && x <= w.hi; }

// Turning points of a closed orbit at energy e around x0, or nullopt if the
// orbit reaches the surface or the escape boundary.
std::optional<Window> closed_orbit(const PotentialStack& s, HyperfineState f, double x0, double e,
                                   double x_escape) {
  double lo = x0;
  for (;;) {
    double y = lo - kTurningScanStep;
    if (y <= s.surface.x_contact) return std::nullopt;
    lo = y;
    if (total_potential(lo, f, s) > e) break;
  }
  double hi = x0;
  for (;;) {
    double y = hi + kTurningScanStep;
    if (y >= x_escape) return std::nullopt;
    hi = y;
    if (total_potential(hi, f, s) > e) break;
  }
  return Window{lo, hi};
}

double mechanical_energy(const PotentialStack& s, HyperfineState f, double x, double v) {
  x = std::max(x, s.surface.x_contact);
  return 0.5 * s.atom.mass * v * v + total_potential(x, f, s);
}

}  // namespace

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Trapped: return "Trapped";
    case Outcome::SurfaceHit: return "SurfaceHit";
    case Outcome::Reflected: return "Reflected";
  }
  return "?";
}

const char* to_string(LightShiftModel m) {
  switch (m) {
    case LightShiftModel::None: return "none";
    case LightShiftModel::GroundOnly: return "ground_only";
    case LightShiftModel::ScaledExcited: return "scaled_excited";
  }
  return "?";
}

void SimParams::validate(const PotentialStack& stack) const {
  double xc = stack.surface.x_contact;
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(pulse_duration / dt >= 1e3)) throw DomainError("pulse_duration/dt must be at least 1000");
  if (!(trapped_fraction_threshold > 0.0 && trapped_fraction_threshold <= 1.0))
    throw DomainError("trapped_fraction_threshold must lie in (0, 1]");
  if (!(x_start > xc)) throw DomainError("x_start must lie beyond x_contact");
  if (!(x_escape > xc)) throw DomainError("x_escape must lie beyond x_contact");
  if (n_traj < 1) throw DomainError("n_traj must be at least 1");
  if (temperature < 0.0) throw DomainError("temperature must be >= 0");
  if (record_stride < 0) throw DomainError("record_stride must be >= 0");
  if (max_substeps < 1) throw DomainError("max_substeps must be >= 1");
  if (trap_region) {
    if (!(trap_region->lo >= xc && trap_region->lo < trap_region->hi &&
          trap_region->hi < x_escape))
      throw DomainError("trap region must satisfy x_contact <= x_a < x_b < x_escape");
  }
  if (forced_rate && *forced_rate < 0.0) throw DomainError("forced rate must be >= 0");
}

TrapContext make_trap_context(const PotentialStack& stack, const SimParams& params) {
  TrapContext ctx;
  ctx.region = {0.0, -1.0};
  try {
    TrapMetrics m = trap_metrics(stack, HyperfineState::F2);
    ctx.u_min_f2 = m.u_min;
    ctx.x_min_f2 = m.x_min;
    ctx.depth_f2 = m.depth();
    ctx.trap_exists = ctx.depth_f2 > 0.0;
    if (ctx.trap_exists) ctx.region = {stack.surface.x_contact, m.x_outer};
  } catch (const NoMinimum&) {
    ctx.trap_exists = false;
  }
  if (params.trap_region) ctx.region = *params.trap_region;
  return ctx;
}

double saturation_at(double x, const PotentialStack& s) {
  return s.evanescent.i0 / s.atom.i_sat * std::exp(-2.0 * x / s.evanescent.lambda_ev);
}

double effective_detuning(double x, HyperfineState f, const PotentialStack& s,
                          const ScatteringModel& model) {
  double d = s.evanescent.detuning(f, s.atom);
  double scale = 0.0;
  switch (model.light_shift) {
    case LightShiftModel::None: return d;
    case LightShiftModel::GroundOnly: scale = 0.0; break;
    case LightShiftModel::ScaledExcited: scale = model.excited_shift_scale; break;
  }
  double u_ground = tweezer_potential(x, s.tweezer);
  return d + (1.0 - scale) * u_ground / phys::hbar;
}

double scattering_rate(double x, HyperfineState f, const PotentialStack& s,
                       const ScatteringModel& model) {
  double sat = saturation_at(x, s);
  if (sat == 0.0) return 0.0;
  double q = effective_detuning(x, f, s, model) / s.atom.gamma;
  double pref = model.prefactor == RatePrefactor::Gamma ? s.atom.gamma : s.atom.gamma / two_pi;
  return pref * sat / (1.0 + sat + q * q);
}

InitialState sample_initial_state(const SimParams& p, const PotentialStack& s, RngStream& rng) {
  double sigma = std::sqrt(phys::boltzmann * p.temperature / s.atom.mass);
  double v_far = std::abs(p.v_mean + sigma * rng.normal());
  InitialState init;
  init.x = p.x_start;
  init.f = HyperfineState::F1;
  if (p.accelerate_from_far_field) {
    double v2 = v_far * v_far - 2.0 * total_potential(p.x_start, HyperfineState::F1, s) / s.atom.mass;
    init.v = -std::sqrt(std::max(0.0, v2));
  } else {
    init.v = -v_far;
  }
  return init;
}

TrajectoryRecord simulate_trajectory(const InitialState& init, const SimParams& p,
                                     const PotentialStack& s, const TrapContext& ctx,
                                     RngStream& rng) {
  const double m = s.atom.mass;
  const double dt = p.dt;
  const double max_dx = s.evanescent.lambda_ev / 10.0;
  const double xc = s.surface.x_contact;
  const double v_rec = s.atom.recoil_velocity();
  const auto n_steps = static_cast<std::int64_t>(std::llround(p.pulse_duration / dt));

  TrajectoryRecord rec;
  double x = init.x;
  double v = init.v;
  HyperfineState f = init.f;
  double a = p.freeze_motion ? 0.0 : -potential_gradient(x, f, s) / m;
  double hazard = 0.0;
  double hazard_target = rng.exponential();
  bool check_orbit = false;
  std::int64_t n = 0;

  auto jump_rate = [&](double xx, HyperfineState ff) {
    if (p.disable_scattering) return 0.0;
    if (p.forced_rate) return *p.forced_rate;
    if (ff == HyperfineState::F2 && !p.include_back_scatter_to_f1) return 0.0;
    return scattering_rate(xx, ff, s, p.scattering);
  };

  if (p.record_stride > 0) rec.path.push_back({0.0, x, v, f});

  while (n < n_steps) {
    double t = static_cast<double>(n + 1) * dt;
    if (!p.freeze_motion) {
      // Steep regions are crossed in shorter sub-steps so each stays under max_dx.
      double remaining = dt;
      int used = 0;
      bool hit = false;
      while (remaining > 0.0) {
        double h = remaining;
        if (p.max_substeps > 1 && std::abs((v + 0.5 * h * a) * h) > max_dx) {
          while (std::abs((v + 0.5 * h * a) * h) > 0.5 * max_dx) h *= 0.5;
        }
        double vh = v + 0.5 * h * a;
        double dx = vh * h;
        if (x + dx <= xc) {
          x += dx;
          v = vh;
          hit = true;
          break;
        }
        if (std::abs(dx) > max_dx || ++used > p.max_substeps)
          throw StepTooLarge("position step exceeds lambda_ev/10; reduce dt");
        v = vh;
        x += dx;
        remaining = h == remaining ? 0.0 : remaining - h;
        a = -potential_gradient(x, f, s) / m;
        v += 0.5 * h * a;
      }
      if (hit) {
        rec.termination = Termination::Surface;
        ++n;
        break;
      }
    }
    ++n;
    if (x >= p.x_escape && v > 0.0) {
      rec.termination = Termination::Escape;
      break;
    }
    if (in_window(x, ctx.region)) ++rec.steps_in_region;

    double rate = jump_rate(x, f);
    if (rate > 0.0) {
      hazard += rate * dt;
      if (hazard >= hazard_target) {
        hazard = 0.0;
        hazard_target = rng.exponential();
        HyperfineState to =
            rng.uniform() < s.atom.branch_to_f1 ? HyperfineState::F1 : HyperfineState::F2;
        int sign = rng.uniform() < 0.5 ? -1 : 1;
        v += sign * v_rec;
        if (p.recoil == RecoilMode::Double) v += (rng.uniform() < 0.5 ? -1 : 1) * v_rec;
        rec.scatter_events.push_back({t, x, to, sign});
        if (to != f) {
          f = to;
          if (!p.freeze_motion) a = -potential_gradient(x, f, s) / m;
        }
        check_orbit = f == HyperfineState::F2;
      }
    }

    if (p.record_stride > 0 && n % p.record_stride == 0) rec.path.push_back({t, x, v, f});

    if (check_orbit && p.fast_forward && !p.freeze_motion && jump_rate(x, f) == 0.0) {
      check_orbit = false;
      double e = mechanical_energy(s, f, x, v);
      auto orbit = closed_orbit(s, f, x, e, p.x_escape);
      if (orbit) {
        bool inside = orbit->lo >= ctx.region.lo && orbit->hi <= ctx.region.hi;
        bool outside = orbit->hi < ctx.region.lo || orbit->lo > ctx.region.hi;
        if (inside || outside) {
          if (inside) rec.steps_in_region += n_steps - n;
          rec.fast_forwarded = true;
          rec.energy = e;
          n = n_steps;
          break;
        }
      }
    }
  }

  rec.steps = n;
  rec.end_time = static_cast<double>(n) * dt;
  rec.time_in_trap_region = static_cast<double>(rec.steps_in_region) * dt;
  rec.x_final = x;
  rec.v_final = v;
  rec.f_final = f;
  if (!rec.fast_forwarded) rec.energy = mechanical_energy(s, f, x, v);
  rec.energy_rel_f2_min = rec.energy - ctx.u_min_f2;
  if (p.record_stride > 0 && (rec.path.empty() || rec.path.back().t != rec.end_time))
    rec.path.push_back({rec.end_time, x, v, f});
  rec.outcome = classify_outcome(rec, p);
  return rec;
}

TrajectoryRecord simulate_trajectory(const InitialState& init, const SimParams& p,
                                     const PotentialStack& s, RngStream& rng) {
  return simulate_trajectory(init, p, s, make_trap_context(s, p), rng);
}

Outcome classify_outcome(const TrajectoryRecord& rec, const SimParams& p) {
  if (rec.termination == Termination::Surface) return Outcome::SurfaceHit;
  if (rec.termination == Termination::Escape) return Outcome::Reflected;
  double need = p.trapped_fraction_threshold * p.pulse_duration;
  if (rec.time_in_trap_region >= need * (1.0 - 1e-12)) return Outcome::Trapped;
  return Outcome::Reflected;
}

Interval wilson_interval(std::int64_t k, std::int64_t n, double z) {
  if (n <= 0) return {0.0, 1.0};
  double nn = static_cast<double>(n);
  double ph = static_cast<double>(k) / nn;
  double z2 = z * z;
  double denom = 1.0 + z2 / nn;
  double center = (ph + z2 / (2.0 * nn)) / denom;
  double half = z * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {k == 0 ? 0.0 : std::max(0.0, center - half), k == n ? 1.0 : std::min(1.0, center + half)};
}

CellStats reduce_cell(const std::vector<TrajectorySummary>& trajs, const TrapContext& ctx) {
  CellStats c;
  c.n = static_cast<std::int64_t>(trajs.size());
  double esum = 0.0;
  for (const auto& t : trajs) {
    switch (t.outcome) {
      case Outcome::Trapped:
        ++c.trapped;
        esum += t.energy_rel;
        break;
      case Outcome::SurfaceHit: ++c.surface; break;
      case Outcome::Reflected: ++c.reflected; break;
    }
  }
  if (c.n > 0) {
    double nn = static_cast<double>(c.n);
    c.trapped_fraction = c.trapped / nn;
    c.surface_fraction = c.surface / nn;
    c.reflected_fraction = c.reflected / nn;
  }
  c.trapped_ci = wilson_interval(c.trapped, c.n);
  c.surface_ci = wilson_interval(c.surface, c.n);
  c.reflected_ci = wilson_interval(c.reflected, c.n);
  c.trap_depth_f2 = ctx.trap_exists ? ctx.depth_f2 : 0.0;
  c.x_min_f2 = ctx.trap_exists ? ctx.x_min_f2 : 0.0;
  c.trap_destroyed = !ctx.trap_exists;
  if (c.trapped > 0 && ctx.depth_f2 > 0.0)
    c.mean_energy_over_depth = esum / static_cast<double>(c.trapped) / ctx.depth_f2;
  return c;
}

namespace {

struct CellJob {
  PotentialStack stack;
  SimParams params;
  TrapContext ctx;
};

std::vector<CellStats> run_cells(const std::vector<CellJob>& jobs, int threads) {
  std::vector<std::size_t> offset(jobs.size() + 1, 0);
  for (std::size_t c = 0; c < jobs.size(); ++c)
    offset[c + 1] = offset[c] + static_cast<std::size_t>(jobs[c].params.n_traj);
  std::vector<TrajectorySummary> results(offset.back());

  parallel_for(results.size(), threads, [&](std::size_t item) {
    std::size_t c = static_cast<std::size_t>(
        std::upper_bound(offset.begin(), offset.end(), item) - offset.begin() - 1);
    std::size_t k = item - offset[c];
    const CellJob& job = jobs[c];
    RngStream rng = RngStream::keyed(job.params.seed, c, k);
    InitialState init = sample_initial_state(job.params, job.stack, rng);
    TrajectoryRecord rec = simulate_trajectory(init, job.params, job.stack, job.ctx, rng);
    results[item] = {rec.outcome, rec.energy_rel_f2_min};
  });

  std::vector<CellStats> out;
  out.reserve(jobs.size());
  for (std::size_t c = 0; c < jobs.size(); ++c) {
    std::vector<TrajectorySummary> cell(results.begin() + static_cast<std::ptrdiff_t>(offset[c]),
                                        results.begin() + static_cast<std::ptrdiff_t>(offset[c + 1]));
    out.push_back(reduce_cell(cell, jobs[c].ctx));
  }
  return out;
}

}  // namespace

CellStats run_ensemble(const SimParams& params, const PotentialStack& stack, int threads,
                       std::uint64_t cell_index) {
  stack.validate();
  params.validate(stack);
  TrapContext ctx = make_trap_context(stack, params);
  std::vector<TrajectorySummary> results(static_cast<std::size_t>(params.n_traj));
  parallel_for(results.size(), threads, [&](std::size_t k) {
    RngStream rng = RngStream::keyed(params.seed, cell_index, k);
    InitialState init = sample_initial_state(params, stack, rng);
    TrajectoryRecord rec = simulate_trajectory(init, params, stack, ctx, rng);
    results[k] = {rec.outcome, rec.energy_rel_f2_min};
  });
  return reduce_cell(results, ctx);
}

PhaseDiagram scan_detuning_intensity(const std::vector<double>& det_grid,
                                     const std::vector<double>& sat_grid, const SimParams& params,
                                     const PotentialStack& tmpl, int threads) {
  if (det_grid.empty() || sat_grid.empty()) throw DomainError("scan grids must be non-empty");
  tmpl.validate();
  params.validate(tmpl);
  PhaseDiagram pd;
  pd.kind = "detuning_saturation";
  pd.rows = {"saturation", "I0/Isat", sat_grid};
  pd.cols = {"detuning", "MHz", {}};
  for (double d : det_grid) pd.cols.values.push_back(ordinary(d) / MHz);

  std::vector<CellJob> jobs;
  for (double sat : sat_grid) {
    for (double det : det_grid) {
      CellJob job{tmpl, params, {}};
      job.stack.evanescent.i0 = sat * tmpl.atom.i_sat;
      job.stack.evanescent.detuning_f1 = det;
      jobs.push_back(std::move(job));
    }
  }
  parallel_for(jobs.size(), threads,
               [&](std::size_t c) { jobs[c].ctx = make_trap_context(jobs[c].stack, jobs[c].params); });
  pd.cells = run_cells(jobs, threads);
  return pd;
}

PhaseDiagram scan_velocity_detuning(const std::vector<double>& v_grid,
                                    const std::vector<double>& det_grid, double saturation,
                                    const SimParams& params, const PotentialStack& tmpl,
                                    int threads) {
  if (v_grid.empty() || det_grid.empty()) throw DomainError("scan grids must be non-empty");
  tmpl.validate();
  params.validate(tmpl);
  PhaseDiagram pd;
  pd.kind = "velocity_detuning";
  pd.rows = {"velocity", "m/s", v_grid};
  pd.cols = {"detuning", "MHz", {}};
  for (double d : det_grid) pd.cols.values.push_back(ordinary(d) / MHz);

  std::vector<CellJob> jobs;
  for (double v : v_grid) {
    for (double det : det_grid) {
      CellJob job{tmpl, params, {}};
      job.stack.evanescent.i0 = saturation * tmpl.atom.i_sat;
      job.stack.evanescent.detuning_f1 = det;
      job.params.v_mean = v;
      jobs.push_back(std::move(job));
    }
  }
  parallel_for(jobs.size(), threads,
               [&](std::size_t c) { jobs[c].ctx = make_trap_context(jobs[c].stack, jobs[c].params); });
  pd.cells = run_cells(jobs, threads);
  return pd;
}

void write_phase_csv(std::ostream& os, const PhaseDiagram& pd) {
  os << pd.rows.name << "," << pd.cols.name
     << ",n,trapped,surface,reflected,trapped_fraction,surface_fraction,reflected_fraction,"
        "trapped_ci_lo,trapped_ci_hi,surface_ci_lo,surface_ci_hi,reflected_ci_lo,reflected_ci_hi,"
        "mean_energy_over_depth,trap_depth_f2_MHz,x_min_f2_nm,trap_destroyed\n";
  for (std::size_t i = 0; i < pd.rows.values.size(); ++i) {
    for (std::size_t j = 0; j < pd.cols.values.size(); ++j) {
      const CellStats& c = pd.at(i, j);
      os << fmt(pd.rows.values[i]) << "," << fmt(pd.cols.values[j]) << "," << c.n << ","
         << c.trapped << "," << c.surface << "," << c.reflected << "," << fmt(c.trapped_fraction)
         << "," << fmt(c.surface_fraction) << "," << fmt(c.reflected_fraction) << ","
         << fmt(c.trapped_ci.lo) << "," << fmt(c.trapped_ci.hi) << "," << fmt(c.surface_ci.lo)
         << "," << fmt(c.surface_ci.hi) << "," << fmt(c.reflected_ci.lo) << ","
         << fmt(c.reflected_ci.hi) << ","
         << (c.mean_energy_over_depth ? fmt(*c.mean_energy_over_depth) : std::string())
         << "," << fmt(hz_from_energy(c.trap_depth_f2) / MHz) << "," << fmt(c.x_min_f2 / nm) << ","
         << (c.trap_destroyed ? 1 : 0) << "\n";
    }
  }
}

std::string phase_summary_json(const PhaseDiagram& pd) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["kind"] = pd.kind;
  j["rows"] = {{"name", pd.rows.name}, {"unit", pd.rows.unit}, {"values", pd.rows.values}};
  j["cols"] = {{"name", pd.cols.name}, {"unit", pd.cols.unit}, {"values", pd.cols.values}};

  std::size_t nr = pd.rows.values.size(), nc = pd.cols.values.size();
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j2 = 0; j2 < nc; ++j2)
      if (pd.at(i, j2).trapped_fraction > pd.at(bi, bj).trapped_fraction) {
        bi = i;
        bj = j2;
      }
  const CellStats& best = pd.at(bi, bj);
  ordered_json opt;
  opt[pd.rows.name] = pd.rows.values[bi];
  opt[pd.cols.name] = pd.cols.values[bj];
  opt["trapped_fraction"] = best.trapped_fraction;
  opt["trapped_ci"] = {best.trapped_ci.lo, best.trapped_ci.hi};
  if (best.mean_energy_over_depth)
    opt["mean_energy_over_depth"] = *best.mean_energy_over_depth;
  else
    opt["mean_energy_over_depth"] = nullptr;
  opt["trap_depth_f2_MHz"] = hz_from_energy(best.trap_depth_f2) / MHz;
  j["optimum"] = opt;

  std::vector<double> row_max(nr, 0.0), col_max(nc, 0.0);
  std::int64_t destroyed = 0;
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j2 = 0; j2 < nc; ++j2) {
      const CellStats& c = pd.at(i, j2);
      row_max[i] = std::max(row_max[i], c.trapped_fraction);
      col_max[j2] = std::max(col_max[j2], c.trapped_fraction);
      if (c.trap_destroyed) ++destroyed;
    }
  j["marginals"] = {{"max_trapped_by_" + pd.rows.name, row_max},
                    {"max_trapped_by_" + pd.cols.name, col_max}};
  j["trap_destroyed_cells"] = destroyed;
  return j.dump(2) + "\n";
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  os << "t_us,x_nm,v_m_per_s,state\n";
  for (const auto& p : rec.path)
    os << fmt(p.t / 1e-6) << "," << fmt(p.x / nm) << "," << fmt(p.v) << "," << to_string(p.f)
       << "\n";
}

PowerChain power_to_saturation(double p_in, double detuning, const ResonatorParams& res,
                               double input_loss, const AtomSpecies& atom) {
  if (p_in < 0.0) throw DomainError("input power must be >= 0");
  res.validate();
  PowerChain out;
  double kappa = res.kappa();
  out.finesse = finesse(res.fsr, kappa);
  double q = ordinary(detuning) / kappa;
  out.p_circ = p_in * input_loss * (out.finesse / pi) / (1.0 + q * q);
  out.intensity = out.p_circ / res.mode_area;
  out.saturation = out.intensity / atom.i_sat;
  return out;
}

}  // namespace evtrap
