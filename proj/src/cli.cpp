#include "evtrap/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evtrap/config.hpp"
#include "evtrap/constants.hpp"
#include "evtrap/errors.hpp"
#include "evtrap/format.hpp"
#include "evtrap/parallel.hpp"
#include "evtrap/svg.hpp"

namespace evtrap {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Options {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> traj;
  int dump = 0;
  bool svg = false;
  std::string subcommand;
  std::vector<std::string> inputs;
};

class Run {
public:
  Run(const Options& o, std::ostream& out) : opts_(o), out_(out) {
    std::error_code ec;
    fs::create_directories(o.out_dir, ec);
    if (ec || !fs::is_directory(o.out_dir)) throw IoError("cannot create output directory: " + o.out_dir);
  }

  void write(const std::string& name, const std::string& content) {
    fs::path p = fs::path(opts_.out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << content;
    f.close();
    if (!f) throw IoError("failed writing " + p.string());
    outputs_.push_back(name);
    out_ << "wrote " << p.string() << "\n";
  }

  void note_output(const std::string& name) { outputs_.push_back(name); }

  void manifest(const std::string& command, const Config& cfg, std::optional<std::uint64_t> seed) {
    ordered_json m;
    m["tool"] = "evtrap";
    m["version"] = kVersion;
    m["command"] = command;
    m["inputs"] = opts_.inputs;
    m["config_source"] = cfg.source;
    m["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
    m["config"] = ordered_json::parse(config_to_json(cfg));
    m["outputs"] = outputs_;
    fs::path p = fs::path(opts_.out_dir) / "manifest.json";
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << m.dump(2) << "\n";
  }

  const Options& opts() const { return opts_; }
  std::ostream& out() { return out_; }

private:
  const Options& opts_;
  std::ostream& out_;
  std::vector<std::string> outputs_;
};

double mhz(double energy) { return hz_from_energy(energy) / MHz; }

std::string jdump(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json num_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

int thread_count(const Options& o) {
  if (o.threads) return std::max(1, *o.threads);
  if (const char* env = std::getenv("EVTRAP_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw ConfigError(std::string("EVTRAP_THREADS must be a positive integer, got '") + env + "'");
  }
  return resolve_threads(0);
}

Config load(const Options& o) {
  Config cfg = o.config.empty() ? Config{} : load_config(o.config);
  if (o.seed) {
    cfg.scan.sim.seed = *o.seed;
    cfg.tags.survival.seed = *o.seed;
  }
  if (o.traj) {
    if (*o.traj < 1) throw ConfigError("--traj must be at least 1");
    cfg.scan.sim.n_traj = *o.traj;
  }
  return cfg;
}

struct PreparedStack {
  PotentialStack stack;
  std::optional<CalibrationResult> calibration;
};

PreparedStack prepare_stack(const Config& cfg) {
  const PotentialConfig& pc = cfg.potential;
  if (!(pc.stack.surface.c3 > 0.0))
    throw ConfigError((cfg.source.empty() ? std::string("<defaults>") : cfg.source) +
                      ": [potential] c3_hz_um3 is required");
  PreparedStack ps;
  ps.stack = pc.stack;
  ps.stack.validate();
  if (pc.calibrate) {
    PotentialStack tmpl = ps.stack;
    tmpl.evanescent.i0 = 0.0;
    CalibrationResult cal = calibrate_tweezer(pc.targets, tmpl);
    ps.stack.tweezer = cal.stack.tweezer;
    ps.calibration = cal;
  }
  return ps;
}

ordered_json metrics_json(const PotentialStack& stack, HyperfineState f) {
  try {
    TrapMetrics m = trap_metrics(stack, f);
    return {{"x_min_nm", m.x_min / nm},
            {"u_min_MHz", mhz(m.u_min)},
            {"depth_MHz", mhz(m.depth())},
            {"barrier_to_surface_MHz", mhz(m.barrier_to_surface)},
            {"depth_to_vacuum_MHz", mhz(m.depth_to_vacuum)},
            {"freq_x_kHz", m.freq_x / 1e3},
            {"x_barrier_nm", m.x_barrier / nm},
            {"x_outer_nm", m.x_outer / nm}};
  } catch (const NoMinimum& e) {
    return {{"error", "NoMinimum"}, {"message", e.what()}};
  }
}

// ---- potential ----

void cmd_potential(Run& run, const Config& cfg) {
  PreparedStack ps = prepare_stack(cfg);
  const PotentialStack& st = ps.stack;
  const PotentialConfig& pc = cfg.potential;

  // The trapped state must have a minimum; this raises NoMinimum otherwise.
  TrapMetrics m2 = trap_metrics(st, HyperfineState::F2);

  std::ostringstream csv;
  csv << "x_nm,U_F1_MHz,U_F2_MHz,evanescent_F1_MHz,evanescent_F2_MHz,tweezer_MHz,casimir_polder_MHz,gravity_MHz\n";
  auto n = static_cast<long>(std::llround((pc.profile_hi - pc.profile_lo) / pc.profile_step));
  Series s1{"F1", {}, {}}, s2{"F2", {}, {}};
  for (long i = 0; i <= n; ++i) {
    double x = pc.profile_lo + static_cast<double>(i) * pc.profile_step;
    PotentialTerms t1 = potential_terms(x, HyperfineState::F1, st);
    PotentialTerms t2 = potential_terms(x, HyperfineState::F2, st);
    csv << fmt(x / nm) << ',' << fmt(mhz(t1.total())) << ',' << fmt(mhz(t2.total())) << ','
        << fmt(mhz(t1.evanescent)) << ',' << fmt(mhz(t2.evanescent)) << ',' << fmt(mhz(t2.tweezer)) << ','
        << fmt(mhz(t2.casimir_polder)) << ',' << fmt(mhz(t2.gravity)) << '\n';
    s1.x.push_back(x / nm);
    s1.y.push_back(mhz(t1.total()));
    s2.x.push_back(x / nm);
    s2.y.push_back(mhz(t2.total()));
  }
  run.write("potential_profile.csv", csv.str());

  ordered_json j;
  if (ps.calibration) {
    j["calibration"] = {{"u_inc_MHz", mhz(ps.calibration->u_inc)},
                        {"phi_refl", ps.calibration->phi_refl},
                        {"residual", ps.calibration->residual}};
  } else {
    j["calibration"] = nullptr;
  }
  j["tweezer"] = {{"wavelength_nm", st.tweezer.wavelength / nm},
                  {"u_inc_MHz", mhz(st.tweezer.u_inc)},
                  {"reflectivity", st.tweezer.r_refl},
                  {"phi_refl", st.tweezer.phi_refl}};
  j["F1"] = metrics_json(st, HyperfineState::F1);
  j["F2"] = metrics_json(st, HyperfineState::F2);
  run.write("potential_metrics.json", jdump(j));

  std::vector<double> waves = pc.sweep_wavelength_nm.values();
  if (!waves.empty()) {
    std::ostringstream sw;
    sw << "wavelength_nm,x_min_nm,depth_MHz,freq_x_kHz,status\n";
    Series sx{"x_min", {}, {}};
    for (double w : waves) {
      PotentialStack s = st;
      s.tweezer.wavelength = w * nm;
      try {
        TrapMetrics m = trap_metrics(s, HyperfineState::F2);
        sw << fmt(w) << ',' << fmt(m.x_min / nm) << ',' << fmt(mhz(m.depth())) << ',' << fmt(m.freq_x / 1e3)
           << ",ok\n";
        sx.x.push_back(w);
        sx.y.push_back(m.x_min / nm);
      } catch (const NoMinimum&) {
        sw << fmt(w) << ",nan,nan,nan,no_minimum\n";
      }
    }
    run.write("potential_sweep.csv", sw.str());
    if (run.opts().svg)
      run.write("potential_sweep.svg",
                svg_line_plot({sx}, {"Trap minimum vs tweezer wavelength", "wavelength (nm)", "x_min (nm)"}));
  }
  if (run.opts().svg)
    run.write("potential_profile.svg",
              svg_line_plot({s1, s2}, {"Potential", "x (nm)", "U/h (MHz)"}));
  run.out() << "F2 trap: x_min " << fmt(m2.x_min / nm, 6) << " nm, depth " << fmt(mhz(m2.depth()), 6)
            << " MHz, freq_x " << fmt(m2.freq_x / 1e3, 6) << " kHz\n";
}

// ---- scan ----

void cmd_scan(Run& run, const Config& cfg, int threads) {
  PreparedStack ps = prepare_stack(cfg);
  const ScanConfig& sc = cfg.scan;
  std::vector<double> det;
  for (double d : sc.detuning_mhz.values()) det.push_back(angular(d * MHz));
  PhaseDiagram pd;
  if (sc.kind == "velocity_detuning") {
    std::vector<double> v = sc.velocity.values();
    if (v.empty() || det.empty()) throw ConfigError("[scan] grids must be non-empty");
    pd = scan_velocity_detuning(v, det, sc.velocity_saturation, sc.sim, ps.stack, threads);
  } else {
    std::vector<double> sat = sc.saturation.values();
    if (sat.empty() || det.empty()) throw ConfigError("[scan] grids must be non-empty");
    pd = scan_detuning_intensity(det, sat, sc.sim, ps.stack, threads);
  }
  pd.cols.values = sc.detuning_mhz.values();
  std::ostringstream csv;
  write_phase_csv(csv, pd);
  run.write("scan.csv", csv.str());
  run.write("scan_summary.json", phase_summary_json(pd) + "\n");

  std::size_t best = 0;
  for (std::size_t c = 1; c < pd.cells.size(); ++c)
    if (pd.cells[c].trapped_fraction > pd.cells[best].trapped_fraction) best = c;

  if (run.opts().dump > 0) {
    std::size_t ncols = pd.cols.values.size();
    std::size_t bi = best / ncols, bj = best % ncols;
    PotentialStack s = ps.stack;
    SimParams p = sc.sim;
    s.evanescent.detuning_f1 = det[bj];
    if (pd.kind == "velocity_detuning") {
      s.evanescent.i0 = sc.velocity_saturation * s.atom.i_sat;
      p.v_mean = pd.rows.values[bi];
    } else {
      s.evanescent.i0 = pd.rows.values[bi] * s.atom.i_sat;
    }
    if (p.record_stride == 0) p.record_stride = 100;
    TrapContext ctx = make_trap_context(s, p);
    int nd = std::min(run.opts().dump, p.n_traj);
    for (int k = 0; k < nd; ++k) {
      RngStream rng = RngStream::keyed(p.seed, best, static_cast<std::uint64_t>(k));
      InitialState init = sample_initial_state(p, s, rng);
      TrajectoryRecord rec = simulate_trajectory(init, p, s, ctx, rng);
      std::ostringstream t;
      write_trajectory_csv(t, rec);
      run.write("trajectory_" + std::to_string(k) + ".csv", t.str());
    }
  }

  if (run.opts().svg) {
    std::vector<double> v;
    for (const auto& c : pd.cells) v.push_back(c.trapped_fraction);
    run.write("scan_trapped.svg",
              svg_heatmap(v, pd.rows.values.size(), pd.cols.values.size(), pd.rows.values, pd.cols.values,
                          {"Trapped fraction", pd.cols.name + " (" + pd.cols.unit + ")",
                           pd.rows.name + " (" + pd.rows.unit + ")"},
                          0.0, std::max(1e-12, pd.cells[best].trapped_fraction)));
  }
  const CellStats& b = pd.cells[best];
  run.out() << "best cell: trapped fraction " << fmt(b.trapped_fraction, 4) << " at "
            << pd.rows.name << " = " << fmt(pd.rows.values[best / pd.cols.values.size()], 6) << ", "
            << pd.cols.name << " = " << fmt(pd.cols.values[best % pd.cols.values.size()], 6) << " MHz\n";
}

// ---- tunneling ----

const char* error_name(const Error& e) {
  if (dynamic_cast<const NoBarrier*>(&e)) return "no_barrier";
  if (dynamic_cast<const NoMinimum*>(&e)) return "no_minimum";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  return "error";
}

void cmd_tunneling(Run& run, const Config& cfg, int threads) {
  PreparedStack ps = prepare_stack(cfg);
  const TunnelingConfig& tc = cfg.tunneling;
  std::vector<double> de = tc.delta_e_mhz.values();
  if (de.empty()) throw ConfigError("[tunneling] delta_e_mhz grid is empty");

  std::vector<std::optional<WkbResult>> res(de.size());
  std::vector<std::string> status(de.size(), "ok");
  parallel_for(de.size(), threads, [&](std::size_t i) {
    try {
      res[i] = wkb_tunneling_time(ps.stack, tc.state, energy_from_hz(de[i] * MHz), tc.wkb);
    } catch (const Error& e) {
      status[i] = error_name(e);
    }
  });
  std::ostringstream csv;
  csv << "delta_e_MHz,time_s,action,transmission,period_s,attempt_frequency_Hz,above_barrier,status\n";
  Series st{"tunneling time", {}, {}};
  for (std::size_t i = 0; i < de.size(); ++i) {
    csv << fmt(de[i]) << ',';
    if (res[i]) {
      const WkbResult& r = *res[i];
      csv << fmt(r.time) << ',' << fmt(r.action) << ',' << fmt(r.transmission) << ',' << fmt(r.period) << ','
          << fmt(r.attempt_frequency) << ',' << (r.above_barrier ? 1 : 0) << ",ok\n";
      st.x.push_back(de[i]);
      st.y.push_back(r.time);
    } else {
      csv << "nan,nan,nan,nan,nan,0," << status[i] << '\n';
    }
  }
  run.write("tunneling_sweep.csv", csv.str());

  std::vector<WeightedEnergy> samples;
  for (double d : de) samples.push_back({energy_from_hz(d * MHz), 1.0});
  std::vector<double> tau = tc.survival_tau_s.values();
  SurvivalCurve sv = survival_curve(samples, tau, ps.stack, tc.state, tc.wkb, threads);
  std::ostringstream scsv;
  scsv << "tau_s,survival\n";
  for (std::size_t k = 0; k < tau.size(); ++k) scsv << fmt(tau[k]) << ',' << fmt(sv.survival[k]) << '\n';
  run.write("tunneling_survival.csv", scsv.str());

  ordered_json j;
  j["state"] = to_string(tc.state);
  j["side"] = tc.wkb.side == EscapeSide::Surface ? "surface" : "outer";
  j["metrics"] = metrics_json(ps.stack, tc.state);
  j["n_energies"] = de.size();
  j["n_excluded"] = sv.n_excluded;
  double tmin = INFINITY, tmax = 0.0;
  for (const auto& r : res)
    if (r && !r->above_barrier) {
      tmin = std::min(tmin, r->time);
      tmax = std::max(tmax, r->time);
    }
  j["time_range_s"] = {num_or_null(tmin), num_or_null(tmax > 0.0 ? tmax : NAN)};
  try {
    LogDecayFit f = fit_log_decay(tau, sv.survival);
    j["log_decay_fit"] = {{"amplitude", f.amplitude},
                          {"sigma_amplitude", f.sigma_amplitude},
                          {"b_s", f.b},
                          {"sigma_b_s", f.sigma_b},
                          {"residual_rms", f.residual_rms}};
  } catch (const Error& e) {
    j["log_decay_fit"] = nullptr;
    j["log_decay_fit_error"] = e.what();
  }
  try {
    j["recoil_photons_at_first_energy"] = recoil_photon_budget(energy_from_hz(de.front() * MHz), ps.stack.atom);
  } catch (const DomainError&) {
    j["recoil_photons_at_first_energy"] = nullptr;
  }
  run.write("tunneling_fit.json", jdump(j));

  if (run.opts().svg) {
    PlotOptions o{"WKB tunneling time", "delta E / h (MHz)", "time (s)"};
    o.log_y = true;
    run.write("tunneling_sweep.svg", svg_line_plot({st}, o));
  }
}

// ---- CSV helpers ----

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) {
    auto b = cur.find_first_not_of(" \t"), e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// Reads a numeric CSV whose header must name the given columns in order.
std::vector<std::vector<double>> read_table(const std::string& path, const std::vector<std::string>& cols) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  int lineno = 0;
  bool have_header = false;
  std::vector<std::vector<double>> data(cols.size());
  std::string expected;
  for (const auto& c : cols) expected += (expected.empty() ? "" : ",") + c;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line);
    if (!have_header) {
      bool ok = f.size() == cols.size();
      for (std::size_t i = 0; ok && i < f.size(); ++i) ok = lower(f[i]) == lower(cols[i]);
      if (!ok) throw IoError(path + ":" + std::to_string(lineno) + ": expected header '" + expected + "'");
      have_header = true;
      continue;
    }
    if (f.size() != cols.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) + " fields");
    for (std::size_t i = 0; i < f.size(); ++i) {
      char* end = nullptr;
      double v = std::strtod(f[i].c_str(), &end);
      if (f[i].empty() || *end != '\0' || !std::isfinite(v))
        throw IoError(path + ":" + std::to_string(lineno) + ": invalid number '" + f[i] + "' in column " + cols[i]);
      data[i].push_back(v);
    }
  }
  if (!have_header) throw IoError(path + ": missing header '" + expected + "'");
  return data;
}

// ---- resonator ----

void cmd_resonator(Run& run, const Config& cfg) {
  const ResonatorConfig& rc = cfg.resonator;
  const ResonatorParams& rp = rc.params;
  const std::string& sub = run.opts().subcommand;
  if (sub == "model") {
    std::ostringstream csv;
    csv << "detuning_GHz,transmission\n";
    Series s{"T", {}, {}};
    for (double d : rc.model_detuning_ghz.values()) {
      double t = transmission(d * GHz, rp);
      csv << fmt(d) << ',' << fmt(t) << '\n';
      s.x.push_back(d);
      s.y.push_back(t);
    }
    run.write("resonator_model.csv", csv.str());

    const double gamma_hz = cfg.atom.gamma_hz();
    ordered_json j;
    j["transmission_on_resonance"] = transmission(0.0, rp);
    j["kappa_GHz"] = rp.kappa() / GHz;
    j["finesse"] = finesse(rp);
    PowerChain pc = power_to_saturation(rc.p_in, angular(rc.power_detuning_hz), rp, rc.input_loss, cfg.atom);
    j["power_chain"] = {{"p_in_nW", rc.p_in / 1e-9},
                        {"detuning_GHz", rc.power_detuning_hz / GHz},
                        {"p_circ_uW", pc.p_circ / 1e-6},
                        {"intensity_W_m2", pc.intensity},
                        {"saturation", pc.saturation}};
    ordered_json coop;
    coop["lifetime_ns"] = rc.lifetime * 1e9;
    try {
      double c = lifetime_to_C(rc.lifetime, gamma_hz);
      coop["C"] = c;
      coop["g_MHz"] = C_to_g(c, rp, gamma_hz) / MHz;
    } catch (const NonPhysical& e) {
      coop["C"] = nullptr;
      coop["error"] = e.what();
    }
    j["cooperativity"] = coop;
    j["zeeman_rms_dipole_ratio"] = zeeman_rms_dipole_ratio(2, 3);
    run.write("resonator_report.json", jdump(j));
    if (run.opts().svg)
      run.write("resonator_model.svg", svg_line_plot({s}, {"Resonator transmission", "detuning (GHz)", "T"}));
    return;
  }

  // fit
  std::string path;
  if (!run.opts().inputs.empty())
    path = run.opts().inputs.front();
  else if (rc.spectrum)
    path = *rc.spectrum;
  else
    throw ConfigError("resonator fit needs a spectrum file (argument or [resonator] spectrum)");
  auto data = read_table(path, {"detuning_GHz", "transmission"});
  std::vector<SpectrumPoint> pts;
  for (std::size_t i = 0; i < data[0].size(); ++i) pts.push_back({data[0][i] * GHz, data[1][i]});
  SpectrumFit f = fit_spectrum(pts);
  ordered_json j;
  j["n_points"] = f.n_points;
  j["values"] = {{"kappa_ex_GHz", f.kappa_ex / GHz},
                 {"kappa_i_GHz", f.kappa_i / GHz},
                 {"h_GHz", f.h_backscatter / GHz},
                 {"offset_GHz", f.offset / GHz}};
  j["sigma"] = {{"kappa_ex_GHz", f.sigma_kappa_ex / GHz},
                {"kappa_i_GHz", f.sigma_kappa_i / GHz},
                {"h_GHz", f.sigma_h / GHz},
                {"offset_GHz", f.sigma_offset / GHz}};
  j["residual_rms"] = f.residual_rms;
  ResonatorParams fitted = rp;
  fitted.kappa_ex = f.kappa_ex;
  fitted.kappa_i = f.kappa_i;
  fitted.h_backscatter = f.h_backscatter;
  j["finesse"] = finesse(fitted);
  j["transmission_on_resonance"] = transmission(0.0, fitted);
  run.write("resonator_fit.json", jdump(j));
  if (run.opts().svg) {
    Series d{"data", data[0], data[1]}, m{"fit", {}, {}};
    for (double x : data[0]) {
      m.x.push_back(x);
      m.y.push_back(transmission(x * GHz - f.offset, fitted));
    }
    run.write("resonator_fit.svg", svg_line_plot({d, m}, {"Resonator fit", "detuning (GHz)", "T"}));
  }
}

// ---- tags ----

std::vector<TimeTag> load_tags(const std::string& path, const TagsConfig& tc) {
  std::vector<TimeTag> tags = read_tags(path);
  sort_tags(tags);
  if (tc.dead_time > 0) tags = apply_dead_time(tags, tc.dead_time);
  return tags;
}

const std::string& require_input(const Run& run, const char* what) {
  if (run.opts().inputs.empty()) throw ConfigError(std::string("tags ") + what + " needs an input file");
  return run.opts().inputs.front();
}

void cmd_tags(Run& run, const Config& cfg) {
  const TagsConfig& tc = cfg.tags;
  const std::string& sub = run.opts().subcommand;

  if (sub == "synth") {
    const std::string& path = require_input(run, "synth");
    std::vector<TimeTag> tags;
    if (tc.synth_mode == "poisson") {
      std::uint64_t dur = tc.emitter.n_cycles * tc.cycle.period;
      tags = synth_poisson_stream(tc.poisson_rate, dur, tc.survival.seed, Channel::A);
      auto b = synth_poisson_stream(tc.poisson_rate, dur, tc.survival.seed, Channel::B);
      tags.insert(tags.end(), b.begin(), b.end());
      sort_tags(tags);
    } else {
      tags = synth_emitter_stream(tc.emitter, tc.survival.seed);
    }
    write_tags(path, tags);
    run.note_output(path);
    run.out() << "wrote " << path << " (" << tags.size() << " tags)\n";
    return;
  }

  if (sub == "survival") {
    const std::string& path = require_input(run, "survival");
    auto d = read_table(path, {"tau_s", "signal", "sigma"});
    DecayTimes r = survival_decay_times(d[0], d[1], d[2], tc.survival);
    ordered_json j = {{"t50_s", r.t50},
                      {"t50_err_lo_s", r.t50_err_lo},
                      {"t50_err_hi_s", r.t50_err_hi},
                      {"t50_std_s", r.t50_std},
                      {"t10_s", r.t10},
                      {"t10_err_lo_s", r.t10_err_lo},
                      {"t10_err_hi_s", r.t10_err_hi},
                      {"t10_std_s", r.t10_std},
                      {"n_boot", r.n_boot},
                      {"n_boot_failed", r.n_boot_failed},
                      {"lambda", r.lambda}};
    run.write("tags_survival.json", jdump(j));
    return;
  }

  if (sub == "lifetime") {
    const std::string& path = require_input(run, "lifetime");
    auto d = read_table(path, {"t_ns", "signal", "background"});
    LifetimeFit f = fit_decay_lifetime(d[0], d[1], d[2], tc.lifetime_start);
    ordered_json j = {{"tau_ns", f.tau},
                      {"sigma_tau_ns", f.sigma_tau},
                      {"amplitude", f.amplitude},
                      {"sigma_amplitude", f.sigma_amplitude},
                      {"background", f.background},
                      {"sigma_background", f.sigma_background},
                      {"chi2", f.chi2},
                      {"dof", f.dof}};
    const double gamma_hz = cfg.atom.gamma_hz();
    try {
      double c = lifetime_to_C(f.tau * 1e-9, gamma_hz);
      j["C"] = c;
      j["g_MHz"] = C_to_g(c, cfg.resonator.params, gamma_hz) / MHz;
    } catch (const NonPhysical& e) {
      j["C"] = nullptr;
      j["C_error"] = e.what();
    }
    run.write("tags_lifetime.json", jdump(j));
    return;
  }

  const std::string& path = require_input(run, sub.c_str());
  std::vector<TimeTag> tags = load_tags(path, tc);
  std::uint64_t n_cycles = count_cycles(tags, tc.cycle, tc.run_duration);
  EventTable ev = detect_events(tags, tc.cycle, n_cycles, tc.threshold);

  if (sub == "analyze") {
    FoldedHistogram h = fold_histogram(tags, tc.cycle, tc.hist_bin, n_cycles);
    std::ostringstream csv;
    csv << "t_ns,a,b,sum\n";
    Series s{"counts", {}, {}};
    for (std::size_t k = 0; k < h.sum.size(); ++k) {
      csv << fmt(h.bin_center(k)) << ',' << h.a[k] << ',' << h.b[k] << ',' << h.sum[k] << '\n';
      s.x.push_back(h.bin_center(k) * 1e-6);
      s.y.push_back(static_cast<double>(h.sum[k]));
    }
    run.write("tags_histogram.csv", csv.str());

    std::map<int, std::int64_t> counts;
    for (const auto& p : ev.pulses) counts[p.count]++;
    std::ostringstream pn;
    pn << "N,pulses,probability\n";
    for (const auto& [n, c] : counts)
      pn << n << ',' << c << ',' << fmt(static_cast<double>(c) / static_cast<double>(ev.attempts)) << '\n';
    run.write("tags_pn.csv", pn.str());

    ordered_json j;
    j["n_tags"] = tags.size();
    j["n_cycles"] = n_cycles;
    j["attempts"] = ev.attempts;
    j["events"] = ev.events;
    j["trapping_probability"] = ev.trapping_probability;
    j["false_positive_events"] = ev.fp_events;
    j["false_positive_rate"] = ev.false_positive_rate;
    try {
      PhotonNumberStats ps = photon_number_stats(ev, tc.n_min);
      j["pn_fit"] = {{"amplitude", ps.amplitude},
                     {"n0", ps.n0},
                     {"sigma_n0", ps.sigma_n0},
                     {"residual", ps.residual}};
    } catch (const FitDegenerate& e) {
      j["pn_fit"] = nullptr;
      j["pn_fit_error"] = e.what();
    }
    run.write("tags_events.json", jdump(j));
    if (run.opts().svg)
      run.write("tags_histogram.svg", svg_line_plot({s}, {"Folded counts", "time in cycle (ms)", "counts"}));
    return;
  }

  // g2
  G2Result g = g2_correlation(tags, tc.cycle, ev, tc.g2);
  std::ostringstream csv;
  csv << "tau_ns,g2,err,g2_smooth,coincidences,numerator,denominator\n";
  Series s{"g2", {}, {}};
  std::size_t k0 = 0;
  for (std::size_t k = 0; k < g.k.size(); ++k) {
    if (g.k[k] == 0) k0 = k;
    csv << fmt(g.tau[k]) << ',' << fmt(g.g2[k]) << ',' << fmt(g.err[k]) << ',' << fmt(g.g2_smooth[k]) << ','
        << g.coincidences[k] << ',' << fmt(g.numerator[k]) << ',' << fmt(g.denominator[k]) << '\n';
    s.x.push_back(g.tau[k]);
    s.y.push_back(g.g2_smooth[k]);
  }
  run.write("tags_g2.csv", csv.str());
  ordered_json j;
  j["conditioned_pulses"] = g.conditioned_pulses;
  j["trapping_probability"] = ev.trapping_probability;
  j["g2_0"] = num_or_null(g.g2[k0]);
  j["g2_0_err"] = num_or_null(g.err[k0]);
  j["tau_bin_ns"] = tc.g2.tau_bin;
  run.write("tags_g2.json", jdump(j));
  if (run.opts().svg) run.write("tags_g2.svg", svg_line_plot({s}, {"g2", "tau (ns)", "g2"}));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"evtrap: evanescent-field atom trap modeling and photon-tag analysis", "evtrap"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.config, "TOML configuration file");
  app.add_option("-o,--out", o.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "RNG seed override");
  app.add_option("--threads", o.threads, "worker threads (falls back to EVTRAP_THREADS)");
  app.add_option("--traj", o.traj, "trajectories per scan cell override");
  app.add_option("--dump", o.dump, "write this many trajectories of the best scan cell");
  app.add_flag("--svg", o.svg, "also write SVG plots");
  app.fallthrough();

  auto* pot = app.add_subcommand("potential", "potential profile, trap metrics and wavelength sweep");
  auto* scan = app.add_subcommand("scan", "single-stroke loading phase diagram");
  auto* tun = app.add_subcommand("tunneling", "WKB tunneling sweep and survival curve");
  auto* res = app.add_subcommand("resonator", "resonator model or spectrum fit");
  res->require_subcommand(1);
  auto* res_model = res->add_subcommand("model", "transmission model and derived quantities");
  auto* res_fit = res->add_subcommand("fit", "fit a transmission spectrum CSV");
  res_fit->add_option("spectrum", o.inputs, "spectrum CSV (detuning_GHz,transmission)");
  auto* tags = app.add_subcommand("tags", "time-tag analysis");
  tags->require_subcommand(1);
  auto* t_an = tags->add_subcommand("analyze", "folded histogram, events and P(N)");
  auto* t_g2 = tags->add_subcommand("g2", "conditioned g2 correlation");
  auto* t_syn = tags->add_subcommand("synth", "write a synthetic tag stream");
  auto* t_sv = tags->add_subcommand("survival", "t50/t10 from a survival CSV");
  auto* t_lt = tags->add_subcommand("lifetime", "lifetime fit from a histogram CSV");
  for (auto* s : {t_an, t_g2, t_syn, t_sv, t_lt}) s->add_option("file", o.inputs, "input (or output for synth)")->required();
  (void)res_model;

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::string command;
  try {
    Config cfg = load(o);
    int threads = thread_count(o);
    Run run(o, out);
    std::optional<std::uint64_t> seed;
    if (pot->parsed()) {
      command = "potential";
      cmd_potential(run, cfg);
    } else if (scan->parsed()) {
      command = "scan";
      seed = cfg.scan.sim.seed;
      cmd_scan(run, cfg, threads);
    } else if (tun->parsed()) {
      command = "tunneling";
      cmd_tunneling(run, cfg, threads);
    } else if (res->parsed()) {
      o.subcommand = res_fit->parsed() ? "fit" : "model";
      command = "resonator " + o.subcommand;
      cmd_resonator(run, cfg);
    } else {
      for (auto* s : {t_an, t_g2, t_syn, t_sv, t_lt})
        if (s->parsed()) o.subcommand = s->get_name();
      command = "tags " + o.subcommand;
      seed = cfg.tags.survival.seed;
      cmd_tags(run, cfg);
    }
    run.manifest(command, cfg, seed);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NoMinimum& e) {
    err << "NoMinimum: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const CalibrationFailed& e) {
    err << "CalibrationFailed: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace evtrap
