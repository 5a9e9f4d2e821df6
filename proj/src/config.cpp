#include "evtrap/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "evtrap/constants.hpp"
#include "evtrap/errors.hpp"

namespace evtrap {

std::vector<double> GridSpec::values() const {
  if (!list.empty()) return list;
  std::vector<double> v;
  if (n <= 0) return v;
  if (n == 1) return {lo};
  v.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double f = static_cast<double>(i) / (n - 1);
    if (log)
      v.push_back(std::pow(10.0, std::log10(lo) + f * (std::log10(hi) - std::log10(lo))));
    else
      v.push_back(lo + f * (hi - lo));
  }
  // Keep the end points exact.
  v.front() = lo;
  v.back() = hi;
  return v;
}

PotentialConfig::PotentialConfig() {
  stack.tweezer.r_refl = 0.4;
  stack.tweezer.u_inc = energy_from_hz(20.0 * MHz);
  targets.x_min = 180e-9;
  targets.freq_x = 650e3;
}

namespace {

int line_of(const toml::node& n) { return static_cast<int>(n.source().begin.line); }

class Section {
public:
  Section(const toml::table* t, std::string name, std::string source)
      : t_(t), name_(std::move(name)), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg, int line = 0) const {
    if (line == 0 && t_) {
      if (const toml::node* n = t_->get(key)) line = line_of(*n);
    }
    std::string where = source_;
    if (line > 0) where += ":" + std::to_string(line);
    throw ConfigError(where + ": [" + name_ + "] " + key + ": " + msg, line);
  }

  const toml::node* node(const std::string& key) {
    used_.insert(key);
    return t_ ? t_->get(key) : nullptr;
  }

  std::optional<double> opt_num(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>(); v && (n->is_integer() || n->is_floating_point())) {
      if (!std::isfinite(*v)) fail(key, "must be finite");
      return *v;
    }
    fail(key, "expected a number");
  }

  double num(const std::string& key, double def) { return opt_num(key).value_or(def); }

  double positive(const std::string& key, double def) {
    double v = num(key, def);
    if (!(v > 0.0)) fail(key, "must be > 0");
    return v;
  }

  double nonneg(const std::string& key, double def) {
    double v = num(key, def);
    if (!(v >= 0.0)) fail(key, "must be >= 0");
    return v;
  }

  double unit_interval(const std::string& key, double def) {
    double v = num(key, def);
    if (!(v >= 0.0 && v <= 1.0)) fail(key, "must lie in [0, 1]");
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t def, std::int64_t min_value) {
    const toml::node* n = node(key);
    if (!n) return def;
    if (!n->is_integer()) fail(key, "expected an integer");
    std::int64_t v = *n->value<std::int64_t>();
    if (v < min_value) fail(key, "must be >= " + std::to_string(min_value));
    return v;
  }

  std::uint64_t ns(const std::string& key, std::uint64_t def, std::uint64_t min_value = 0) {
    return static_cast<std::uint64_t>(integer(key, static_cast<std::int64_t>(def),
                                              static_cast<std::int64_t>(min_value)));
  }

  bool flag(const std::string& key, bool def) {
    const toml::node* n = node(key);
    if (!n) return def;
    if (!n->is_boolean()) fail(key, "expected true or false");
    return *n->value<bool>();
  }

  std::string str(const std::string& key, const std::string& def) {
    const toml::node* n = node(key);
    if (!n) return def;
    if (!n->is_string()) fail(key, "expected a string");
    return *n->value<std::string>();
  }

  std::string choice(const std::string& key, const std::string& def,
                     std::initializer_list<const char*> options) {
    std::string v = str(key, def);
    std::string all;
    for (const char* o : options) {
      if (v == o) return v;
      all += all.empty() ? o : std::string(", ") + o;
    }
    fail(key, "must be one of: " + all);
  }

  GridSpec grid(const std::string& key, const GridSpec& def, bool allow_log = true) {
    const toml::node* n = node(key);
    if (!n) return def;
    GridSpec g;
    if (const toml::array* a = n->as_array()) {
      for (const auto& e : *a) {
        auto v = e.value<double>();
        if (!v || !(e.is_integer() || e.is_floating_point())) fail(key, "grid list must hold numbers");
        g.list.push_back(*v);
      }
      if (g.list.empty()) fail(key, "grid is empty");
      g.n = static_cast<int>(g.list.size());
      g.lo = g.list.front();
      g.hi = g.list.back();
      return g;
    }
    const toml::table* t = n->as_table();
    if (!t) fail(key, "expected a list or {lo, hi, n}");
    Section s(t, name_ + "." + key, source_);
    auto lo = s.opt_num("lo"), hi = s.opt_num("hi");
    if (!lo || !hi) fail(key, "grid needs lo and hi");
    g.lo = *lo;
    g.hi = *hi;
    g.n = static_cast<int>(s.integer("n", 0, -1000000));
    g.log = s.flag("log", false);
    s.finish();
    if (g.n < 1) fail(key, "grid size n must be >= 1");
    if (g.log && !allow_log) fail(key, "logarithmic spacing is not allowed here");
    if (g.log && !(g.lo > 0.0 && g.hi > 0.0)) fail(key, "logarithmic grid needs positive bounds");
    if (g.n > 1 && !(g.hi > g.lo)) fail(key, "grid needs hi > lo");
    return g;
  }

  NsInterval interval(const std::string& key, const NsInterval& def) {
    const toml::node* n = node(key);
    if (!n) return def;
    const toml::table* t = n->as_table();
    if (!t) fail(key, "expected {offset_ns, duration_ns}");
    Section s(t, name_ + "." + key, source_);
    NsInterval iv;
    iv.offset = s.ns("offset_ns", def.offset);
    iv.duration = s.ns("duration_ns", def.duration);
    s.finish();
    return iv;
  }

  const toml::table* subtable(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(key, "expected a table");
    return n->as_table();
  }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      std::string key(k.str());
      if (!used_.count(key)) fail(key, "unknown key", line_of(v));
    }
  }

  bool has(const std::string& key) const { return t_ && t_->contains(key); }

private:
  const toml::table* t_;
  std::string name_;
  std::string source_;
  std::set<std::string> used_;
};

void read_atom(Section s, AtomSpecies& a) {
  a.mass = s.positive("mass_amu", a.mass / phys::atomic_mass_unit) * phys::atomic_mass_unit;
  a.gamma = angular(s.positive("gamma_mhz", ordinary(a.gamma) / MHz) * MHz);
  a.i_sat = s.positive("i_sat_w_m2", a.i_sat);
  a.hyperfine_splitting = s.positive("hyperfine_ghz", a.hyperfine_splitting / GHz) * GHz;
  a.branch_to_f1 = s.unit_interval("branch_to_f1", a.branch_to_f1);
  a.branch_to_f2 = s.unit_interval("branch_to_f2", a.branch_to_f2);
  a.transition_wavelength = s.positive("wavelength_nm", a.transition_wavelength / nm) * nm;
  s.finish();
}

void read_potential(Section s, PotentialConfig& p, const AtomSpecies& atom, bool required) {
  PotentialStack& st = p.stack;
  st.atom = atom;
  auto c3 = s.opt_num("c3_hz_um3");
  if (c3) {
    if (!(*c3 > 0.0)) s.fail("c3_hz_um3", "must be > 0");
    st.surface.c3 = energy_from_hz(*c3) * 1e-18;
  } else if (required) {
    s.fail("c3_hz_um3", "is required (no default surface coefficient is assumed)");
  }
  st.surface.x_contact = s.positive("x_contact_nm", st.surface.x_contact / nm) * nm;
  st.tweezer.wavelength = s.positive("tweezer_wavelength_nm", st.tweezer.wavelength / nm) * nm;
  st.tweezer.r_refl = s.unit_interval("reflectivity", st.tweezer.r_refl);
  st.tweezer.u_inc = energy_from_hz(s.nonneg("u_inc_mhz", hz_from_energy(st.tweezer.u_inc) / MHz) * MHz);
  st.tweezer.phi_refl = s.num("phi_refl", st.tweezer.phi_refl);
  st.evanescent.lambda_ev = s.positive("lambda_ev_nm", st.evanescent.lambda_ev / nm) * nm;
  st.evanescent.i0 = s.nonneg("saturation", st.evanescent.i0 / atom.i_sat) * atom.i_sat;
  st.evanescent.detuning_f1 = angular(s.num("detuning_mhz", ordinary(st.evanescent.detuning_f1) / MHz) * MHz);
  st.include_gravity = s.flag("gravity", st.include_gravity);
  p.calibrate = s.flag("calibrate", p.calibrate);
  if (auto v = s.opt_num("target_x_min_nm")) {
    if (!(*v > 0.0)) s.fail("target_x_min_nm", "must be > 0");
    p.targets.x_min = *v * nm;
  }
  if (auto v = s.opt_num("target_freq_khz")) {
    if (!(*v > 0.0)) s.fail("target_freq_khz", "must be > 0");
    p.targets.freq_x = *v * 1e3;
  }
  if (p.calibrate && !p.targets.x_min && !p.targets.freq_x)
    s.fail("calibrate", "calibration needs target_x_min_nm and/or target_freq_khz");
  p.profile_lo = s.positive("profile_lo_nm", p.profile_lo / nm) * nm;
  p.profile_hi = s.positive("profile_hi_nm", p.profile_hi / nm) * nm;
  p.profile_step = s.positive("profile_step_nm", p.profile_step / nm) * nm;
  if (!(p.profile_hi > p.profile_lo)) s.fail("profile_hi_nm", "must exceed profile_lo_nm");
  if (p.profile_lo < st.surface.x_contact) s.fail("profile_lo_nm", "must not lie below x_contact_nm");
  p.sweep_wavelength_nm = s.grid("sweep_wavelength_nm", p.sweep_wavelength_nm, false);
  s.finish();
}

void read_scan(Section s, ScanConfig& sc) {
  sc.kind = s.choice("kind", sc.kind, {"detuning_saturation", "velocity_detuning"});
  sc.detuning_mhz = s.grid("detuning_mhz", sc.detuning_mhz, false);
  sc.saturation = s.grid("saturation", sc.saturation);
  sc.velocity = s.grid("velocity_m_s", sc.velocity, false);
  sc.velocity_saturation = s.positive("velocity_saturation", sc.velocity_saturation);
  SimParams& p = sc.sim;
  p.n_traj = static_cast<int>(s.integer("n_traj", p.n_traj, 1));
  p.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<std::int64_t>(p.seed), 0));
  p.pulse_duration = s.positive("pulse_us", p.pulse_duration * 1e6) * 1e-6;
  p.dt = s.positive("dt_ns", p.dt * 1e9) * 1e-9;
  p.x_start = s.positive("x_start_nm", p.x_start / nm) * nm;
  p.x_escape = s.positive("x_escape_nm", p.x_escape / nm) * nm;
  p.v_mean = s.nonneg("v_mean_m_s", p.v_mean);
  p.temperature = s.nonneg("temperature_uk", p.temperature * 1e6) * 1e-6;
  p.trapped_fraction_threshold = s.num("trapped_fraction_threshold", p.trapped_fraction_threshold);
  p.include_back_scatter_to_f1 = s.flag("back_scatter_to_f1", p.include_back_scatter_to_f1);
  p.accelerate_from_far_field = s.flag("accelerate_from_far_field", p.accelerate_from_far_field);
  p.fast_forward = s.flag("fast_forward", p.fast_forward);
  p.record_stride = static_cast<int>(s.integer("record_stride", p.record_stride, 0));
  p.max_substeps = static_cast<int>(s.integer("max_substeps", p.max_substeps, 1));
  std::string ls = s.choice("light_shift", "scaled_excited", {"none", "ground_only", "scaled_excited"});
  p.scattering.light_shift = ls == "none"          ? LightShiftModel::None
                             : ls == "ground_only" ? LightShiftModel::GroundOnly
                                                   : LightShiftModel::ScaledExcited;
  p.scattering.excited_shift_scale = s.num("excited_shift_scale", p.scattering.excited_shift_scale);
  std::string pf = s.choice("rate_prefactor", "gamma", {"gamma", "gamma_hz"});
  p.scattering.prefactor = pf == "gamma" ? RatePrefactor::Gamma : RatePrefactor::GammaHz;
  std::string rc = s.choice("recoil", "single", {"single", "double"});
  p.recoil = rc == "single" ? RecoilMode::Single : RecoilMode::Double;
  if (s.has("trap_region_nm")) {
    GridSpec g = s.grid("trap_region_nm", {}, false);
    if (g.list.size() != 2) s.fail("trap_region_nm", "expected [x_a, x_b]");
    p.trap_region = Window{g.list[0] * nm, g.list[1] * nm};
  }
  s.finish();
}

void read_tunneling(Section s, TunnelingConfig& tc) {
  std::string st = s.choice("state", "F2", {"F1", "F2"});
  tc.state = st == "F1" ? HyperfineState::F1 : HyperfineState::F2;
  std::string side = s.choice("side", "surface", {"surface", "outer"});
  tc.wkb.side = side == "surface" ? EscapeSide::Surface : EscapeSide::Outer;
  std::string att = s.choice("attempt", "classical_period", {"classical_period", "harmonic"});
  tc.wkb.attempt = att == "harmonic" ? AttemptFrequency::Harmonic : AttemptFrequency::ClassicalPeriod;
  tc.wkb.rel_tol = s.positive("rel_tol", tc.wkb.rel_tol);
  tc.delta_e_mhz = s.grid("delta_e_mhz", tc.delta_e_mhz, false);
  tc.survival_tau_s = s.grid("survival_tau_s", tc.survival_tau_s);
  for (double v : tc.survival_tau_s.values())
    if (!(v > 0.0)) s.fail("survival_tau_s", "dark times must be > 0");
  s.finish();
}

void read_resonator(Section s, ResonatorConfig& rc) {
  ResonatorParams& p = rc.params;
  p.kappa_ex = s.positive("kappa_ex_ghz", p.kappa_ex / GHz) * GHz;
  p.kappa_i = s.positive("kappa_i_ghz", p.kappa_i / GHz) * GHz;
  p.h_backscatter = s.nonneg("h_ghz", p.h_backscatter / GHz) * GHz;
  p.fsr = s.positive("fsr_thz", p.fsr / 1e12) * 1e12;
  p.lambda_ev = s.positive("lambda_ev_nm", p.lambda_ev / nm) * nm;
  p.mode_area = s.positive("mode_area_nm2", p.mode_area / (nm * nm)) * nm * nm;
  if (auto g = s.opt_num("g0_max_mhz")) {
    if (!(*g > 0.0)) s.fail("g0_max_mhz", "must be > 0");
    p.g0_max = *g * MHz;
  }
  p.zeeman_floor = s.unit_interval("zeeman_floor", p.zeeman_floor);
  rc.model_detuning_ghz = s.grid("model_detuning_ghz", rc.model_detuning_ghz, false);
  rc.p_in = s.nonneg("p_in_nw", rc.p_in / 1e-9) * 1e-9;
  rc.input_loss = s.unit_interval("input_loss", rc.input_loss);
  rc.power_detuning_hz = s.num("power_detuning_ghz", rc.power_detuning_hz / GHz) * GHz;
  rc.lifetime = s.positive("lifetime_ns", rc.lifetime * 1e9) * 1e-9;
  std::string spec = s.str("spectrum", "");
  if (!spec.empty()) rc.spectrum = spec;
  s.finish();
}

void read_tags(Section s, TagsConfig& tc, const std::string& source) {
  CycleSpec& c = tc.cycle;
  c.period = s.ns("period_ns", c.period, 1);
  c.sequence_offset = s.ns("sequence_offset_ns", c.sequence_offset);
  c.pulse_period = s.ns("pulse_period_ns", c.pulse_period, 1);
  c.loading = s.interval("loading", c.loading);
  c.dark = s.interval("dark", c.dark);
  c.excitation = s.interval("excitation", c.excitation);
  c.n_pulses = static_cast<int>(s.integer("n_pulses", c.n_pulses, 1));
  c.n_pulses_used = static_cast<int>(s.integer("n_pulses_used", c.n_pulses_used, 1));
  c.detection_window = s.ns("detection_window_ns", c.detection_window, 1);
  c.false_positive_window = s.ns("false_positive_window_ns", c.false_positive_window, 1);
  tc.threshold = static_cast<int>(s.integer("threshold", tc.threshold, 1));
  tc.hist_bin = s.ns("hist_bin_ns", tc.hist_bin, 1);
  tc.g2.tau_bin = s.ns("tau_bin_ns", tc.g2.tau_bin, 1);
  tc.g2.tau_max = s.ns("tau_max_ns", tc.g2.tau_max, 0);
  tc.g2.smooth = s.flag("smooth", tc.g2.smooth);
  tc.g2.smooth_width = s.positive("smooth_width_ns", tc.g2.smooth_width);
  tc.g2.smooth_min_tau = s.nonneg("smooth_min_tau_ns", tc.g2.smooth_min_tau);
  tc.dead_time = s.ns("dead_time_ns", tc.dead_time);
  if (s.has("run_duration_ns")) tc.run_duration = s.ns("run_duration_ns", 0, 1);
  tc.n_min = static_cast<int>(s.integer("n_min", tc.n_min, 0));
  tc.lifetime_start = s.nonneg("lifetime_start_ns", tc.lifetime_start);
  tc.survival.n_boot = static_cast<int>(s.integer("n_boot", tc.survival.n_boot, 0));
  tc.survival.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<std::int64_t>(tc.survival.seed), 0));
  tc.survival.level_hi = s.unit_interval("level_hi", tc.survival.level_hi);
  tc.survival.level_lo = s.unit_interval("level_lo", tc.survival.level_lo);
  if (!(tc.survival.level_lo < tc.survival.level_hi)) s.fail("level_lo", "must be below level_hi");

  if (const toml::table* syn = s.subtable("synth")) {
    Section y(syn, "tags.synth", source);
    tc.synth_mode = y.choice("mode", tc.synth_mode, {"emitter", "poisson"});
    EmitterParams& e = tc.emitter;
    e.n_cycles = y.ns("n_cycles", e.n_cycles, 1);
    e.trap_probability = y.unit_interval("trap_probability", e.trap_probability);
    e.excitation_rate = y.positive("excitation_rate_hz", e.excitation_rate);
    e.lifetime = y.positive("lifetime_ns", e.lifetime * 1e9) * 1e-9;
    e.modulation_freq = y.nonneg("modulation_khz", e.modulation_freq / 1e3) * 1e3;
    e.modulation_depth = y.unit_interval("modulation_depth", e.modulation_depth);
    e.detection_efficiency = y.unit_interval("detection_efficiency", e.detection_efficiency);
    e.residence_time = y.nonneg("residence_us", e.residence_time * 1e6) * 1e-6;
    e.background_rate = y.nonneg("background_hz", e.background_rate);
    tc.poisson_rate = y.positive("poisson_rate_hz", tc.poisson_rate);
    y.finish();
  }
  tc.emitter.cycle = tc.cycle;
  s.finish();
}

Config from_table(const toml::table& root, const std::string& source) {
  Config cfg;
  cfg.source = source;
  static const std::set<std::string> sections{"atom", "potential", "scan", "tunneling", "resonator", "tags"};
  for (const auto& [k, v] : root) {
    std::string key(k.str());
    int line = line_of(v);
    std::string where = source + (line > 0 ? ":" + std::to_string(line) : "");
    if (!sections.count(key)) throw ConfigError(where + ": unknown section or key '" + key + "'", line);
    if (!v.is_table()) throw ConfigError(where + ": '" + key + "' must be a table", line);
  }
  auto table = [&](const char* name) -> const toml::table* {
    const toml::node* n = root.get(name);
    return n ? n->as_table() : nullptr;
  };
  read_atom(Section(table("atom"), "atom", source), cfg.atom);
  read_potential(Section(table("potential"), "potential", source), cfg.potential, cfg.atom,
                 table("potential") != nullptr);
  read_scan(Section(table("scan"), "scan", source), cfg.scan);
  read_tunneling(Section(table("tunneling"), "tunneling", source), cfg.tunneling);
  read_resonator(Section(table("resonator"), "resonator", source), cfg.resonator);
  read_tags(Section(table("tags"), "tags", source), cfg.tags, source);
  cfg.validate();
  return cfg;
}

}  // namespace

void Config::validate() const {
  try {
    atom.validate();
    resonator.params.validate();
    tags.cycle.validate();
    if (tags.cycle.detection_window % tags.g2.tau_bin != 0)
      throw DomainError("[tags] tau_bin_ns must divide detection_window_ns");
    if (tags.cycle.period % tags.hist_bin != 0)
      throw DomainError("[tags] hist_bin_ns must divide period_ns");
    if (potential.stack.surface.c3 > 0.0) {
      potential.stack.validate();
      scan.sim.validate(potential.stack);
    }
  } catch (const DomainError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

Config parse_config(const std::string& text, const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    int line = static_cast<int>(e.source().begin.line);
    throw ConfigError(source_name + ":" + std::to_string(line) + ": " + std::string(e.description()), line);
  }
  return from_table(root, source_name);
}

Config load_config(const std::string& path) {
  toml::table root;
  try {
    root = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    int line = static_cast<int>(e.source().begin.line);
    if (line == 0) throw IoError("cannot read config: " + path);
    throw ConfigError(path + ":" + std::to_string(line) + ": " + std::string(e.description()), line);
  }
  return from_table(root, path);
}

namespace {

nlohmann::ordered_json grid_json(const GridSpec& g) {
  nlohmann::ordered_json j;
  if (!g.list.empty()) {
    j["values"] = g.list;
  } else {
    j["lo"] = g.lo;
    j["hi"] = g.hi;
    j["n"] = g.n;
    j["log"] = g.log;
  }
  return j;
}

nlohmann::ordered_json interval_json(const NsInterval& iv) {
  return {{"offset_ns", iv.offset}, {"duration_ns", iv.duration}};
}

const char* light_shift_name(LightShiftModel m) {
  switch (m) {
    case LightShiftModel::None: return "none";
    case LightShiftModel::GroundOnly: return "ground_only";
    default: return "scaled_excited";
  }
}

}  // namespace

std::string config_to_json(const Config& cfg) {
  using nlohmann::ordered_json;
  ordered_json j;
  const AtomSpecies& a = cfg.atom;
  j["atom"] = {{"mass_amu", a.mass / phys::atomic_mass_unit},
               {"gamma_mhz", ordinary(a.gamma) / MHz},
               {"i_sat_w_m2", a.i_sat},
               {"hyperfine_ghz", a.hyperfine_splitting / GHz},
               {"branch_to_f1", a.branch_to_f1},
               {"branch_to_f2", a.branch_to_f2},
               {"wavelength_nm", a.transition_wavelength / nm}};

  const PotentialConfig& p = cfg.potential;
  const PotentialStack& st = p.stack;
  ordered_json pj = {{"c3_hz_um3", hz_from_energy(st.surface.c3) * 1e18},
                     {"x_contact_nm", st.surface.x_contact / nm},
                     {"tweezer_wavelength_nm", st.tweezer.wavelength / nm},
                     {"reflectivity", st.tweezer.r_refl},
                     {"u_inc_mhz", hz_from_energy(st.tweezer.u_inc) / MHz},
                     {"phi_refl", st.tweezer.phi_refl},
                     {"lambda_ev_nm", st.evanescent.lambda_ev / nm},
                     {"saturation", st.evanescent.i0 / a.i_sat},
                     {"detuning_mhz", ordinary(st.evanescent.detuning_f1) / MHz},
                     {"gravity", st.include_gravity},
                     {"calibrate", p.calibrate}};
  pj["target_x_min_nm"] = p.targets.x_min ? ordered_json(*p.targets.x_min / nm) : ordered_json(nullptr);
  pj["target_freq_khz"] = p.targets.freq_x ? ordered_json(*p.targets.freq_x / 1e3) : ordered_json(nullptr);
  pj["profile_lo_nm"] = p.profile_lo / nm;
  pj["profile_hi_nm"] = p.profile_hi / nm;
  pj["profile_step_nm"] = p.profile_step / nm;
  pj["sweep_wavelength_nm"] = grid_json(p.sweep_wavelength_nm);
  j["potential"] = pj;

  const ScanConfig& sc = cfg.scan;
  const SimParams& sp = sc.sim;
  ordered_json sj = {{"kind", sc.kind},
                     {"detuning_mhz", grid_json(sc.detuning_mhz)},
                     {"saturation", grid_json(sc.saturation)},
                     {"velocity_m_s", grid_json(sc.velocity)},
                     {"velocity_saturation", sc.velocity_saturation},
                     {"n_traj", sp.n_traj},
                     {"seed", sp.seed},
                     {"pulse_us", sp.pulse_duration * 1e6},
                     {"dt_ns", sp.dt * 1e9},
                     {"x_start_nm", sp.x_start / nm},
                     {"x_escape_nm", sp.x_escape / nm},
                     {"v_mean_m_s", sp.v_mean},
                     {"temperature_uk", sp.temperature * 1e6},
                     {"trapped_fraction_threshold", sp.trapped_fraction_threshold},
                     {"back_scatter_to_f1", sp.include_back_scatter_to_f1},
                     {"accelerate_from_far_field", sp.accelerate_from_far_field},
                     {"fast_forward", sp.fast_forward},
                     {"record_stride", sp.record_stride},
                     {"max_substeps", sp.max_substeps},
                     {"light_shift", light_shift_name(sp.scattering.light_shift)},
                     {"excited_shift_scale", sp.scattering.excited_shift_scale},
                     {"rate_prefactor", sp.scattering.prefactor == RatePrefactor::Gamma ? "gamma" : "gamma_hz"},
                     {"recoil", sp.recoil == RecoilMode::Single ? "single" : "double"}};
  if (sp.trap_region)
    sj["trap_region_nm"] = {sp.trap_region->lo / nm, sp.trap_region->hi / nm};
  j["scan"] = sj;

  const TunnelingConfig& tc = cfg.tunneling;
  j["tunneling"] = {{"state", tc.state == HyperfineState::F1 ? "F1" : "F2"},
                    {"side", tc.wkb.side == EscapeSide::Surface ? "surface" : "outer"},
                    {"attempt", tc.wkb.attempt == AttemptFrequency::Harmonic ? "harmonic" : "classical_period"},
                    {"rel_tol", tc.wkb.rel_tol},
                    {"delta_e_mhz", grid_json(tc.delta_e_mhz)},
                    {"survival_tau_s", grid_json(tc.survival_tau_s)}};

  const ResonatorConfig& rc = cfg.resonator;
  const ResonatorParams& rp = rc.params;
  ordered_json rj = {{"kappa_ex_ghz", rp.kappa_ex / GHz},
                     {"kappa_i_ghz", rp.kappa_i / GHz},
                     {"h_ghz", rp.h_backscatter / GHz},
                     {"fsr_thz", rp.fsr / 1e12},
                     {"lambda_ev_nm", rp.lambda_ev / nm},
                     {"mode_area_nm2", rp.mode_area / (nm * nm)}};
  rj["g0_max_mhz"] = rp.g0_max ? ordered_json(*rp.g0_max / MHz) : ordered_json(nullptr);
  rj["zeeman_floor"] = rp.zeeman_floor;
  rj["model_detuning_ghz"] = grid_json(rc.model_detuning_ghz);
  rj["p_in_nw"] = rc.p_in / 1e-9;
  rj["input_loss"] = rc.input_loss;
  rj["power_detuning_ghz"] = rc.power_detuning_hz / GHz;
  rj["lifetime_ns"] = rc.lifetime * 1e9;
  rj["spectrum"] = rc.spectrum ? ordered_json(*rc.spectrum) : ordered_json(nullptr);
  j["resonator"] = rj;

  const TagsConfig& tg = cfg.tags;
  const CycleSpec& c = tg.cycle;
  const EmitterParams& e = tg.emitter;
  ordered_json tj = {{"period_ns", c.period},
                     {"sequence_offset_ns", c.sequence_offset},
                     {"pulse_period_ns", c.pulse_period},
                     {"loading", interval_json(c.loading)},
                     {"dark", interval_json(c.dark)},
                     {"excitation", interval_json(c.excitation)},
                     {"n_pulses", c.n_pulses},
                     {"n_pulses_used", c.n_pulses_used},
                     {"detection_window_ns", c.detection_window},
                     {"false_positive_window_ns", c.false_positive_window},
                     {"threshold", tg.threshold},
                     {"hist_bin_ns", tg.hist_bin},
                     {"tau_bin_ns", tg.g2.tau_bin},
                     {"tau_max_ns", tg.g2.tau_max},
                     {"smooth", tg.g2.smooth},
                     {"smooth_width_ns", tg.g2.smooth_width},
                     {"smooth_min_tau_ns", tg.g2.smooth_min_tau},
                     {"dead_time_ns", tg.dead_time}};
  tj["run_duration_ns"] = tg.run_duration ? ordered_json(*tg.run_duration) : ordered_json(nullptr);
  tj["n_min"] = tg.n_min;
  tj["lifetime_start_ns"] = tg.lifetime_start;
  tj["n_boot"] = tg.survival.n_boot;
  tj["seed"] = tg.survival.seed;
  tj["level_hi"] = tg.survival.level_hi;
  tj["level_lo"] = tg.survival.level_lo;
  tj["synth"] = {{"mode", tg.synth_mode},
                 {"n_cycles", e.n_cycles},
                 {"trap_probability", e.trap_probability},
                 {"excitation_rate_hz", e.excitation_rate},
                 {"lifetime_ns", e.lifetime * 1e9},
                 {"modulation_khz", e.modulation_freq / 1e3},
                 {"modulation_depth", e.modulation_depth},
                 {"detection_efficiency", e.detection_efficiency},
                 {"residence_us", e.residence_time * 1e6},
                 {"background_hz", e.background_rate},
                 {"poisson_rate_hz", tg.poisson_rate}};
  j["tags"] = tj;
  return j.dump(2);
}

}  // namespace evtrap
