#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evtrap {

enum class Channel : std::uint8_t { A = 0, B = 1 };

struct TimeTag {
  Channel channel = Channel::A;
  std::uint64_t t = 0;  // ns since run start

  bool operator==(const TimeTag&) const = default;
};

struct NsInterval {
  std::uint64_t offset = 0;
  std::uint64_t duration = 0;

  std::uint64_t end() const { return offset + duration; }
};

// One experimental cycle holds n_pulses loading/dark/excitation repetitions
// starting at sequence_offset and spaced by pulse_period. Window offsets are
// relative to the start of their pulse.
struct CycleSpec {
  std::uint64_t period = 50'000'000;
  std::uint64_t sequence_offset = 0;
  std::uint64_t pulse_period = 2'501'000;
  NsInterval loading{0, 500'000};
  NsInterval dark{500'000, 1'000};
  NsInterval excitation{501'000, 2'000'000};
  int n_pulses = 8;
  int n_pulses_used = 8;
  std::uint64_t detection_window = 500'000;       // head of each excitation
  std::uint64_t false_positive_window = 500'000;  // tail of each excitation

  std::uint64_t pulse_start(int pulse) const {
    return sequence_offset + static_cast<std::uint64_t>(pulse) * pulse_period;
  }
  NsInterval detection(int pulse) const {
    return {pulse_start(pulse) + excitation.offset, detection_window};
  }
  NsInterval false_positive(int pulse) const {
    return {pulse_start(pulse) + excitation.end() - false_positive_window, false_positive_window};
  }
  void validate() const;
};

// Tag I/O. Binary records are 9 bytes: u8 channel, u64 t_ns little endian.
std::vector<TimeTag> read_tags_binary(const std::string& path);
void write_tags_binary(const std::string& path, const std::vector<TimeTag>& tags);
std::vector<TimeTag> read_tags_csv(const std::string& path);
void write_tags_csv(const std::string& path, const std::vector<TimeTag>& tags);
// Chooses CSV for a .csv extension, binary otherwise.
std::vector<TimeTag> read_tags(const std::string& path);
void write_tags(const std::string& path, const std::vector<TimeTag>& tags);

void sort_tags(std::vector<TimeTag>& tags);
void validate_tags(const std::vector<TimeTag>& tags);

// Drops tags that follow an earlier tag on the same channel within dead_time.
std::vector<TimeTag> apply_dead_time(const std::vector<TimeTag>& tags, std::uint64_t dead_time);

// Complete cycles in the record. With a known run duration, a trailing partial
// cycle is excluded; otherwise the cycle holding the last tag counts as complete.
std::uint64_t count_cycles(const std::vector<TimeTag>& tags, const CycleSpec& cycle,
                           std::optional<std::uint64_t> run_duration = std::nullopt);

struct FoldedHistogram {
  std::uint64_t bin = 0;
  std::uint64_t start = 0;  // ns within the fold period
  std::uint64_t n_cycles = 0;
  std::vector<std::uint64_t> a;
  std::vector<std::uint64_t> b;
  std::vector<std::uint64_t> sum;

  double bin_center(std::size_t k) const {
    return static_cast<double>(start) + (static_cast<double>(k) + 0.5) * static_cast<double>(bin);
  }
};

// Folds tags of the first n_cycles cycles onto [start, start + length) of the
// fold period. length must be a multiple of bin.
FoldedHistogram fold_histogram(const std::vector<TimeTag>& tags, std::uint64_t fold_period,
                               std::uint64_t bin, std::uint64_t start, std::uint64_t length,
                               std::uint64_t n_cycles);
FoldedHistogram fold_histogram(const std::vector<TimeTag>& tags, const CycleSpec& cycle,
                               std::uint64_t bin, std::uint64_t n_cycles);

struct PulseRecord {
  std::uint64_t cycle = 0;
  int pulse = 0;
  int count = 0;
  int count_a = 0;
  int count_b = 0;
  bool event = false;
  int fp_count = 0;
  bool fp_event = false;
  std::vector<TimeTag> tags;  // detection-window tags
};

struct EventTable {
  std::vector<PulseRecord> pulses;
  int threshold = 2;
  std::uint64_t n_cycles = 0;
  std::int64_t attempts = 0;
  std::int64_t events = 0;
  std::int64_t fp_events = 0;
  double trapping_probability = 0.0;
  double false_positive_rate = 0.0;

  bool conditioned(std::uint64_t cycle, int pulse) const;
};

EventTable detect_events(const std::vector<TimeTag>& tags, const CycleSpec& cycle,
                         std::uint64_t n_cycles, int threshold = 2);

struct PhotonNumberStats {
  std::map<int, std::int64_t> counts;     // N -> pulses
  std::map<int, double> probability;      // normalized over all pulses
  double amplitude = 0.0;
  double n0 = 0.0;
  double sigma_n0 = 0.0;
  double residual = 0.0;  // weighted rms of the log residuals
};

PhotonNumberStats photon_number_stats(const EventTable& events, int n_min = 2);
PhotonNumberStats photon_number_stats(const std::map<int, double>& weights, int n_min = 2);

struct G2Options {
  std::uint64_t tau_bin = 10;   // ns
  std::uint64_t tau_max = 3000; // ns
  bool smooth = false;
  double smooth_width = 77.0;   // ns
  double smooth_min_tau = 50.0; // ns
};

struct G2Result {
  std::vector<std::int64_t> k;
  std::vector<double> tau;          // ns
  std::vector<double> g2;
  std::vector<double> err;
  std::vector<double> g2_smooth;    // equals g2 where smoothing does not apply
  std::vector<std::uint64_t> coincidences;
  std::vector<double> numerator;    // sum over pulses of N_p * coincidences
  std::vector<double> denominator;  // sum over pulses and t of G1a(t) G1b(t + tau)
  std::int64_t conditioned_pulses = 0;
};

// Two-time estimator averaged over the time origin, restricted to the
// detection windows of conditioned pulses. Bins are aligned to each window
// start so tau = (j_b - j_a) * tau_bin.
G2Result g2_correlation(const std::vector<TimeTag>& tags, const CycleSpec& cycle,
                        const EventTable& condition, const G2Options& opts = {});

struct LifetimeFit {
  double tau = 0.0;
  double sigma_tau = 0.0;
  double amplitude = 0.0;
  double sigma_amplitude = 0.0;
  double background = 0.0;
  double sigma_background = 0.0;
  double chi2 = 0.0;
  int dof = 0;
};

// Fits A exp(-t/tau) + B to (signal - background) for bin centers t > t_start.
LifetimeFit fit_decay_lifetime(const std::vector<double>& t_center,
                               const std::vector<double>& signal,
                               const std::vector<double>& background, double t_start = 10.0);
LifetimeFit fit_decay_lifetime(const FoldedHistogram& signal, const FoldedHistogram& background,
                               double t_start = 10.0);

struct DecayTimes {
  double t50 = 0.0;
  double t10 = 0.0;
  double t50_err_lo = 0.0;
  double t50_err_hi = 0.0;
  double t10_err_lo = 0.0;
  double t10_err_hi = 0.0;
  double t50_std = 0.0;
  double t10_std = 0.0;
  int n_boot = 0;
  int n_boot_failed = 0;
  double lambda = 0.0;
};

struct SurvivalOptions {
  int n_boot = 200;
  std::uint64_t seed = 1;
  double level_hi = 0.5;
  double level_lo = 0.1;
};

double spline_crossing(const std::vector<double>& tau, const std::vector<double>& signal,
                       const std::vector<double>& sigma, double level);

DecayTimes survival_decay_times(const std::vector<double>& tau, const std::vector<double>& signal,
                                const std::vector<double>& sigma, const SurvivalOptions& opts = {});

struct GeometricAggregate {
  double geo_mean = 0.0;
  double sigma_x = 0.0;  // std of log values
  double err_lo = 0.0;
  double err_hi = 0.0;
};

GeometricAggregate geometric_aggregate(const std::vector<double>& values);

// Synthetic streams.
std::vector<TimeTag> synth_poisson_stream(double rate_hz, std::uint64_t duration_ns,
                                          std::uint64_t seed, Channel channel = Channel::A,
                                          std::uint64_t stream = 0);

struct EmitterParams {
  CycleSpec cycle;
  std::uint64_t n_cycles = 100;
  double trap_probability = 0.3;      // per pulse
  double excitation_rate = 1e7;       // mean re-excitation rate, 1/s
  double lifetime = 26.2e-9;          // s
  double modulation_freq = 635e3;     // Hz
  double modulation_depth = 0.0;      // 0..1
  double detection_efficiency = 0.01;
  double residence_time = 0.0;        // mean exponential presence time, s; 0 = whole window
  double background_rate = 0.0;       // per channel, 1/s
};

std::vector<TimeTag> synth_emitter_stream(const EmitterParams& params, std::uint64_t seed);

}  // namespace evtrap
