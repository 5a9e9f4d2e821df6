#include "evtrap/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "evtrap/errors.hpp"
#include "evtrap/lsq.hpp"
#include "evtrap/rng.hpp"
#include "evtrap/spline.hpp"

namespace evtrap {

void CycleSpec::validate() const {
  if (period == 0 || pulse_period == 0) throw DomainError("cycle periods must be positive");
  if (n_pulses < 1) throw DomainError("n_pulses must be at least 1");
  if (n_pulses_used < 1 || n_pulses_used > n_pulses)
    throw DomainError("n_pulses_used must lie in [1, n_pulses]");
  if (sequence_offset + static_cast<std::uint64_t>(n_pulses) * pulse_period > period)
    throw DomainError("pulse sequence does not fit inside the cycle period");
  std::vector<NsInterval> w{loading, dark, excitation};
  std::sort(w.begin(), w.end(), [](const NsInterval& a, const NsInterval& b) { return a.offset < b.offset; });
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i].end() > pulse_period) throw DomainError("cycle window extends past the pulse period");
    if (i > 0 && w[i].offset < w[i - 1].end()) throw DomainError("cycle windows overlap");
  }
  if (excitation.duration == 0) throw DomainError("excitation window is empty");
  if (detection_window == 0 || detection_window > excitation.duration)
    throw DomainError("detection window must lie within the excitation window");
  if (false_positive_window == 0 || false_positive_window > excitation.duration)
    throw DomainError("false-positive window must lie within the excitation window");
}

// ---- I/O ----

std::vector<TimeTag> read_tags_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tag file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 9 != 0) throw IoError("tag file size is not a multiple of 9 bytes: " + path);
  std::vector<TimeTag> tags(bytes.size() / 9);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const unsigned char* p = bytes.data() + 9 * i;
    if (p[0] > 1) throw IoError("invalid channel byte in record " + std::to_string(i));
    std::uint64_t t = 0;
    for (int b = 7; b >= 0; --b) t = (t << 8) | p[1 + b];
    tags[i] = {static_cast<Channel>(p[0]), t};
  }
  return tags;
}

void write_tags_binary(const std::string& path, const std::vector<TimeTag>& tags) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tag file: " + path);
  std::vector<unsigned char> bytes(tags.size() * 9);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    unsigned char* p = bytes.data() + 9 * i;
    p[0] = static_cast<unsigned char>(tags[i].channel);
    for (int b = 0; b < 8; ++b) p[1 + b] = static_cast<unsigned char>(tags[i].t >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing tag file: " + path);
}

std::vector<TimeTag> read_tags_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tag file: " + path);
  std::vector<TimeTag> tags;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find_first_of("0123456789") != 0 && line.find("channel") != std::string::npos)
      continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected 'channel,t_ns'");
    std::string ch = line.substr(0, comma), ts = line.substr(comma + 1);
    TimeTag tag;
    if (ch == "A" || ch == "a" || ch == "0") {
      tag.channel = Channel::A;
    } else if (ch == "B" || ch == "b" || ch == "1") {
      tag.channel = Channel::B;
    } else {
      throw IoError(path + ":" + std::to_string(lineno) + ": unknown channel '" + ch + "'");
    }
    try {
      std::size_t used = 0;
      tag.t = std::stoull(ts, &used);
      if (used != ts.size() || ts[0] == '-') throw std::invalid_argument(ts);
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": invalid time '" + ts + "'");
    }
    tags.push_back(tag);
  }
  return tags;
}

void write_tags_csv(const std::string& path, const std::vector<TimeTag>& tags) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write tag file: " + path);
  out << "channel,t_ns\n";
  for (const auto& t : tags) out << (t.channel == Channel::A ? 'A' : 'B') << ',' << t.t << '\n';
}

namespace {
bool is_csv(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}
}  // namespace

std::vector<TimeTag> read_tags(const std::string& path) {
  return is_csv(path) ? read_tags_csv(path) : read_tags_binary(path);
}

void write_tags(const std::string& path, const std::vector<TimeTag>& tags) {
  if (is_csv(path))
    write_tags_csv(path, tags);
  else
    write_tags_binary(path, tags);
}

void sort_tags(std::vector<TimeTag>& tags) {
  std::stable_sort(tags.begin(), tags.end(), [](const TimeTag& a, const TimeTag& b) {
    return a.t < b.t || (a.t == b.t && a.channel < b.channel);
  });
}

void validate_tags(const std::vector<TimeTag>& tags) {
  std::uint64_t last[2] = {0, 0};
  for (const auto& t : tags) {
    auto c = static_cast<int>(t.channel);
    if (t.t < last[c]) throw DomainError("tags are not sorted per channel");
    last[c] = t.t;
  }
}

std::vector<TimeTag> apply_dead_time(const std::vector<TimeTag>& tags, std::uint64_t dead_time) {
  std::vector<TimeTag> out;
  out.reserve(tags.size());
  bool seen[2] = {false, false};
  std::uint64_t last[2] = {0, 0};
  for (const auto& t : tags) {
    auto c = static_cast<int>(t.channel);
    if (seen[c] && t.t - last[c] < dead_time) continue;
    seen[c] = true;
    last[c] = t.t;
    out.push_back(t);
  }
  return out;
}

std::uint64_t count_cycles(const std::vector<TimeTag>& tags, const CycleSpec& cycle,
                           std::optional<std::uint64_t> run_duration) {
  if (run_duration) return *run_duration / cycle.period;
  if (tags.empty()) return 0;
  std::uint64_t tmax = 0;
  for (const auto& t : tags) tmax = std::max(tmax, t.t);
  return tmax / cycle.period + 1;
}

// ---- folding ----

FoldedHistogram fold_histogram(const std::vector<TimeTag>& tags, std::uint64_t fold_period,
                               std::uint64_t bin, std::uint64_t start, std::uint64_t length,
                               std::uint64_t n_cycles) {
  if (fold_period == 0 || bin == 0) throw DomainError("fold period and bin must be positive");
  if (length == 0 || length % bin != 0) throw DomainError("bin must divide the folded region");
  if (start + length > fold_period) throw DomainError("folded region exceeds the fold period");
  FoldedHistogram h;
  h.bin = bin;
  h.start = start;
  h.n_cycles = n_cycles;
  std::size_t nb = length / bin;
  h.a.assign(nb, 0);
  h.b.assign(nb, 0);
  h.sum.assign(nb, 0);
  for (const auto& t : tags) {
    if (t.t / fold_period >= n_cycles) continue;
    std::uint64_t ph = t.t % fold_period;
    if (ph < start || ph >= start + length) continue;
    std::size_t k = (ph - start) / bin;
    (t.channel == Channel::A ? h.a : h.b)[k]++;
    h.sum[k]++;
  }
  return h;
}

FoldedHistogram fold_histogram(const std::vector<TimeTag>& tags, const CycleSpec& cycle,
                               std::uint64_t bin, std::uint64_t n_cycles) {
  return fold_histogram(tags, cycle.period, bin, 0, cycle.period, n_cycles);
}

// ---- events ----

bool EventTable::conditioned(std::uint64_t cycle, int pulse) const {
  for (const auto& p : pulses)
    if (p.cycle == cycle && p.pulse == pulse) return p.event;
  return false;
}

namespace {

std::pair<std::size_t, std::size_t> tag_range(const std::vector<TimeTag>& tags, std::uint64_t lo,
                                              std::uint64_t hi) {
  auto cmp = [](const TimeTag& a, std::uint64_t t) { return a.t < t; };
  auto b = std::lower_bound(tags.begin(), tags.end(), lo, cmp);
  auto e = std::lower_bound(b, tags.end(), hi, cmp);
  return {static_cast<std::size_t>(b - tags.begin()), static_cast<std::size_t>(e - tags.begin())};
}

}  // namespace

EventTable detect_events(const std::vector<TimeTag>& in, const CycleSpec& cycle,
                         std::uint64_t n_cycles, int threshold) {
  cycle.validate();
  std::vector<TimeTag> tags = in;
  sort_tags(tags);
  EventTable table;
  table.threshold = threshold;
  table.n_cycles = n_cycles;
  for (std::uint64_t c = 0; c < n_cycles; ++c) {
    std::uint64_t base = c * cycle.period;
    for (int p = 0; p < cycle.n_pulses_used; ++p) {
      PulseRecord rec;
      rec.cycle = c;
      rec.pulse = p;
      NsInterval det = cycle.detection(p);
      auto [b, e] = tag_range(tags, base + det.offset, base + det.end());
      rec.tags.assign(tags.begin() + static_cast<std::ptrdiff_t>(b), tags.begin() + static_cast<std::ptrdiff_t>(e));
      for (const auto& t : rec.tags) (t.channel == Channel::A ? rec.count_a : rec.count_b)++;
      rec.count = rec.count_a + rec.count_b;
      rec.event = rec.count >= threshold;
      NsInterval fp = cycle.false_positive(p);
      auto [fb, fe] = tag_range(tags, base + fp.offset, base + fp.end());
      rec.fp_count = static_cast<int>(fe - fb);
      rec.fp_event = rec.fp_count >= threshold;
      table.attempts++;
      if (rec.event) table.events++;
      if (rec.fp_event) table.fp_events++;
      table.pulses.push_back(std::move(rec));
    }
  }
  if (table.attempts > 0) {
    table.trapping_probability = static_cast<double>(table.events) / table.attempts;
    table.false_positive_rate = static_cast<double>(table.fp_events) / table.attempts;
  }
  return table;
}

// ---- P(N) ----

PhotonNumberStats photon_number_stats(const std::map<int, double>& weights, int n_min) {
  PhotonNumberStats st;
  double total = 0.0;
  for (const auto& [n, w] : weights) total += w;
  if (!(total > 0.0)) throw FitDegenerate("photon-number histogram is empty");
  for (const auto& [n, w] : weights) st.probability[n] = w / total;

  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  int support = 0;
  for (const auto& [n, w] : weights) {
    if (n < n_min || w <= 0.0) continue;
    double y = std::log(w / total);
    sw += w;
    sx += w * n;
    sy += w * y;
    sxx += w * n * n;
    sxy += w * n * y;
    ++support;
  }
  if (support < 3) throw FitDegenerate("photon-number fit needs at least 3 distinct N");
  double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw FitDegenerate("photon-number fit is singular");
  double slope = (sw * sxy - sx * sy) / det;
  double icpt = (sy - slope * sx) / sw;
  if (!(slope < 0.0)) throw FitDegenerate("photon-number distribution does not decay");
  st.n0 = -1.0 / slope;
  st.amplitude = std::exp(icpt);
  double rss = 0.0;
  for (const auto& [n, w] : weights) {
    if (n < n_min || w <= 0.0) continue;
    double r = std::log(w / total) - (icpt + slope * n);
    rss += w * r * r;
  }
  st.residual = std::sqrt(rss / sw);
  // Counts-based weights make sw the number of pulses in the fit.
  double sigma_slope = support > 2 ? std::sqrt(rss / (support - 2) * sw / det) : 0.0;
  st.sigma_n0 = sigma_slope / (slope * slope);
  return st;
}

PhotonNumberStats photon_number_stats(const EventTable& events, int n_min) {
  std::map<int, double> w;
  std::map<int, std::int64_t> counts;
  for (const auto& p : events.pulses) {
    counts[p.count]++;
    w[p.count] += 1.0;
  }
  PhotonNumberStats st = photon_number_stats(w, n_min);
  st.counts = counts;
  return st;
}

// ---- g2 ----

G2Result g2_correlation(const std::vector<TimeTag>& /*tags*/, const CycleSpec& cycle,
                        const EventTable& condition, const G2Options& opts) {
  if (opts.tau_bin == 0) throw DomainError("tau bin must be positive");
  if (cycle.detection_window % opts.tau_bin != 0)
    throw DomainError("tau bin must divide the detection window");
  const std::int64_t nb = static_cast<std::int64_t>(cycle.detection_window / opts.tau_bin);
  const std::int64_t kmax = static_cast<std::int64_t>(opts.tau_max / opts.tau_bin);
  const std::size_t nk = static_cast<std::size_t>(2 * kmax + 1);
  const int np = cycle.n_pulses_used;

  std::vector<std::int64_t> n_cond(np, 0);
  std::vector<std::vector<std::uint64_t>> ga(np, std::vector<std::uint64_t>(nb, 0));
  std::vector<std::vector<std::uint64_t>> gb(np, std::vector<std::uint64_t>(nb, 0));
  std::vector<std::vector<std::uint64_t>> coinc(np, std::vector<std::uint64_t>(nk, 0));

  G2Result res;
  for (const auto& rec : condition.pulses) {
    if (!rec.event || rec.pulse < 0 || rec.pulse >= np) continue;
    ++res.conditioned_pulses;
    int p = rec.pulse;
    n_cond[p]++;
    std::uint64_t w0 = rec.cycle * cycle.period + cycle.detection(p).offset;
    std::vector<std::int64_t> ja, jb;
    std::vector<std::uint64_t> ta, tb;
    for (const auto& t : rec.tags) {
      std::int64_t j = static_cast<std::int64_t>((t.t - w0) / opts.tau_bin);
      if (t.channel == Channel::A) {
        ga[p][j]++;
        ja.push_back(j);
        ta.push_back(t.t);
      } else {
        gb[p][j]++;
        jb.push_back(j);
        tb.push_back(t.t);
      }
    }
    // Two-pointer sweep over B for each A; tags are time ordered.
    std::size_t lo = 0;
    for (std::size_t i = 0; i < ja.size(); ++i) {
      while (lo < jb.size() && jb[lo] < ja[i] - kmax) ++lo;
      for (std::size_t m = lo; m < jb.size() && jb[m] <= ja[i] + kmax; ++m)
        coinc[p][static_cast<std::size_t>(jb[m] - ja[i] + kmax)]++;
    }
  }
  if (res.conditioned_pulses == 0) throw EmptyCondition("no conditioned pulses");

  std::vector<unsigned __int128> den(nk, 0);
  std::vector<unsigned __int128> num(nk, 0);
  std::vector<unsigned __int128> var(nk, 0);
  std::vector<std::uint64_t> raw(nk, 0);
  for (int p = 0; p < np; ++p) {
    if (n_cond[p] == 0) continue;
    for (std::int64_t j = 0; j < nb; ++j) {
      std::uint64_t a = ga[p][j];
      if (a == 0) continue;
      std::int64_t k0 = std::max(-kmax, -j), k1 = std::min(kmax, nb - 1 - j);
      for (std::int64_t k = k0; k <= k1; ++k)
        den[static_cast<std::size_t>(k + kmax)] += static_cast<unsigned __int128>(a) * gb[p][j + k];
    }
    auto w = static_cast<unsigned __int128>(n_cond[p]);
    for (std::size_t k = 0; k < nk; ++k) {
      raw[k] += coinc[p][k];
      num[k] += w * coinc[p][k];
      var[k] += w * w * coinc[p][k];
    }
  }

  res.k.resize(nk);
  res.tau.resize(nk);
  res.g2.resize(nk);
  res.err.resize(nk);
  res.coincidences = raw;
  res.numerator.resize(nk);
  res.denominator.resize(nk);
  for (std::size_t k = 0; k < nk; ++k) {
    res.k[k] = static_cast<std::int64_t>(k) - kmax;
    res.tau[k] = static_cast<double>(res.k[k]) * static_cast<double>(opts.tau_bin);
    res.numerator[k] = static_cast<double>(num[k]);
    res.denominator[k] = static_cast<double>(den[k]);
    if (den[k] == 0) {
      res.g2[k] = std::nan("");
      res.err[k] = std::nan("");
    } else {
      res.g2[k] = res.numerator[k] / res.denominator[k];
      res.err[k] = std::sqrt(static_cast<double>(var[k])) / res.denominator[k];
    }
  }

  res.g2_smooth = res.g2;
  if (opts.smooth) {
    auto half = static_cast<std::int64_t>(std::llround(0.5 * opts.smooth_width / static_cast<double>(opts.tau_bin)));
    for (std::size_t k = 0; k < nk; ++k) {
      if (std::abs(res.tau[k]) <= opts.smooth_min_tau) continue;
      // Pairs at +-d are added together so that mirrored bins see identical sums.
      auto usable = [&](std::int64_t q) {
        if (q < 0 || q >= static_cast<std::int64_t>(nk)) return false;
        auto qq = static_cast<std::size_t>(q);
        return std::abs(res.tau[qq]) > opts.smooth_min_tau && std::isfinite(res.g2[qq]) &&
               (res.tau[qq] > 0) == (res.tau[k] > 0);
      };
      const auto kk = static_cast<std::int64_t>(k);
      double acc = 0.0;
      int cnt = 0;
      if (usable(kk)) {
        acc = res.g2[k];
        cnt = 1;
      }
      for (std::int64_t d = 1; d <= half; ++d) {
        bool lo = usable(kk - d), hi = usable(kk + d);
        double a = lo ? res.g2[static_cast<std::size_t>(kk - d)] : 0.0;
        double b = hi ? res.g2[static_cast<std::size_t>(kk + d)] : 0.0;
        acc += a + b;
        cnt += lo + hi;
      }
      if (cnt > 0) res.g2_smooth[k] = acc / cnt;
    }
  }
  return res;
}

// ---- lifetime ----

LifetimeFit fit_decay_lifetime(const std::vector<double>& t_center, const std::vector<double>& signal,
                               const std::vector<double>& background, double t_start) {
  if (t_center.size() != signal.size() || signal.size() != background.size())
    throw DomainError("lifetime histograms differ in size");
  std::vector<double> t, y, s;
  for (std::size_t i = 0; i < t_center.size(); ++i) {
    if (t_center[i] <= t_start) continue;
    t.push_back(t_center[i]);
    y.push_back(signal[i] - background[i]);
    s.push_back(std::sqrt(std::max(1.0, signal[i] + background[i])));
  }
  const int m = static_cast<int>(t.size());
  if (m < 4) throw FitDegenerate("lifetime fit needs at least 4 bins after the start time");

  std::size_t tail = std::max<std::size_t>(1, t.size() / 10);
  double b0 = std::accumulate(y.end() - static_cast<std::ptrdiff_t>(tail), y.end(), 0.0) / tail;
  double span = t.back() - t.front();
  double tau0 = span / 5.0;
  // Slope of the log of the first half gives a better start when it is usable.
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size() / 2; ++i) {
      double v = y[i] - b0;
      if (v <= 0) continue;
      double ly = std::log(v);
      sx += t[i];
      sy += ly;
      sxx += t[i] * t[i];
      sxy += t[i] * ly;
      ++n;
    }
    if (n >= 3) {
      double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      if (slope < 0 && std::isfinite(slope)) tau0 = -1.0 / slope;
    }
  }
  double a0 = (y.front() - b0) * std::exp(t.front() / tau0);
  if (!(std::abs(a0) > 0)) throw FitDegenerate("lifetime data carry no decaying signal");

  ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(m);
    for (int i = 0; i < m; ++i) r[i] = (p[0] * std::exp(-t[i] / p[1]) + p[2] - y[i]) / s[i];
  };
  Eigen::VectorXd p0(3);
  p0 << a0, tau0, b0;
  LsqOptions lo;
  lo.scale_covariance = false;
  LsqResult fit = least_squares(fn, m, p0, lo);
  if (fit.rank < 3) throw FitDegenerate("lifetime Jacobian is rank deficient");
  if (!(fit.params[1] > 0.0)) throw NonPhysical("fitted lifetime is not positive");
  LifetimeFit out;
  out.amplitude = fit.params[0];
  out.tau = fit.params[1];
  out.background = fit.params[2];
  auto sg = fit.sigma();
  out.sigma_amplitude = sg[0];
  out.sigma_tau = sg[1];
  out.sigma_background = sg[2];
  out.chi2 = fit.chi2;
  out.dof = m - 3;
  return out;
}

LifetimeFit fit_decay_lifetime(const FoldedHistogram& sig, const FoldedHistogram& bg, double t_start) {
  if (sig.sum.size() != bg.sum.size() || sig.bin != bg.bin || sig.start != bg.start)
    throw DomainError("signal and background histograms use different binning");
  std::vector<double> t(sig.sum.size()), s(sig.sum.size()), b(sig.sum.size());
  for (std::size_t k = 0; k < sig.sum.size(); ++k) {
    t[k] = sig.bin_center(k);
    s[k] = static_cast<double>(sig.sum[k]);
    b[k] = static_cast<double>(bg.sum[k]);
  }
  return fit_decay_lifetime(t, s, b, t_start);
}

// ---- survival decay times ----

namespace {

struct LogData {
  std::vector<double> x, y, w, sigma;
};

LogData prepare(const std::vector<double>& tau, const std::vector<double>& signal,
                const std::vector<double>& sigma) {
  if (tau.size() != signal.size() || tau.size() != sigma.size())
    throw DomainError("survival inputs differ in size");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < tau.size(); ++i)
    if (tau[i] > 0.0) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return tau[a] < tau[b]; });
  LogData d;
  for (std::size_t i : idx) {
    if (!(sigma[i] > 0.0)) throw DomainError("survival uncertainties must be positive");
    if (!d.x.empty() && std::log(tau[i]) <= d.x.back()) throw DomainError("duplicate dark times");
    d.x.push_back(std::log(tau[i]));
    d.y.push_back(signal[i]);
    d.sigma.push_back(sigma[i]);
    d.w.push_back(1.0 / (sigma[i] * sigma[i]));
  }
  if (d.x.size() < 6) throw DomainError("survival analysis needs at least 6 points with tau > 0");
  if (d.x.back() - d.x.front() < std::log(100.0) - 1e-12)
    throw DomainError("survival points must span at least two decades");
  return d;
}

double crossing(const SmoothingSpline& sp, double x0, double x1, double level) {
  const int n = 4000;
  double prev_x = x0, prev = sp(x0);
  if (prev <= level) throw NoCrossing("spline starts below the threshold");
  for (int i = 1; i <= n; ++i) {
    double x = x0 + (x1 - x0) * i / n;
    double v = sp(x);
    if (v <= level) {
      double a = prev_x, b = x;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a + b);
        if (sp(mid) > level)
          a = mid;
        else
          b = mid;
      }
      return std::exp(0.5 * (a + b));
    }
    prev_x = x;
    prev = v;
  }
  throw NoCrossing("spline never reaches the threshold within the data range");
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  double f = pos - static_cast<double>(i);
  return v[i] * (1.0 - f) + v[i + 1] * f;
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

double spline_crossing(const std::vector<double>& tau, const std::vector<double>& signal,
                       const std::vector<double>& sigma, double level) {
  LogData d = prepare(tau, signal, sigma);
  SmoothingSpline sp(d.x, d.y, d.w);
  return crossing(sp, d.x.front(), d.x.back(), level);
}

DecayTimes survival_decay_times(const std::vector<double>& tau, const std::vector<double>& signal,
                                const std::vector<double>& sigma, const SurvivalOptions& opts) {
  if (opts.n_boot < 0) throw DomainError("n_boot must be >= 0");
  LogData d = prepare(tau, signal, sigma);
  SmoothingSpline sp(d.x, d.y, d.w);
  DecayTimes out;
  out.lambda = sp.lambda();
  out.t50 = crossing(sp, d.x.front(), d.x.back(), opts.level_hi);
  out.t10 = crossing(sp, d.x.front(), d.x.back(), opts.level_lo);

  std::vector<double> b50, b10;
  for (int b = 0; b < opts.n_boot; ++b) {
    RngStream rng = RngStream::keyed(opts.seed, 0x5eed, static_cast<std::uint64_t>(b));
    std::vector<double> y(d.y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = d.y[i] + d.sigma[i] * rng.normal();
    try {
      SmoothingSpline s2(d.x, y, d.w);
      double c50 = crossing(s2, d.x.front(), d.x.back(), opts.level_hi);
      double c10 = crossing(s2, d.x.front(), d.x.back(), opts.level_lo);
      b50.push_back(c50);
      b10.push_back(c10);
    } catch (const NoCrossing&) {
      ++out.n_boot_failed;
    }
  }
  out.n_boot = static_cast<int>(b50.size());
  if (!b50.empty()) {
    const double qlo = 0.15865525393145707, qhi = 0.8413447460685429;
    out.t50_err_lo = std::max(0.0, out.t50 - percentile(b50, qlo));
    out.t50_err_hi = std::max(0.0, percentile(b50, qhi) - out.t50);
    out.t10_err_lo = std::max(0.0, out.t10 - percentile(b10, qlo));
    out.t10_err_hi = std::max(0.0, percentile(b10, qhi) - out.t10);
    out.t50_std = stddev(b50);
    out.t10_std = stddev(b10);
  }
  return out;
}

GeometricAggregate geometric_aggregate(const std::vector<double>& values) {
  if (values.empty()) throw DomainError("no values to aggregate");
  std::vector<double> x;
  for (double v : values) {
    if (!(v > 0.0)) throw DomainError("geometric aggregation needs positive values");
    x.push_back(std::log(v));
  }
  double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  GeometricAggregate g;
  g.sigma_x = stddev(x);
  g.geo_mean = std::exp(mu);
  g.err_lo = g.geo_mean - std::exp(mu - g.sigma_x);
  g.err_hi = std::exp(mu + g.sigma_x) - g.geo_mean;
  return g;
}

// ---- synthetic streams ----

std::vector<TimeTag> synth_poisson_stream(double rate_hz, std::uint64_t duration_ns,
                                          std::uint64_t seed, Channel channel, std::uint64_t stream) {
  if (!(rate_hz > 0.0)) throw DomainError("Poisson rate must be positive");
  RngStream rng = RngStream::keyed(seed, 0x9015 + stream, static_cast<std::uint64_t>(channel));
  std::vector<TimeTag> tags;
  tags.reserve(static_cast<std::size_t>(rate_hz * static_cast<double>(duration_ns) * 1e-9 * 1.01) + 16);
  double t = 0.0;
  const double scale = 1e9 / rate_hz;
  for (;;) {
    t += rng.exponential() * scale;
    if (t >= static_cast<double>(duration_ns)) break;
    tags.push_back({channel, static_cast<std::uint64_t>(t)});
  }
  return tags;
}

std::vector<TimeTag> synth_emitter_stream(const EmitterParams& ep, std::uint64_t seed) {
  ep.cycle.validate();
  if (!(ep.excitation_rate > 0.0) || !(ep.lifetime > 0.0))
    throw DomainError("emitter rates must be positive");
  if (ep.modulation_depth < 0.0 || ep.modulation_depth > 1.0)
    throw DomainError("modulation depth must lie in [0, 1]");
  if (ep.detection_efficiency < 0.0 || ep.detection_efficiency > 1.0)
    throw DomainError("detection efficiency must lie in [0, 1]");

  std::vector<TimeTag> tags;
  const CycleSpec& cy = ep.cycle;
  const double rmax = ep.excitation_rate * (1.0 + ep.modulation_depth);
  const double w = 2.0 * 3.14159265358979323846 * ep.modulation_freq;
  for (std::uint64_t c = 0; c < ep.n_cycles; ++c) {
    for (int p = 0; p < cy.n_pulses; ++p) {
      RngStream rng = RngStream::keyed(seed, c, static_cast<std::uint64_t>(p));
      if (!rng.bernoulli(ep.trap_probability)) continue;
      double start = static_cast<double>(c * cy.period + cy.pulse_start(p) + cy.excitation.offset);
      double window = static_cast<double>(cy.excitation.duration);
      double present = window;
      if (ep.residence_time > 0.0) present = std::min(window, rng.exponential() * ep.residence_time * 1e9);
      double end = start + present;
      double phase = 2.0 * 3.14159265358979323846 * rng.uniform();
      double t = start;
      for (;;) {
        // Thinning for the modulated re-excitation rate.
        for (;;) {
          t += rng.exponential() / rmax * 1e9;
          if (t >= end) break;
          double rate = ep.excitation_rate *
                        (1.0 + ep.modulation_depth * std::sin(w * (t - start) * 1e-9 + phase));
          if (rng.uniform() * rmax < rate) break;
        }
        if (t >= end) break;
        t += rng.exponential() * ep.lifetime * 1e9;
        if (t >= end) break;
        if (rng.bernoulli(ep.detection_efficiency))
          tags.push_back({rng.uniform() < 0.5 ? Channel::A : Channel::B, static_cast<std::uint64_t>(t)});
      }
    }
  }
  if (ep.background_rate > 0.0) {
    std::uint64_t dur = ep.n_cycles * cy.period;
    for (Channel ch : {Channel::A, Channel::B}) {
      auto bg = synth_poisson_stream(ep.background_rate, dur, seed, ch, 0xb6);
      tags.insert(tags.end(), bg.begin(), bg.end());
    }
  }
  sort_tags(tags);
  return tags;
}

}  // namespace evtrap
