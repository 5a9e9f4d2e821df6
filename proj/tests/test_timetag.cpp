#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "evtrap/errors.hpp"
#include "evtrap/resonator.hpp"
#include "evtrap/rng.hpp"
#include "evtrap/timetag.hpp"
#include "support.hpp"

using namespace evtrap;
using evtrap::testing::rel_err;
using evtrap::testing::tmp_dir;

namespace {

// One pulse per 100 us cycle with a 2 us detection window.
CycleSpec small_cycle() {
  CycleSpec c;
  c.period = 100'000;
  c.sequence_offset = 0;
  c.pulse_period = 100'000;
  c.loading = {0, 1'000};
  c.dark = {1'000, 1'000};
  c.excitation = {2'000, 4'000};
  c.n_pulses = 1;
  c.n_pulses_used = 1;
  c.detection_window = 2'000;
  c.false_positive_window = 2'000;
  return c;
}

std::vector<TimeTag> merge(std::vector<TimeTag> a, const std::vector<TimeTag>& b) {
  a.insert(a.end(), b.begin(), b.end());
  sort_tags(a);
  return a;
}

std::vector<TimeTag> swap_channels(std::vector<TimeTag> tags) {
  for (auto& t : tags) t.channel = t.channel == Channel::A ? Channel::B : Channel::A;
  sort_tags(tags);
  return tags;
}

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i / (n - 1)));
  return v;
}

}  // namespace

TEST_CASE("cycle validation") {
  CycleSpec c;
  CHECK_NOTHROW(c.validate());
  CycleSpec bad = c;
  bad.dark.offset = 400'000;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.n_pulses = 30;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.detection_window = 3'000'000;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.n_pulses_used = 9;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK(c.detection(2).offset == 2 * c.pulse_period + 501'000);
  CHECK(c.false_positive(0).offset == 2'001'000);
}

TEST_CASE("tag file round trips") {
  auto dir = tmp_dir("tag_io");
  std::vector<TimeTag> tags{{Channel::A, 0}, {Channel::B, 17}, {Channel::A, 1ULL << 40}, {Channel::B, 1ULL << 40}};
  write_tags((dir / "t.bin").string(), tags);
  write_tags((dir / "t.csv").string(), tags);
  CHECK(read_tags((dir / "t.bin").string()) == tags);
  CHECK(read_tags((dir / "t.csv").string()) == tags);
  CHECK(std::filesystem::file_size(dir / "t.bin") == 36);

  write_tags((dir / "empty.bin").string(), {});
  CHECK(read_tags((dir / "empty.bin").string()).empty());

  {
    std::ofstream out(dir / "short.bin", std::ios::binary);
    out << "abcdefgh";
  }
  CHECK_THROWS_AS(read_tags((dir / "short.bin").string()), IoError);
  {
    std::ofstream out(dir / "bad.csv");
    out << "channel,t_ns\nA,10\nC,20\n";
  }
  CHECK_THROWS_AS(read_tags((dir / "bad.csv").string()), IoError);
  {
    std::ofstream out(dir / "neg.csv");
    out << "channel,t_ns\nA,-10\n";
  }
  CHECK_THROWS_AS(read_tags((dir / "neg.csv").string()), IoError);
  CHECK_THROWS_AS(read_tags((dir / "missing.bin").string()), IoError);
}

TEST_CASE("sorting, validation and dead time") {
  std::vector<TimeTag> tags{{Channel::B, 30}, {Channel::A, 30}, {Channel::A, 5}};
  CHECK_THROWS_AS(validate_tags(tags), DomainError);
  sort_tags(tags);
  CHECK(tags[0].t == 5);
  CHECK(tags[1].channel == Channel::A);
  CHECK_NOTHROW(validate_tags(tags));

  std::vector<TimeTag> burst{{Channel::A, 0}, {Channel::B, 5}, {Channel::A, 10}, {Channel::A, 25}, {Channel::B, 12}};
  sort_tags(burst);
  auto kept = apply_dead_time(burst, 20);
  std::vector<TimeTag> expect{{Channel::A, 0}, {Channel::B, 5}, {Channel::A, 25}};
  CHECK(kept == expect);
  CHECK(apply_dead_time(burst, 0) == burst);
}

TEST_CASE("cycle counting") {
  CycleSpec c = small_cycle();
  std::vector<TimeTag> tags{{Channel::A, 10}, {Channel::A, 250'000}};
  CHECK(count_cycles(tags, c) == 3);
  CHECK(count_cycles(tags, c, 299'999) == 2);
  CHECK(count_cycles(tags, c, 300'000) == 3);
  CHECK(count_cycles({}, c) == 0);
}

TEST_CASE("folding") {
  CycleSpec c = small_cycle();

  SUBCASE("empty input") {
    FoldedHistogram h = fold_histogram({}, c, 1'000, 5);
    CHECK(h.sum.size() == 100);
    CHECK(std::all_of(h.sum.begin(), h.sum.end(), [](auto v) { return v == 0; }));
  }
  SUBCASE("one tag per cycle at fixed phase") {
    std::vector<TimeTag> tags;
    for (std::uint64_t k = 0; k < 40; ++k) tags.push_back({k % 2 ? Channel::B : Channel::A, k * c.period + 2'345});
    FoldedHistogram h = fold_histogram(tags, c, 1'000, 40);
    CHECK(h.sum[2] == 40);
    CHECK(h.a[2] == 20);
    CHECK(h.b[2] == 20);
    CHECK(std::accumulate(h.sum.begin(), h.sum.end(), std::uint64_t{0}) == 40);
  }
  SUBCASE("homogeneous Poisson rate is uniform") {
    const std::uint64_t n_cycles = 2000;
    auto tags = synth_poisson_stream(2e5, n_cycles * c.period, 3);
    FoldedHistogram h = fold_histogram(tags, c, 2'000, n_cycles);
    double mean = 2e5 * 2e-6 * n_cycles;
    double chi2 = 0.0;
    for (auto v : h.sum) chi2 += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean) / mean;
    boost::math::chi_squared dist(static_cast<double>(h.sum.size()));
    CHECK(1.0 - boost::math::cdf(dist, chi2) > 0.01);
  }
  SUBCASE("property: folding preserves counts in the region") {
    auto tags = merge(synth_poisson_stream(1e5, 50 * c.period, 4, Channel::A, 0),
                      synth_poisson_stream(1e5, 50 * c.period, 4, Channel::B, 1));
    for (std::uint64_t start : {0ULL, 10'000ULL, 37'000ULL}) {
      std::uint64_t len = 40'000;
      FoldedHistogram h = fold_histogram(tags, c.period, 500, start, len, 50);
      std::uint64_t expect = 0;
      for (const auto& t : tags) {
        std::uint64_t ph = t.t % c.period;
        if (t.t / c.period < 50 && ph >= start && ph < start + len) ++expect;
      }
      CHECK(std::accumulate(h.sum.begin(), h.sum.end(), std::uint64_t{0}) == expect);
      for (std::size_t k = 0; k < h.sum.size(); ++k) REQUIRE(h.sum[k] == h.a[k] + h.b[k]);
    }
  }
  SUBCASE("bin must divide the region") {
    CHECK_THROWS_AS(fold_histogram({}, c.period, 300, 0, 1000, 1), DomainError);
    CHECK_THROWS_AS(fold_histogram({}, c.period, 100, 99'950, 100, 1), DomainError);
  }
}

TEST_CASE("event detection") {
  CycleSpec c = small_cycle();

  SUBCASE("threshold") {
    std::vector<TimeTag> tags{{Channel::A, 2'100}, {Channel::B, 2'900},            // cycle 0: two
                              {Channel::A, c.period + 2'500},                       // cycle 1: one
                              {Channel::A, 2 * c.period + 1'500}};                  // cycle 2: outside
    EventTable ev = detect_events(tags, c, 3, 2);
    REQUIRE(ev.pulses.size() == 3);
    CHECK(ev.pulses[0].event);
    CHECK(ev.pulses[0].count == 2);
    CHECK(ev.pulses[0].count_a == 1);
    CHECK_FALSE(ev.pulses[1].event);
    CHECK(ev.pulses[2].count == 0);
    CHECK(ev.events == 1);
    CHECK(ev.attempts == 3);
    CHECK(ev.trapping_probability == doctest::Approx(1.0 / 3.0));
    CHECK(ev.conditioned(0, 0));
    CHECK_FALSE(ev.conditioned(1, 0));
    for (const auto& p : ev.pulses) CHECK(p.event == (p.count >= ev.threshold));
  }
  SUBCASE("Poisson background false-positive rate") {
    CycleSpec d;  // default 8-pulse sequence
    const std::uint64_t n_cycles = 500;
    const double r = 1e3;
    auto tags = merge(synth_poisson_stream(r, n_cycles * d.period, 21, Channel::A, 0),
                      synth_poisson_stream(r, n_cycles * d.period, 21, Channel::B, 1));
    EventTable ev = detect_events(tags, d, n_cycles, 2);
    double x = 2.0 * r * 500e-6;
    double p = 1.0 - std::exp(-x) * (1.0 + x);
    double sigma = std::sqrt(p * (1 - p) / static_cast<double>(ev.attempts));
    CHECK(std::abs(ev.false_positive_rate - p) < 3 * sigma);
    CHECK(std::abs(ev.trapping_probability - p) < 3 * sigma);
  }
}

TEST_CASE("photon-number statistics") {
  SUBCASE("geometric input") {
    std::map<int, double> w;
    for (int n = 0; n <= 40; ++n) w[n] = std::exp(-n / 5.0);
    PhotonNumberStats s = photon_number_stats(w, 2);
    CHECK(rel_err(s.n0, 5.0) < 1e-6);
    CHECK(s.residual < 1e-9);
  }
  SUBCASE("single N") {
    std::map<int, double> w{{2, 100.0}};
    CHECK_THROWS_AS(photon_number_stats(w, 2), FitDegenerate);
  }
  SUBCASE("Poissonian counts are visibly non-exponential") {
    std::map<int, double> geo, poi;
    RngStream rng(5);
    for (int i = 0; i < 20000; ++i) {
      geo[static_cast<int>(std::floor(rng.exponential() * 5.0))] += 1.0;
      // Poisson(5) by inversion.
      double u = rng.uniform(), p = std::exp(-5.0), cdf = p;
      int k = 0;
      while (u > cdf) {
        p *= 5.0 / ++k;
        cdf += p;
      }
      poi[k] += 1.0;
    }
    PhotonNumberStats g = photon_number_stats(geo, 2), q = photon_number_stats(poi, 2);
    CHECK(q.residual >= 5.0 * g.residual);
  }
}

TEST_CASE("g2 estimator") {
  CycleSpec c = small_cycle();
  G2Options o{10, 300, false, 77.0, 50.0};

  SUBCASE("stationary limit equals the coincidence-normalised estimate") {
    // Every bin of the detection window is hit equally often over the run: each
    // cycle uses a cyclic shift of the same random bin pattern.
    const std::int64_t nb = 200;
    RngStream rng(12);
    std::vector<int> pa, pb;
    for (int j = 0; j < nb; ++j) {
      if (rng.bernoulli(0.3)) pa.push_back(j);
      if (rng.bernoulli(0.4)) pb.push_back(j);
    }
    std::vector<TimeTag> tags;
    for (std::uint64_t cyc = 0; cyc < static_cast<std::uint64_t>(nb); ++cyc) {
      std::uint64_t w0 = cyc * c.period + c.excitation.offset;
      for (int j : pa) tags.push_back({Channel::A, w0 + ((j + cyc) % nb) * 10 + rng.next_u64() % 10});
      for (int j : pb) tags.push_back({Channel::B, w0 + ((j + cyc) % nb) * 10 + rng.next_u64() % 10});
    }
    sort_tags(tags);
    EventTable ev = detect_events(tags, c, nb, 1);
    REQUIRE(ev.events == nb);
    G2Result g = g2_correlation(tags, c, ev, o);

    // Coincidences counted pair by pair within each cycle; textbook normalisation
    // by mean per-bin occupations and overlap length.
    const double na = static_cast<double>(pa.size()) / nb, nbb = static_cast<double>(pb.size()) / nb;
    for (std::size_t i = 0; i < g.k.size(); ++i) {
      std::int64_t k = g.k[i];
      double coinc = 0.0;
      for (const auto& p : ev.pulses)
        for (const auto& a : p.tags)
          for (const auto& b : p.tags)
            if (a.channel == Channel::A && b.channel == Channel::B) {
              std::int64_t w0 = static_cast<std::int64_t>(p.cycle * c.period + c.excitation.offset);
              std::int64_t ja = (static_cast<std::int64_t>(a.t) - w0) / 10, jb = (static_cast<std::int64_t>(b.t) - w0) / 10;
              coinc += jb - ja == k;
            }
      CHECK(static_cast<double>(g.coincidences[i]) == coinc);
      double textbook = coinc / (static_cast<double>(nb) * na * nbb * static_cast<double>(nb - std::abs(k)));
      REQUIRE(std::abs(g.g2[i] - textbook) <= 1e-12 * std::max(1.0, textbook));
    }
  }
  SUBCASE("independent Poisson streams average to one") {
    const std::uint64_t n_cycles = 4000;
    auto tags = merge(synth_poisson_stream(2e6, n_cycles * c.period, 31, Channel::A, 0),
                      synth_poisson_stream(2e6, n_cycles * c.period, 31, Channel::B, 1));
    EventTable ev = detect_events(tags, c, n_cycles, 2);
    G2Result g = g2_correlation(tags, c, ev, o);
    double sum = 0, var = 0;
    for (std::size_t i = 0; i < g.g2.size(); ++i) {
      sum += g.g2[i];
      var += g.err[i] * g.err[i];
    }
    double n = static_cast<double>(g.g2.size());
    CHECK(std::abs(sum / n - 1.0) < 3.0 * std::sqrt(var) / n);
  }
  SUBCASE("property: channel swap mirrors tau") {
    CycleSpec d;
    EmitterParams ep;
    ep.cycle = d;
    ep.n_cycles = 100;
    ep.detection_efficiency = 0.05;
    ep.residence_time = 30e-6;
    ep.modulation_depth = 0.5;
    ep.background_rate = 200.0;
    auto tags = synth_emitter_stream(ep, 8);
    auto swapped = swap_channels(tags);
    G2Options og{10, 3000, true, 77.0, 50.0};
    G2Result g = g2_correlation(tags, d, detect_events(tags, d, 100), og);
    G2Result s = g2_correlation(swapped, d, detect_events(swapped, d, 100), og);
    std::size_t nk = g.k.size();
    for (std::size_t i = 0; i < nk; ++i) {
      std::size_t j = nk - 1 - i;
      REQUIRE(g.coincidences[i] == s.coincidences[j]);
      REQUIRE(g.denominator[i] == s.denominator[j]);
      if (std::isfinite(g.g2[i])) {
        REQUIRE(g.g2[i] == s.g2[j]);
        REQUIRE(g.g2_smooth[i] == s.g2_smooth[j]);
      }
    }
  }
  SUBCASE("property: conditioning on pulses without photons") {
    CycleSpec d;
    EmitterParams ep;
    ep.cycle = d;
    ep.n_cycles = 60;
    ep.detection_efficiency = 0.05;
    ep.residence_time = 30e-6;
    auto tags = synth_emitter_stream(ep, 9);
    EventTable ev = detect_events(tags, d, 60);
    G2Result g = g2_correlation(tags, d, ev, o);
    EventTable more = ev;
    std::vector<std::int64_t> added(static_cast<std::size_t>(d.n_pulses_used), 0);
    for (const auto& p : ev.pulses)
      if (p.count == 0 && added[static_cast<std::size_t>(p.pulse)] < 3) {
        PulseRecord z = p;
        z.event = true;
        more.pulses.push_back(z);
        ++added[static_cast<std::size_t>(p.pulse)];
      }
    REQUIRE(std::accumulate(added.begin(), added.end(), std::int64_t{0}) > 0);
    G2Result h = g2_correlation(tags, d, more, o);
    CHECK(h.conditioned_pulses > g.conditioned_pulses);
    for (std::size_t i = 0; i < g.k.size(); ++i) {
      REQUIRE(h.coincidences[i] == g.coincidences[i]);
      REQUIRE(h.denominator[i] == g.denominator[i]);
    }
  }
  SUBCASE("errors") {
    EventTable empty;
    CHECK_THROWS_AS(g2_correlation({}, c, empty, o), EmptyCondition);
    G2Options bad{30, 300, false, 77.0, 50.0};
    EventTable one;
    one.pulses.push_back({});
    one.pulses.back().event = true;
    CHECK_THROWS_AS(g2_correlation({}, c, one, bad), DomainError);
  }
}

TEST_CASE("emitter oracle") {
  CycleSpec d;
  EmitterParams ep;
  ep.cycle = d;
  ep.n_cycles = 10000;
  ep.detection_efficiency = 0.1;
  ep.residence_time = 20e-6;
  ep.background_rate = 50.0;
  G2Options og{10, 3000, true, 77.0, 50.0};

  auto g2_at = [](const G2Result& g, double tau) {
    for (std::size_t i = 0; i < g.tau.size(); ++i)
      if (g.tau[i] == tau) return g.g2[i];
    return std::nan("");
  };
  // Mean of g2 over |tau| within 40 ns of the given delay, both signs.
  auto g2_near = [](const G2Result& g, double tau) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < g.tau.size(); ++i)
      if (std::abs(std::abs(g.tau[i]) - tau) <= 40.0 && std::isfinite(g.g2[i])) {
        s += g.g2[i];
        ++n;
      }
    return s / n;
  };
  const double period_ns = 1e9 / ep.modulation_freq;

  SUBCASE("antibunching and modulation bunching") {
    ep.modulation_depth = 0.9;
    auto tags = synth_emitter_stream(ep, 1);
    G2Result g = g2_correlation(tags, d, detect_events(tags, d, ep.n_cycles), og);
    CHECK(g2_at(g, 0.0) < 0.5);
    double peak = 0.0;
    for (std::size_t i = 0; i < g.tau.size(); ++i)
      if (std::abs(g.tau[i]) >= 500 && std::abs(g.tau[i]) <= 2500) peak = std::max(peak, g.g2_smooth[i]);
    CHECK(peak > 1.5);
    CHECK(g2_near(g, period_ns) - g2_near(g, 0.5 * period_ns) > 0.5);
  }
  SUBCASE("finite residence without modulation: bunched but not oscillating") {
    ep.modulation_depth = 0.0;
    auto tags = synth_emitter_stream(ep, 2);
    G2Result g = g2_correlation(tags, d, detect_events(tags, d, ep.n_cycles), og);
    CHECK(g2_at(g, 0.0) < 0.5);
    CHECK(g2_near(g, period_ns) > 1.2);
    CHECK(std::abs(g2_near(g, period_ns) - g2_near(g, 0.5 * period_ns)) < 0.15);
  }
  SUBCASE("whole-window presence without modulation: flat at one beyond the dip") {
    ep.modulation_depth = 0.0;
    ep.residence_time = 0.0;
    ep.n_cycles = 200;
    ep.detection_efficiency = 0.03;
    auto tags = synth_emitter_stream(ep, 2);
    G2Result g = g2_correlation(tags, d, detect_events(tags, d, ep.n_cycles), og);
    CHECK(g2_at(g, 0.0) < 0.5);
    double sum = 0.0, var = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < g.tau.size(); ++i)
      if (std::abs(g.tau[i]) >= 500 && std::isfinite(g.g2[i])) {
        sum += g.g2[i];
        var += g.err[i] * g.err[i];
        ++n;
      }
    CHECK(std::abs(sum / n - 1.0) < 3.0 * std::sqrt(var) / n + 0.05);
  }
  SUBCASE("determinism") {
    ep.n_cycles = 200;
    CHECK(synth_emitter_stream(ep, 3) == synth_emitter_stream(ep, 3));
    CHECK_FALSE(synth_emitter_stream(ep, 3) == synth_emitter_stream(ep, 4));
  }
}

TEST_CASE("Poisson stream") {
  auto tags = synth_poisson_stream(1e4, 10'000'000'000ULL, 1);
  double n = static_cast<double>(tags.size());
  CHECK(std::abs(n - 1e5) < 3.0 * std::sqrt(1e5));
  CHECK(std::is_sorted(tags.begin(), tags.end(), [](auto& a, auto& b) { return a.t < b.t; }));
  CHECK(synth_poisson_stream(1e4, 1'000'000'000ULL, 2) == synth_poisson_stream(1e4, 1'000'000'000ULL, 2));
}

TEST_CASE("lifetime fit") {
  std::vector<double> t;
  for (int i = 0; i < 100; ++i) t.push_back(i + 0.5);

  SUBCASE("noiseless") {
    std::vector<double> s, b(t.size(), 5.0);
    for (double x : t) s.push_back(1000.0 * std::exp(-x / 16.3) + 2.0 + 5.0);
    LifetimeFit f = fit_decay_lifetime(t, s, b, 10.0);
    CHECK(rel_err(f.tau, 16.3) < 1e-9);
    CHECK(rel_err(f.amplitude, 1000.0) < 1e-9);
    CHECK(std::abs(f.background - 2.0) < 1e-8);
  }
  SUBCASE("free-space lifetime maps to zero cooperativity") {
    std::vector<double> s, b(t.size(), 0.0);
    for (double x : t) s.push_back(500.0 * std::exp(-x / 26.2631919293557));
    LifetimeFit f = fit_decay_lifetime(t, s, b, 10.0);
    CHECK(std::abs(lifetime_to_C(f.tau * 1e-9, 3.03e6)) < 1e-8);
  }
  SUBCASE("matched counts: one-sigma coverage") {
    // About 735 counts per ns at t = 0 over 5 counts of background gives the
    // target 0.4 ns uncertainty.
    int inside = 0;
    double mean_sigma = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
      RngStream rng = RngStream::keyed(16, 3, static_cast<std::uint64_t>(r));
      auto poisson = [&](double mu) {
        // Normal approximation is inadequate for small means; use inversion below 30.
        if (mu > 30.0) return std::max(0.0, std::round(mu + std::sqrt(mu) * rng.normal()));
        double u = rng.uniform(), p = std::exp(-mu), cdf = p;
        int k = 0;
        while (u > cdf && k < 1000) {
          p *= mu / ++k;
          cdf += p;
        }
        return static_cast<double>(k);
      };
      std::vector<double> s, b;
      for (double x : t) {
        s.push_back(poisson(735.0 * std::exp(-x / 16.3) + 10.0));
        b.push_back(poisson(5.0));
      }
      LifetimeFit f = fit_decay_lifetime(t, s, b, 10.0);
      inside += std::abs(f.tau - 16.3) < f.sigma_tau;
      mean_sigma += f.sigma_tau / reps;
    }
    CHECK(mean_sigma == doctest::Approx(0.4).epsilon(0.15).scale(0.0));
    CHECK(inside / static_cast<double>(reps) == doctest::Approx(0.683).epsilon(0.12).scale(0.0));
  }
  SUBCASE("degenerate inputs") {
    std::vector<double> s(t.size(), 5.0), b(t.size(), 5.0);
    CHECK_THROWS_AS(fit_decay_lifetime(t, s, b, 10.0), FitDegenerate);
    CHECK_THROWS_AS(fit_decay_lifetime({1, 2, 3}, {1, 2, 3}, {0, 0, 0}, 0.0), FitDegenerate);
  }
  SUBCASE("histogram overload") {
    FoldedHistogram s, b;
    s.bin = b.bin = 1;
    s.start = b.start = 0;
    for (double x : t) {
      s.sum.push_back(static_cast<std::uint64_t>(std::llround(1e6 * std::exp(-x / 16.3))) + 7);
      b.sum.push_back(7);
    }
    CHECK(fit_decay_lifetime(s, b, 10.0).tau == doctest::Approx(16.3).epsilon(1e-5).scale(0.0));
  }
}

TEST_CASE("survival decay times") {
  SUBCASE("pure exponential") {
    auto tau = logspace(1e-5, 1.0, 30);
    std::vector<double> s, e;
    for (double x : tau) {
      s.push_back(std::exp(-x / 2e-3));
      e.push_back(0.01);
    }
    SurvivalOptions o;
    o.n_boot = 50;
    DecayTimes d = survival_decay_times(tau, s, e, o);
    CHECK(rel_err(d.t50, 2e-3 * std::log(2.0)) < 0.05);
    CHECK(rel_err(d.t10, 2e-3 * std::log(10.0)) < 0.05);
    CHECK(d.t50_err_lo >= 0.0);
    CHECK(d.t50_err_hi >= 0.0);
    CHECK(d.n_boot == 50);
  }
  SUBCASE("logarithmic decay inverts in closed form") {
    auto tau = logspace(1e-5, 10.0, 40);
    const double b = 1.0, a = 1.0 / std::log(1.0 + b / 1e-5);
    std::vector<double> s, e;
    for (double x : tau) {
      s.push_back(a * std::log(1.0 + b / x));
      e.push_back(0.01);
    }
    SurvivalOptions o;
    o.n_boot = 0;
    DecayTimes d = survival_decay_times(tau, s, e, o);
    CHECK(rel_err(d.t50, b / (std::exp(0.5 / a) - 1.0)) < 0.05);
    CHECK(rel_err(d.t10, b / (std::exp(0.1 / a) - 1.0)) < 0.05);
  }
  SUBCASE("millisecond and hundred-millisecond scales") {
    auto tau = logspace(1e-5, 10.0, 40);
    const double b = 0.185, a = 0.5 / std::log(1.0 + b / 1e-3);
    std::vector<double> s, e;
    for (double x : tau) {
      s.push_back(a * std::log(1.0 + b / x));
      e.push_back(0.01);
    }
    SurvivalOptions o;
    o.n_boot = 0;
    DecayTimes d = survival_decay_times(tau, s, e, o);
    CHECK(d.t50 == doctest::Approx(1e-3).epsilon(0.1).scale(0.0));
    CHECK(d.t10 == doctest::Approx(0.1).epsilon(0.1).scale(0.0));
    CHECK(std::log10(d.t10 / d.t50) == doctest::Approx(2.0).epsilon(0.1).scale(0.0));
  }
  SUBCASE("property: bootstrap is deterministic for a seed") {
    auto tau = logspace(1e-5, 1.0, 20);
    std::vector<double> s, e;
    RngStream rng(4);
    for (double x : tau) {
      s.push_back(std::exp(-x / 1e-3) + 0.02 * rng.normal());
      e.push_back(0.02);
    }
    SurvivalOptions o;
    o.n_boot = 100;
    o.seed = 17;
    DecayTimes a = survival_decay_times(tau, s, e, o), b = survival_decay_times(tau, s, e, o);
    CHECK(a.t50_err_lo == b.t50_err_lo);
    CHECK(a.t50_err_hi == b.t50_err_hi);
    CHECK(a.t10_std == b.t10_std);
    o.seed = 18;
    DecayTimes c = survival_decay_times(tau, s, e, o);
    CHECK(c.t50 == a.t50);
    CHECK(c.t50_std != a.t50_std);
  }
  SUBCASE("no crossing") {
    auto tau = logspace(1e-5, 1.0, 20);
    std::vector<double> s(tau.size()), e(tau.size(), 0.01);
    for (std::size_t i = 0; i < tau.size(); ++i) s[i] = 1.0 - 0.02 * static_cast<double>(i);
    CHECK_THROWS_AS(spline_crossing(tau, s, e, 0.1), NoCrossing);
  }
  SUBCASE("insufficient data") {
    auto tau = logspace(1e-3, 1e-2, 10);
    std::vector<double> s(10, 0.5), e(10, 0.01);
    CHECK_THROWS_AS(survival_decay_times(tau, s, e), DomainError);
    auto few = logspace(1e-5, 1.0, 5);
    std::vector<double> s5(5, 0.5), e5(5, 0.01);
    CHECK_THROWS_AS(survival_decay_times(few, s5, e5), DomainError);
  }
}

TEST_CASE("geometric aggregation") {
  GeometricAggregate g = geometric_aggregate({1e-3, 1e-2, 1e-1});
  CHECK(g.geo_mean == doctest::Approx(1e-2).epsilon(1e-12).scale(0.0));
  double sx = std::log(10.0);  // sample std of {-1, 0, 1} in ln(10) units
  CHECK(g.sigma_x == doctest::Approx(sx).epsilon(1e-12).scale(0.0));
  CHECK(g.err_hi == doctest::Approx(1e-2 * (std::exp(sx) - 1.0)).epsilon(1e-12).scale(0.0));
  CHECK(g.err_lo == doctest::Approx(1e-2 * (1.0 - std::exp(-sx))).epsilon(1e-12).scale(0.0));
  CHECK_THROWS_AS(geometric_aggregate({}), DomainError);
  CHECK_THROWS_AS(geometric_aggregate({1.0, -1.0}), DomainError);
}
