#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "evtrap/cli.hpp"
#include "evtrap/config.hpp"
#include "evtrap/errors.hpp"
#include "support.hpp"

using namespace evtrap;
using evtrap::testing::slurp;
using evtrap::testing::tmp_dir;
namespace fs = std::filesystem;

namespace {

const std::string kDefault = std::string(EVTRAP_SOURCE_DIR) + "/configs/default.toml";

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

// The default config with one line replaced.
std::string replace_line(const std::string& text, const std::string& key_prefix, const std::string& replacement) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  bool done = false;
  while (std::getline(in, line)) {
    if (!done && line.rfind(key_prefix, 0) == 0) {
      out << replacement << '\n';
      done = true;
    } else {
      out << line << '\n';
    }
  }
  REQUIRE(done);
  return out.str();
}

std::string default_with(const std::string& key_prefix, const std::string& replacement) {
  return replace_line(slurp(kDefault), key_prefix, replacement);
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("default config parses and resolves units") {
  Config c = load_config(kDefault);
  CHECK(c.source == kDefault);
  CHECK(c.potential.stack.surface.c3 == doctest::Approx(energy_from_hz(900.0) * 1e-18).epsilon(1e-12).scale(0.0));
  CHECK(c.potential.stack.tweezer.r_refl == 0.4);
  CHECK(c.potential.targets.x_min == doctest::Approx(180e-9).epsilon(1e-12).scale(0.0));
  CHECK(c.scan.detuning_mhz.values().size() == 21);
  CHECK(c.tags.cycle.n_pulses == 8);
  CHECK(c.tags.g2.tau_bin == 10);
  CHECK(c.resonator.params.kappa_ex == doctest::Approx(1.15e9).epsilon(1e-12).scale(0.0));
}

TEST_CASE("config errors") {
  SUBCASE("unknown key reports its line") {
    try {
      parse_config("[scan]\nn_traj = 10\nbogus = 1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
  }
  SUBCASE("unknown section") { CHECK_THROWS_AS(parse_config("[nonsense]\nx = 1\n"), ConfigError); }
  SUBCASE("syntax error reports its line") {
    try {
      parse_config("[scan]\n\nn_traj = = 3\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("wrong type") { CHECK_THROWS_AS(parse_config("[scan]\nn_traj = \"many\"\n"), ConfigError); }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(parse_config("[potential]\nreflectivity = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[scan]\nn_traj = 0\n"), ConfigError);
  }
  SUBCASE("zero-size grid") {
    CHECK_THROWS_AS(parse_config("[scan]\ndetuning_mhz = { lo = -100.0, hi = 400.0, n = 0 }\n"), ConfigError);
  }
  SUBCASE("histogram bin must divide the period") {
    CHECK_THROWS_AS(parse_config("[tags]\nhist_bin_ns = 30000\n"), ConfigError);
  }
  SUBCASE("tau bin must divide the detection window") {
    CHECK_THROWS_AS(parse_config("[tags]\ntau_bin_ns = 3000\n"), ConfigError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_config("/nonexistent/evtrap.toml"), IoError); }
}

TEST_CASE("grid specs") {
  GridSpec g = GridSpec::logarithmic(1e3, 1e8, 21);
  auto v = g.values();
  REQUIRE(v.size() == 21);
  CHECK(v.front() == 1e3);
  CHECK(v.back() == 1e8);
  CHECK(v[4] == doctest::Approx(1e4).epsilon(1e-12).scale(0.0));
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] / v[i - 1] == doctest::Approx(std::pow(10.0, 0.25)).epsilon(1e-12).scale(0.0));

  GridSpec l = GridSpec::linear(-100.0, 400.0, 21);
  auto w = l.values();
  CHECK(w.front() == -100.0);
  CHECK(w.back() == 400.0);
  CHECK(w[1] == doctest::Approx(-75.0).epsilon(1e-14).scale(0.0));
  CHECK(GridSpec::linear(3.0, 7.0, 1).values() == std::vector<double>{3.0});
  GridSpec e;
  e.list = {1.0, 5.0};
  CHECK(e.values() == std::vector<double>{1.0, 5.0});
}

TEST_CASE("cli exit codes") {
  auto dir = tmp_dir("cli_codes");
  CHECK(cli({"--version"}).code == kExitOk);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);

  write_file(dir / "bad.toml", "[scan]\nbogus = 1\n");
  auto r = cli({"-c", (dir / "bad.toml").string(), "-o", (dir / "o1").string(), "potential"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("bad.toml:2") != std::string::npos);

  CHECK(cli({"-c", (dir / "missing.toml").string(), "-o", (dir / "o2").string(), "potential"}).code == kExitIo);

  write_file(dir / "r0.toml",
             replace_line(default_with("reflectivity", "reflectivity = 0.0"), "calibrate", "calibrate = false"));
  r = cli({"-c", (dir / "r0.toml").string(), "-o", (dir / "o3").string(), "potential"});
  CHECK(r.code == kExitNumerical);
  CHECK(r.err.find("NoMinimum") != std::string::npos);

  write_file(dir / "r0c.toml", default_with("reflectivity", "reflectivity = 0.0"));
  r = cli({"-c", (dir / "r0c.toml").string(), "-o", (dir / "o4").string(), "potential"});
  CHECK(r.code == kExitNumerical);

  CHECK(cli({"-c", kDefault, "-o", (dir / "o5").string(), "tags", "analyze", (dir / "none.bin").string()}).code ==
        kExitIo);
  write_file(dir / "bad.csv", "detuning,transmission\n0,1\n");
  CHECK(cli({"-c", kDefault, "-o", (dir / "o6").string(), "resonator", "fit", (dir / "bad.csv").string()}).code ==
        kExitIo);
  write_file(dir / "ragged.csv", "detuning_GHz,transmission\n0,1\n1\n");
  CHECK(cli({"-c", kDefault, "-o", (dir / "o7").string(), "resonator", "fit", (dir / "ragged.csv").string()}).code ==
        kExitIo);
  write_file(dir / "odd.bin", "12345");
  CHECK(cli({"-c", kDefault, "-o", (dir / "o8").string(), "tags", "g2", (dir / "odd.bin").string()}).code == kExitIo);

  CHECK(cli({"-c", kDefault, "-o", (dir / "o9").string(), "--traj", "0", "scan"}).code == kExitConfig);
  setenv("EVTRAP_THREADS", "lots", 1);
  CHECK(cli({"-c", kDefault, "-o", (dir / "o10").string(), "potential"}).code == kExitConfig);
  unsetenv("EVTRAP_THREADS");
}

TEST_CASE("potential outputs are reproducible") {
  auto dir = tmp_dir("cli_potential");
  auto a = cli({"-c", kDefault, "-o", (dir / "a").string(), "potential"});
  auto b = cli({"-c", kDefault, "-o", (dir / "b").string(), "potential"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  for (const char* f : {"potential_profile.csv", "potential_metrics.json", "potential_sweep.csv"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  auto m = read_json(dir / "a" / "potential_metrics.json");
  auto manifest = read_json(dir / "a" / "manifest.json");
  CHECK(manifest["tool"] == "evtrap");
  CHECK(manifest["command"] == "potential");
  CHECK(manifest["outputs"].size() >= 3);
  std::string ma = slurp(dir / "a" / "manifest.json"), mb = slurp(dir / "b" / "manifest.json");
  // Manifests differ only in the output directory, which does not appear in them.
  CHECK(ma == mb);
  CHECK(m.dump().find("x_min") != std::string::npos);
}

TEST_CASE("scan is independent of the thread count") {
  auto dir = tmp_dir("cli_scan");
  auto a = cli({"-c", kDefault, "-o", (dir / "t1").string(), "--traj", "3", "--threads", "1", "scan"});
  auto b = cli({"-c", kDefault, "-o", (dir / "t3").string(), "--traj", "3", "--threads", "3", "scan"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  std::string sa = slurp(dir / "t1" / "scan.csv");
  CHECK(sa == slurp(dir / "t3" / "scan.csv"));
  CHECK(slurp(dir / "t1" / "scan_summary.json") == slurp(dir / "t3" / "scan_summary.json"));
  // Header plus 21 x 21 cells.
  CHECK(std::count(sa.begin(), sa.end(), '\n') == 1 + 21 * 21);
  auto c = cli({"-c", kDefault, "-o", (dir / "s2").string(), "--traj", "3", "--seed", "2", "scan"});
  REQUIRE(c.code == kExitOk);
  CHECK(slurp(dir / "s2" / "scan.csv") != sa);
}

TEST_CASE("tags pipeline") {
  auto dir = tmp_dir("cli_tags");
  std::string tags = (dir / "tags.bin").string();
  REQUIRE(cli({"-c", kDefault, "-o", dir.string(), "tags", "synth", tags}).code == kExitOk);
  REQUIRE(fs::file_size(tags) % 9 == 0);

  REQUIRE(cli({"-c", kDefault, "-o", (dir / "g2").string(), "tags", "g2", tags}).code == kExitOk);
  auto g = read_json(dir / "g2" / "tags_g2.json");
  CHECK(g["g2_0"].get<double>() < 0.5);
  CHECK(g["conditioned_pulses"].get<long>() > 0);

  REQUIRE(cli({"-c", kDefault, "-o", (dir / "an").string(), "tags", "analyze", tags}).code == kExitOk);
  auto ev = read_json(dir / "an" / "tags_events.json");
  CHECK(ev["n_cycles"] == 1000);
  CHECK(ev["attempts"] == 8000);
  double p = ev["trapping_probability"].get<double>();
  CHECK(p > 0.1);
  CHECK(p < 0.3);
  CHECK(ev["false_positive_rate"].get<double>() < 0.02);

  SUBCASE("csv and binary inputs agree") {
    std::string csv = (dir / "tags.csv").string();
    REQUIRE(cli({"-c", kDefault, "-o", dir.string(), "tags", "synth", csv}).code == kExitOk);
    REQUIRE(cli({"-c", kDefault, "-o", (dir / "g2csv").string(), "tags", "g2", csv}).code == kExitOk);
    CHECK(slurp(dir / "g2csv" / "tags_g2.csv") == slurp(dir / "g2" / "tags_g2.csv"));
  }
  SUBCASE("empty tag file gives zeroed histograms") {
    write_file(dir / "empty.bin", "");
    auto r = cli({"-c", kDefault, "-o", (dir / "empty").string(), "tags", "analyze", (dir / "empty.bin").string()});
    REQUIRE(r.code == kExitOk);
    auto e = read_json(dir / "empty" / "tags_events.json");
    CHECK(e["n_tags"] == 0);
    CHECK(e["events"] == 0);
    std::istringstream h(slurp(dir / "empty" / "tags_histogram.csv"));
    std::string line;
    std::getline(h, line);
    CHECK(line == "t_ns,a,b,sum");
    int rows = 0;
    while (std::getline(h, line)) {
      ++rows;
      REQUIRE(line.substr(line.find(',')) == ",0,0,0");
    }
    CHECK(rows == 5000);
  }
}

TEST_CASE("lifetime and survival reports") {
  auto dir = tmp_dir("cli_fits");
  std::ostringstream csv;
  csv << "t_ns,signal,background\n";
  for (int i = 0; i < 100; ++i) {
    double t = i + 0.5;
    csv << t << ',' << 1200.0 * std::exp(-t / 16.3) + 5.0 << ",5\n";
  }
  write_file(dir / "life.csv", csv.str());
  REQUIRE(cli({"-c", kDefault, "-o", (dir / "l").string(), "tags", "lifetime", (dir / "life.csv").string()}).code ==
          kExitOk);
  auto l = read_json(dir / "l" / "tags_lifetime.json");
  CHECK(l["tau_ns"].get<double>() == doctest::Approx(16.3).epsilon(1e-3).scale(0.0));
  CHECK(l["C"].get<double>() == doctest::Approx(0.6112).epsilon(2e-3).scale(0.0));
  CHECK(l.contains("g_MHz"));

  std::ostringstream sv;
  sv << "tau_s,signal,sigma\n";
  for (int i = 0; i < 30; ++i) {
    double t = std::pow(10.0, -5.0 + 5.0 * i / 29.0);
    sv << t << ',' << std::exp(-t / 0.01) << ",0.01\n";
  }
  write_file(dir / "surv.csv", sv.str());
  REQUIRE(cli({"-c", kDefault, "-o", (dir / "s").string(), "tags", "survival", (dir / "surv.csv").string()}).code ==
          kExitOk);
  auto s = read_json(dir / "s" / "tags_survival.json");
  CHECK(s["t50_s"].get<double>() == doctest::Approx(0.01 * std::log(2.0)).epsilon(0.05).scale(0.0));
  CHECK(s["t10_s"].get<double>() == doctest::Approx(0.01 * std::log(10.0)).epsilon(0.05).scale(0.0));
}

TEST_CASE("resonator commands") {
  auto dir = tmp_dir("cli_resonator");
  REQUIRE(cli({"-c", kDefault, "-o", (dir / "m").string(), "resonator", "model"}).code == kExitOk);
  auto m = read_json(dir / "m" / "resonator_report.json");
  CHECK(m.dump().find("finesse") != std::string::npos);
  std::string spectrum = std::string(EVTRAP_SOURCE_DIR) + "/data/resonator_spectrum.csv";
  REQUIRE(cli({"-c", kDefault, "-o", (dir / "f").string(), "resonator", "fit", spectrum}).code == kExitOk);
  auto f = read_json(dir / "f" / "resonator_fit.json");
  CHECK(f.dump().find("kappa_ex") != std::string::npos);
}
