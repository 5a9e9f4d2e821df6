#include <doctest.h>

#include <cmath>
#include <random>

#include "evtrap/errors.hpp"
#include "evtrap/potentials.hpp"
#include "support.hpp"

using namespace evtrap;
using evtrap::testing::calibrated_stack;
using evtrap::testing::rel_err;

namespace {

EvanescentField field(double det_mhz, double sat) {
  AtomSpecies atom;
  EvanescentField f;
  f.detuning_f1 = angular(det_mhz * MHz);
  f.i0 = sat * atom.i_sat;
  return f;
}

PotentialStack bare_standing_wave(double r, double u_mhz) {
  PotentialStack s;
  s.include_gravity = false;
  s.tweezer.r_refl = r;
  s.tweezer.phi_refl = pi;
  s.tweezer.u_inc = energy_from_hz(u_mhz * MHz);
  return s;
}

}  // namespace

TEST_CASE("atom constants") {
  AtomSpecies a;
  CHECK(a.branch_to_f1 + a.branch_to_f2 == doctest::Approx(1.0).epsilon(1e-15).scale(0.0));
  CHECK(rel_err(a.recoil_energy(), 0.5 * a.mass * a.recoil_velocity() * a.recoil_velocity()) < 1e-12);
  CHECK(hz_from_energy(a.recoil_energy()) == doctest::Approx(3770.9758030434848).epsilon(1e-9).scale(0.0));
  CHECK(a.free_space_lifetime() == doctest::Approx(26.26319192935567e-9).epsilon(1e-9).scale(0.0));
  a.branch_to_f1 = 0.8;
  CHECK_THROWS_AS(a.validate(), DomainError);
}

TEST_CASE("evanescent potential") {
  AtomSpecies atom;
  EvanescentField f = field(250.0, 4e5);

  SUBCASE("surface value") {
    double u = hz_from_energy(evanescent_potential(0.0, HyperfineState::F1, f, atom));
    CHECK(rel_err(u, 7343641260.2232642597) < 1e-9);
  }
  SUBCASE("zero field") {
    EvanescentField z = f;
    z.i0 = 0.0;
    for (double x : {0.0, 50e-9, 1e-6})
      for (auto s : {HyperfineState::F1, HyperfineState::F2})
        CHECK(evanescent_potential(x, s, z, atom) == 0.0);
  }
  SUBCASE("far field vanishes") {
    CHECK(std::abs(evanescent_potential(20e-6, HyperfineState::F1, f, atom)) < 1e-40);
  }
  SUBCASE("detuning offset between hyperfine states is exact") {
    CHECK(f.detuning(HyperfineState::F2, atom) - f.detuning(HyperfineState::F1, atom) ==
          two_pi * atom.hyperfine_splitting);
  }
  SUBCASE("red detuning is attractive") {
    EvanescentField r = field(-250.0, 4e5);
    CHECK(evanescent_potential(0.0, HyperfineState::F1, r, atom) < 0.0);
  }
}

TEST_CASE("property: evanescent self-similarity") {
  AtomSpecies atom;
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ux(0.0, 600e-9), ud(0.0, 600e-9), udet(-400.0, 400.0);
  for (int i = 0; i < 1000; ++i) {
    EvanescentField f = field(udet(gen), 1e5);
    double x = ux(gen), d = ud(gen);
    for (auto s : {HyperfineState::F1, HyperfineState::F2}) {
      double a = evanescent_potential(x, s, f, atom);
      double b = evanescent_potential(x + d, s, f, atom);
      if (a == 0.0) continue;
      REQUIRE(rel_err(b, a * std::exp(-2.0 * d / f.lambda_ev)) < 1e-12);
    }
    double a = evanescent_potential(x, HyperfineState::F1, f, atom);
    double b = evanescent_potential(x + f.lambda_ev / 2, HyperfineState::F1, f, atom);
    if (a != 0.0) REQUIRE(rel_err(b / a, std::exp(-1.0)) < 1e-12);
  }
}

TEST_CASE("property: hyperfine suppression") {
  AtomSpecies atom;
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> ux(0.0, 1e-6), udet(0.0, 300.0), us(1.0, 1e8);
  for (int i = 0; i < 1000; ++i) {
    EvanescentField f = field(udet(gen), us(gen));
    double x = ux(gen);
    double u1 = evanescent_potential(x, HyperfineState::F1, f, atom);
    double u2 = evanescent_potential(x, HyperfineState::F2, f, atom);
    if (u1 == 0.0) continue;
    REQUIRE(std::abs(u2) < std::abs(u1));
  }
}

TEST_CASE("tweezer potential") {
  TweezerField tw;
  tw.u_inc = energy_from_hz(10.0 * MHz);
  double lam = tw.wavelength;

  SUBCASE("no reflection is flat") {
    tw.r_refl = 0.0;
    for (double x : {0.0, 100e-9, 333e-9, 1e-6}) CHECK(tweezer_potential(x, tw) == -tw.u_inc);
  }
  SUBCASE("full reflection with pi phase") {
    tw.r_refl = 1.0;
    tw.phi_refl = pi;
    CHECK(std::abs(tweezer_potential(0.0, tw)) < 1e-15 * tw.u_inc);
    CHECK(rel_err(tweezer_potential(lam / 4, tw), -4.0 * tw.u_inc) < 1e-12);
  }
  SUBCASE("half reflection extremum") {
    tw.r_refl = 0.5;
    tw.phi_refl = pi;
    CHECK(rel_err(tweezer_potential(lam / 4, tw), -2.25 * tw.u_inc) < 1e-12);
    for (double x = 0.0; x < lam; x += 1e-9) REQUIRE(tweezer_potential(x, tw) >= -2.25 * tw.u_inc * (1 + 1e-12));
  }
  SUBCASE("always attractive") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      tw.r_refl = u(gen);
      tw.phi_refl = two_pi * u(gen);
      REQUIRE(tweezer_potential(2e-6 * u(gen), tw) <= 0.0);
    }
  }
}

TEST_CASE("Casimir-Polder") {
  SurfaceModel s;
  s.c3 = energy_from_hz(900.0) * 1e-18;
  CHECK(hz_from_energy(casimir_polder(100e-9, s)) == doctest::Approx(-900e3).epsilon(1e-12).scale(0.0));
  for (double x : {6e-9, 40e-9, 300e-9})
    CHECK(rel_err(casimir_polder(2 * x, s), casimir_polder(x, s) / 8.0) < 1e-14);
  CHECK_THROWS_AS(casimir_polder(4e-9, s), DomainError);
  SurfaceModel z;
  CHECK(casimir_polder(50e-9, z) == 0.0);
}

TEST_CASE("gravity term") {
  PotentialStack s;
  s.surface.c3 = 0.0;
  s.tweezer.u_inc = 0.0;
  PotentialTerms t = potential_terms(200e-9, HyperfineState::F2, s);
  CHECK(t.evanescent == 0.0);
  CHECK(t.tweezer == 0.0);
  CHECK(t.casimir_polder == 0.0);
  CHECK(hz_from_energy(t.gravity) == doctest::Approx(-427.3244339574680).epsilon(1e-9).scale(0.0));
  s.include_gravity = false;
  CHECK(total_potential(200e-9, HyperfineState::F2, s) == 0.0);
}

TEST_CASE("property: total potential is the sum of its terms") {
  PotentialStack s = evtrap::testing::loading_stack(175.0, 3e5);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ux(5e-9, 2e-6);
  for (int i = 0; i < 1000; ++i) {
    double x = ux(gen);
    for (auto f : {HyperfineState::F1, HyperfineState::F2}) {
      double sum = evanescent_potential(x, f, s.evanescent, s.atom) + tweezer_potential(x, s.tweezer) +
                   casimir_polder(x, s.surface) - s.atom.mass * s.gravity_accel * x;
      REQUIRE(total_potential(x, f, s) == sum);
      REQUIRE(potential_terms(x, f, s).total() == sum);
    }
  }
}

TEST_CASE("gradient matches finite differences") {
  PotentialStack s = evtrap::testing::loading_stack(175.0, 3e5);
  for (double x : {20e-9, 90e-9, 180e-9, 400e-9, 1.5e-6})
    for (auto f : {HyperfineState::F1, HyperfineState::F2}) {
      double h = 1e-12;
      double fd = (total_potential(x + h, f, s) - total_potential(x - h, f, s)) / (2 * h);
      CHECK(rel_err(potential_gradient(x, f, s), fd) < 1e-5);
    }
}

TEST_CASE("trap minimum of the pure standing wave") {
  PotentialStack s = bare_standing_wave(1.0, 10.0);
  s.surface.c3 = 0.0;
  TrapMinimum m = find_trap_minimum(s, HyperfineState::F2, {5e-9, 400e-9});
  CHECK(std::abs(m.x - 208.75e-9) < 0.01e-9);

  SUBCASE("Casimir-Polder pulls the minimum toward the surface") {
    PotentialStack cp = s;
    cp.surface.c3 = energy_from_hz(900.0) * 1e-18;
    TrapMinimum m2 = find_trap_minimum(cp, HyperfineState::F2, {5e-9, 400e-9});
    CHECK(m2.x < m.x);
  }
  SUBCASE("flat potential has no minimum") {
    PotentialStack flat = bare_standing_wave(0.0, 10.0);
    CHECK_THROWS_AS(find_trap_minimum(flat, HyperfineState::F2, {5e-9, 400e-9}), NoMinimum);
    CHECK_THROWS_AS(trap_metrics(flat, HyperfineState::F2), NoMinimum);
  }
}

TEST_CASE("property: trap frequency of the pure standing wave") {
  // U = -2u (1 - cos 2kx) near the antinode; U'' = 2u (2k)^2.
  PotentialStack s = bare_standing_wave(1.0, 10.0);
  s.surface.c3 = 0.0;
  TrapMetrics m = trap_metrics(s, HyperfineState::F2);
  CHECK(rel_err(m.freq_x, 725820.376853518) < 1e-3);
  for (double u : {1.0, 5.0, 40.0}) {
    PotentialStack t = bare_standing_wave(1.0, u);
    t.surface.c3 = 0.0;
    double k = t.tweezer.wavenumber();
    double f = std::sqrt(2.0 * t.tweezer.u_inc * 4 * k * k / t.atom.mass) / two_pi;
    CHECK(rel_err(trap_metrics(t, HyperfineState::F2).freq_x, f) < 1e-3);
  }
}

TEST_CASE("calibrated stack") {
  PotentialStack s = calibrated_stack();
  TrapMetrics m = trap_metrics(s, HyperfineState::F2);
  CHECK(std::abs(m.x_min - 180e-9) < 2e-9);
  CHECK(rel_err(m.freq_x, 650e3) < 0.01);
  CHECK(m.x_min > s.surface.x_contact);
  CHECK(m.depth_to_vacuum >= 0.0);
  CHECK(m.barrier_to_surface >= 0.0);
  CHECK(m.freq_x >= 0.0);
  // Frozen outcome of the calibration.
  CHECK(hz_from_energy(m.barrier_to_surface) == doctest::Approx(16.27e6).epsilon(1e-3).scale(0.0));
  CHECK(hz_from_energy(m.depth_to_vacuum) == doctest::Approx(32.72e6).epsilon(1e-3).scale(0.0));
  CHECK(hz_from_energy(s.tweezer.u_inc) == doctest::Approx(20.366e6).epsilon(1e-3).scale(0.0));
}

TEST_CASE("blue loading field raises the F1 surface barrier above F2") {
  PotentialStack s = evtrap::testing::loading_stack(250.0, 1e4);
  TrapMetrics m1 = trap_metrics(s, HyperfineState::F1);
  TrapMetrics m2 = trap_metrics(s, HyperfineState::F2);
  CHECK(m1.barrier_to_surface > m2.barrier_to_surface);
}

TEST_CASE("calibration") {
  PotentialStack tmpl;
  tmpl.surface.c3 = energy_from_hz(900.0) * 1e-18;
  tmpl.tweezer.r_refl = 0.4;
  tmpl.tweezer.u_inc = energy_from_hz(20.0 * MHz);

  SUBCASE("distance only") {
    CalibrationTargets t;
    t.x_min = 180e-9;
    CalibrationResult r = calibrate_tweezer(t, tmpl);
    CHECK(std::abs(r.metrics.x_min - 180e-9) < 2e-9);
  }
  SUBCASE("frequency only") {
    CalibrationTargets t;
    t.freq_x = 650e3;
    CalibrationResult r = calibrate_tweezer(t, tmpl);
    CHECK(rel_err(r.metrics.freq_x, 650e3) < 0.01);
  }
  SUBCASE("beyond the first fringe is infeasible") {
    PotentialStack sw = bare_standing_wave(1.0, 10.0);
    sw.surface.c3 = 0.0;
    CalibrationTargets t;
    t.x_min = 500e-9;
    CHECK_THROWS_AS(calibrate_tweezer(t, sw), CalibrationFailed);
  }
  SUBCASE("no reflection") {
    PotentialStack flat = tmpl;
    flat.tweezer.r_refl = 0.0;
    CalibrationTargets t;
    t.x_min = 180e-9;
    CHECK_THROWS_AS(calibrate_tweezer(t, flat), CalibrationFailed);
  }
}

TEST_CASE("property: trap distance is monotone in wavelength") {
  PotentialStack s = calibrated_stack();
  double prev = 0.0;
  for (int i = 0; i <= 30; ++i) {
    PotentialStack t = s;
    t.tweezer.wavelength = (815.0 + i) * 1e-9;
    double x = trap_metrics(t, HyperfineState::F2).x_min;
    if (i > 0) REQUIRE(x > prev);
    prev = x;
  }
}

TEST_CASE("stack validation") {
  PotentialStack s;
  s.tweezer.r_refl = 1.5;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s.tweezer.r_refl = 0.5;
  s.surface.x_contact = 0.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
}
