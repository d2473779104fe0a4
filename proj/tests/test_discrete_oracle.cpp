#include <doctest.h>

#include <cmath>

#include "ptx/discrete_oracle.hpp"
#include "ptx/errors.hpp"
#include "ptx/estimators.hpp"
#include "ptx/rng.hpp"

#include "test_support.hpp"

using namespace ptx;

TEST_CASE("identification triangle holds on random worlds") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    DiscreteWorld world = random_world(1 + seed % 7, seed);
    const double truth = enumerate_true_tau(world);
    CHECK(std::abs(enumerate_identified(world, IdentFormula::PlugIn) - truth) <= 1e-12);
    CHECK(std::abs(enumerate_identified(world, IdentFormula::IPW) - truth) <= 1e-12);
    CHECK(std::abs(enumerate_identified(world, IdentFormula::OM) - truth) <= 1e-12);
  }
}

TEST_CASE("eif mean-zero, centering, and estimating-equation identities hold") {
  for (std::uint64_t seed = 100; seed < 125; ++seed) {
    DiscreteWorld world = random_world(1 + seed % 6, seed);
    CHECK(enumerate_eif_checks(world).max_gap() <= 1e-12);
  }
}

TEST_CASE("one-sided worlds satisfy the same identities with p0 = 0") {
  for (std::uint64_t seed = 300; seed < 315; ++seed) {
    DiscreteWorld world = random_world(1 + seed % 5, seed, /*one_sided=*/true);
    for (const WorldCell& cell : world.cells) {
      CHECK(cell.q11 == 0.0);
      CHECK(implied_nuisances(cell).p0 == 0.0);
    }
    const double truth = enumerate_true_tau(world);
    CHECK(std::abs(enumerate_identified(world, IdentFormula::PlugIn) - truth) <= 1e-12);
    CHECK(std::abs(enumerate_identified(world, IdentFormula::IPW) - truth) <= 1e-12);
    CHECK(std::abs(enumerate_identified(world, IdentFormula::OM) - truth) <= 1e-12);
    CHECK(enumerate_eif_checks(world).max_gap() <= 1e-12);
  }
}

TEST_CASE("one-sided truth matches the single-arm functional") {
  DiscreteWorld world = random_world(6, 52, /*one_sided=*/true);
  // independent summation of E[p1 (mu11 - mu00)(1 - rho)] / E[p1 (1 - rho)]
  double num = 0.0, den = 0.0;
  for (const WorldCell& w : world.cells) {
    ImpliedNuisances nu = implied_nuisances(w);
    num += w.prob * nu.p1 * (nu.mu11 - nu.mu00) * (1.0 - nu.rho);
    den += w.prob * nu.p1 * (1.0 - nu.rho);
  }
  CHECK(enumerate_true_tau(world) == doctest::Approx(num / den).epsilon(1e-13));
}

TEST_CASE("constant-effect world enumerates to that effect") {
  DiscreteWorld world = random_world(4, 9);
  for (WorldCell& w : world.cells) {
    w.m1_u11 = w.m1_u10 = 0.75;
    w.m0_u10 = w.m0_u00 = 0.25;
  }
  CHECK(enumerate_true_tau(world) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("hand-built two-cell world gives 2/3") {
  WorldCell a, b;
  a.prob = b.prob = 0.5;
  a.rho = b.rho = 0.4;
  a.pi = b.pi = 0.5;
  a.q11 = b.q11 = 0.25;
  a.q10 = 0.5;
  a.q00 = 0.25;
  b.q10 = 0.25;
  b.q00 = 0.5;
  // effects 1 and 0 through binary outcome means
  a.m1_u11 = a.m1_u10 = 1.0;
  a.m0_u10 = a.m0_u00 = 0.0;
  a.m1_u00 = a.m0_u11 = 0.5;
  b.m1_u11 = b.m1_u10 = 0.5;
  b.m0_u10 = b.m0_u00 = 0.5;
  b.m1_u00 = b.m0_u11 = 0.5;
  DiscreteWorld world{{a, b}, false};
  CHECK(enumerate_true_tau(world) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(enumerate_identified(world, IdentFormula::PlugIn) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("breaking principal ignorability opens a plug-in gap") {
  DiscreteWorld world = random_world(3, 17);
  world.cells[0].m1_u11 = std::min(0.95, world.cells[0].m1_u10 + 0.3);
  const double truth = enumerate_true_tau(world);
  const double identified = enumerate_identified(world, IdentFormula::PlugIn);
  CHECK(std::abs(identified - truth) > 1e-3);
}

TEST_CASE("degenerate complier stratum is reported") {
  DiscreteWorld world = random_world(2, 23);
  for (WorldCell& w : world.cells) {
    w.q11 += w.q10;
    w.q10 = 0.0;
  }
  CHECK_THROWS_AS(enumerate_true_tau(world), DegenerateStratum);
}

TEST_CASE("world json round-trip preserves every field and the gaps") {
  DiscreteWorld world = random_world(5, 71);
  std::string text = world_to_json_string(world);
  DiscreteWorld copy = world_from_json_string(text);
  REQUIRE(copy.cells.size() == world.cells.size());
  CHECK(copy.one_sided == world.one_sided);
  for (std::size_t i = 0; i < world.cells.size(); ++i) {
    CHECK(copy.cells[i].prob == world.cells[i].prob);
    CHECK(copy.cells[i].rho == world.cells[i].rho);
    CHECK(copy.cells[i].pi == world.cells[i].pi);
    CHECK(copy.cells[i].q11 == world.cells[i].q11);
    CHECK(copy.cells[i].q10 == world.cells[i].q10);
    CHECK(copy.cells[i].q00 == world.cells[i].q00);
    CHECK(copy.cells[i].m1_u10 == world.cells[i].m1_u10);
    CHECK(copy.cells[i].m0_u11 == world.cells[i].m0_u11);
  }
  CHECK(enumerate_true_tau(copy) == enumerate_true_tau(world));
}

TEST_CASE("random_world is deterministic in its seed") {
  CHECK(world_to_json_string(random_world(4, 99)) ==
        world_to_json_string(random_world(4, 99)));
  CHECK(world_to_json_string(random_world(4, 99)) !=
        world_to_json_string(random_world(4, 100)));
  DiscreteWorld one_cell = random_world(1, 3);
  CHECK(one_cell.cells.size() == 1);
  CHECK(one_cell.cells[0].prob == doctest::Approx(1.0));
}

TEST_CASE("sampling bridge: estimators with true nuisances hit the enumerated truth") {
  DiscreteWorld world = random_world(4, 2024);
  const double truth = enumerate_true_tau(world);
  std::vector<std::size_t> cells;
  ValidatedDataset d = sample_from_world(world, 50000, 8, &cells);
  NuisanceValues nu = true_nuisance_values(world, cells);

  Estimate plug = estimate_plugin(d, nu);
  Estimate ipw = estimate_ipw(d, nu, true);
  Estimate om = estimate_om(d, nu);
  Estimate eif = estimate_eif(d, nu);

  CHECK(std::abs(plug.tau_hat - truth) <= 5.0 * ptx_test::se_plugin(d, nu, plug.tau_hat));
  CHECK(std::abs(om.tau_hat - truth) <= 5.0 * ptx_test::se_om(d, nu, om.tau_hat));
  CHECK(std::abs(ipw.tau_hat - truth) <= 5.0 * ptx_test::se_ipw_hajek(d, nu));
  CHECK(std::abs(eif.tau_hat - truth) <= 5.0 * *eif.se);
}
