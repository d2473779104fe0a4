#include <doctest.h>

#include <sstream>

#include "ptx/data_model.hpp"
#include "ptx/errors.hpp"
#include "ptx/rng.hpp"

using namespace ptx;

namespace {

ValidatedDataset from_text(const std::string& text) {
  std::istringstream in(text);
  return load_dataset(in);
}

}  // namespace

TEST_CASE("load_dataset accepts a minimal valid file") {
  ValidatedDataset d = from_text("r,a,c,y,x1\n1,1,1,2.0,0.5\n0,,,,0.1\n1,0,0,1.0,0.2\n");
  CHECK(d.n() == 3);
  CHECK(d.n_trial() == 2);
  CHECK(d.n_target() == 1);
  CHECK(d.p() == 1);
  CHECK(d.y(0) == 2.0);
  CHECK(d.x(1)[0] == 0.1);
}

TEST_CASE("load_dataset accepts CRLF line endings") {
  ValidatedDataset d =
      from_text("r,a,c,y,x1\r\n1,1,1,2.0,0.5\r\n0,,,,0.1\r\n1,0,0,1.0,0.2\r\n");
  CHECK(d.n() == 3);
}

TEST_CASE("target row carrying treatment is a ConsistencyError with row index") {
  try {
    from_text("r,a,c,y,x1\n1,1,1,2.0,0.5\n0,1,,,0.1\n1,0,0,1.0,0.2\n");
    FAIL("expected ConsistencyError");
  } catch (const ConsistencyError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("trial row with missing outcome is a ConsistencyError") {
  CHECK_THROWS_AS(from_text("r,a,c,y,x1\n1,1,1,,0.5\n0,,,,0.1\n1,0,0,1.0,0.2\n"),
                  ConsistencyError);
}

TEST_CASE("missing control arm is an EmptyPopulationError") {
  CHECK_THROWS_AS(from_text("r,a,c,y,x1\n1,1,1,2.0,0.5\n1,1,0,1.0,0.3\n0,,,,0.1\n"),
                  EmptyPopulationError);
  CHECK_THROWS_AS(from_text("r,a,c,y,x1\n1,1,1,2.0,0.5\n1,0,0,1.0,0.3\n"),
                  EmptyPopulationError);
}

TEST_CASE("bad header and non-numeric cells are SchemaErrors") {
  CHECK_THROWS_AS(from_text("r,a,c,x1\n"), SchemaError);
  CHECK_THROWS_AS(from_text("r,a,c,y,z1\n"), SchemaError);
  CHECK_THROWS_AS(from_text("r,a,c,y,x1\n1,1,1,oops,0.5\n0,,,,0.1\n1,0,0,1.0,0.2\n"),
                  SchemaError);
}

TEST_CASE("csv round-trip is the identity") {
  Rng rng(911);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<ObservedUnit> units;
    const std::size_t p = 1 + rng.below(4);
    const std::size_t n = 8 + rng.below(40);
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < n; ++i) {
      ObservedUnit u;
      u.r = rng.bernoulli(0.6) ? 1 : 0;
      if (u.r) {
        u.a = static_cast<int>(rng.below(2));
        u.c = static_cast<int>(rng.below(2));
        u.y = rng.normal() * 1e3;
        seen[*u.a] = true;
      }
      for (std::size_t j = 0; j < p; ++j) u.x.push_back(rng.normal() / 7.0);
      units.push_back(std::move(u));
    }
    // force validity
    if (!seen[0]) {
      units.front() = ObservedUnit{1, 0, 0, 1.25, std::vector<double>(p, 0.5)};
    }
    if (!seen[1]) {
      units.back() = ObservedUnit{1, 1, 1, -0.5, std::vector<double>(p, 0.5)};
    }
    bool has_target = false;
    for (auto& u : units) has_target = has_target || u.r == 0;
    if (!has_target)
      units.push_back(ObservedUnit{0, {}, {}, {}, std::vector<double>(p, 0.1)});

    ValidatedDataset d = ValidatedDataset::create(units);
    std::ostringstream out;
    write_csv(d, out);
    ValidatedDataset d2 = from_text(out.str());
    REQUIRE(d2.n() == d.n());
    REQUIRE(d2.p() == d.p());
    for (std::size_t i = 0; i < d.n(); ++i) {
      CHECK(d2.r(i) == d.r(i));
      if (d.r(i)) {
        CHECK(d2.a(i) == d.a(i));
        CHECK(d2.c(i) == d.c(i));
        CHECK(d2.y(i) == d.y(i));
      }
      for (std::size_t j = 0; j < d.p(); ++j) CHECK(d2.x(i)[j] == d.x(i)[j]);
    }
  }
}

TEST_CASE("summarize counts and covariate stats") {
  ValidatedDataset d = from_text(
      "r,a,c,y,x1\n"
      "1,1,1,1.0,1.0\n"
      "1,1,0,2.0,1.0\n"
      "1,0,1,3.0,1.0\n"
      "1,0,0,4.0,1.0\n"
      "0,,,,1.0\n"
      "0,,,,1.0\n");
  DatasetSummary s = summarize(d);
  CHECK(s.n_trial == 4);
  CHECK(s.n_target == 2);
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) CHECK(s.arm_counts[a][c] == 1);
  CHECK(s.x_mean[0] == doctest::Approx(1.0));
  CHECK(s.x_min[0] == 1.0);
  CHECK(s.x_max[0] == 1.0);
}

TEST_CASE("select preserves rows and re-validates") {
  ValidatedDataset d =
      from_text("r,a,c,y,x1\n1,1,1,2.0,0.5\n0,,,,0.1\n1,0,0,1.0,0.2\n");
  ValidatedDataset sub = d.select({2, 0, 1});
  CHECK(sub.n() == 3);
  CHECK(sub.y(0) == 1.0);
  CHECK_THROWS_AS(d.select({0, 2}), EmptyPopulationError);  // no target rows
}
