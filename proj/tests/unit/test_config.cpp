#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "maflow/config.hpp"
#include "support.hpp"

using namespace maflow;
using maflow::testing::kPi;

namespace {

bool has_error(const ConfigError& e, const std::string& needle) {
  return std::any_of(e.errors().begin(), e.errors().end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_SUITE("cli_runner") {

TEST_CASE("preset cy_t2_n1") {
  auto c = parse_config(R"({"preset": "cy_t2_n1"})");
  CHECK(c.variant == Variant::CalabiYau);
  CHECK(c.n == 1);
  CHECK(c.grid == std::vector<int>{64, 64});
  REQUIRE(c.f_modes.size() == 1);
  CHECK(c.f_modes[0].amplitude == 0.2);
  CHECK(c.f_modes[0].k == std::vector<int>{1, 0});
  auto f = build_modes(c.domain(), c.f_modes);
  auto want = ScalarField::sample(c.domain(), [](auto x) { return 0.2 * std::cos(2 * kPi * x[0]); });
  CHECK(maflow::testing::sup_diff(f, want) < 1e-15);
}

TEST_CASE("every preset parses and round-trips") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    auto c = preset(name);
    auto again = parse_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
  }
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("grid must be a power of two") {
  try {
    parse_config(R"({"preset": "cy_t2_n1", "grid": 48})");
    FAIL("accepted grid 48");
  } catch (const ConfigError& e) {
    CHECK(has_error(e, "grid must be a power of two"));
  }
}

TEST_CASE("all errors are reported together") {
  try {
    parse_config(R"({"n": 1, "grid": 48, "bogus": 1, "stepper": {"tolx": 1},
                     "f": [{"k": [40, 0], "amplitude": 0.1}]})");
    FAIL("accepted a broken config");
  } catch (const ConfigError& e) {
    CHECK(e.errors().size() >= 4);
    CHECK(has_error(e, "grid must be a power of two"));
    CHECK(has_error(e, "unknown key \"bogus\""));
    CHECK(has_error(e, "stepper: unknown key \"tolx\""));
    CHECK(has_error(e, "wavenumber 40"));
  }
}

TEST_CASE("modes outside the resolved band are rejected") {
  CHECK_THROWS_AS(parse_config(R"({"grid": 16, "f": [{"k": [6, 0], "amplitude": 0.1}]})"),
                  ConfigError);
  CHECK_NOTHROW(parse_config(R"({"grid": 16, "f": [{"k": [5, 0], "amplitude": 0.1}]})"));
}

TEST_CASE("explicit keys override the preset and are listed") {
  auto c = parse_config(R"({"preset": "cy_t2_n1", "grid": 32,
                            "stepper": {"tolerance": 1e-6}})");
  CHECK(c.grid == std::vector<int>{32, 32});
  CHECK(c.stepper.tolerance == 1e-6);
  CHECK(c.stepper.converge_tol == preset("cy_t2_n1").stepper.converge_tol);
  CHECK(std::find(c.overridden.begin(), c.overridden.end(), "grid") != c.overridden.end());
  CHECK(std::find(c.overridden.begin(), c.overridden.end(), "stepper") != c.overridden.end());
}

TEST_CASE("other validation") {
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"background": [[1, 2], [2, 1]], "n": 2, "grid": 8})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"uniqueness_pair": true})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"n": 3})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"kind": "class"})"), ConfigError);
}

}  // TEST_SUITE
