#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "nsum/core.hpp"
#include "nsum/error.hpp"
#include "nsum/numerics.hpp"

using nsum::ErrorCode;

namespace {

nsum::RawSurvey minimal() {
  nsum::RawSurvey raw;
  raw.rows = {{1, 0, 2}, {0, 0, 1}};
  raw.known_sizes = {100, 200};
  raw.total_population = 1000;
  return raw;
}

ErrorCode code_of(const nsum::RawSurvey& raw) {
  try {
    nsum::validate_dataset(raw);
  } catch (const nsum::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("validate_dataset accepts a minimal table") {
  const auto raw = minimal();
  const auto data = nsum::validate_dataset(raw);
  CHECK(data.respondents() == 2);
  CHECK(data.groups() == 3);
  CHECK(data.unknown_index() == 2);
  CHECK(data.known_size(0) == 100);
  CHECK(data.known_size(1) == 200);
  CHECK(data.known_prevalence(1) == doctest::Approx(0.2));
  CHECK(data.row_max(0) == 2);
  CHECK(data.column_max(2) == 2);
  CHECK(data.column_sum(2) == 3);
  CHECK(data.labels() == std::vector<std::string>{"g1", "g2", "g3"});
  CHECK(raw.rows == minimal().rows);
}

TEST_CASE("validate_dataset errors") {
  auto raw = minimal();
  raw.rows[1][0] = -1;
  CHECK(code_of(raw) == ErrorCode::NegativeResponse);
  try {
    nsum::validate_dataset(raw);
  } catch (const nsum::Error& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  raw = minimal();
  raw.known_sizes = {1000, 200};
  CHECK(code_of(raw) == ErrorCode::KnownSizeExceedsTotal);

  raw = minimal();
  raw.rows[1].pop_back();
  CHECK(code_of(raw) == ErrorCode::ShapeMismatch);

  raw = minimal();
  raw.known_sizes = {100};
  CHECK(code_of(raw) == ErrorCode::ShapeMismatch);

  raw = minimal();
  raw.rows = {{1}, {2}};
  raw.known_sizes = {};
  CHECK(code_of(raw) == ErrorCode::ShapeMismatch);

  raw = minimal();
  raw.rows.clear();
  CHECK(code_of(raw) == ErrorCode::ShapeMismatch);

  raw = minimal();
  raw.unknown_index = 3;
  CHECK(code_of(raw) == ErrorCode::ShapeMismatch);
}

TEST_CASE("unknown column in the middle") {
  auto raw = minimal();
  raw.unknown_index = 0;
  const auto data = nsum::validate_dataset(raw);
  CHECK(data.unknown_index() == 0);
  CHECK_FALSE(data.is_known(0));
  CHECK(data.known_size(1) == 100);
  CHECK(data.known_size(2) == 200);
  CHECK_THROWS_AS(data.known_size(0), nsum::Error);
}

TEST_CASE("relabel_unknown") {
  const auto data = nsum::validate_dataset(minimal());
  const auto dropped = data.relabel_unknown(0);
  CHECK(dropped.groups() == 2);
  CHECK(dropped.unknown_index() == 0);
  CHECK(dropped.known_size(1) == 200);
  CHECK(dropped.labels() == std::vector<std::string>{"g1", "g2"});

  const auto kept = data.relabel_unknown(1, 50);
  CHECK(kept.groups() == 3);
  CHECK(kept.unknown_index() == 1);
  CHECK(kept.known_size(0) == 100);
  CHECK(kept.known_size(2) == 50);
  CHECK_THROWS_AS(data.relabel_unknown(2), nsum::Error);
}

TEST_CASE("beta_mr_to_shapes") {
  auto s = nsum::beta_mr_to_shapes({0.5, 1.0 / 3.0});
  CHECK(s.alpha == doctest::Approx(1.0));
  CHECK(s.beta == doctest::Approx(1.0));
  s = nsum::beta_mr_to_shapes({0.542, 0.011});
  CHECK(s.alpha == doctest::Approx(48.731).epsilon(1e-4));
  CHECK(s.beta == doctest::Approx(41.178).epsilon(1e-4));
  s = nsum::beta_mr_to_shapes({0.5, 1.0 - 1e-9});
  CHECK(s.alpha < 1e-8);
  CHECK(s.beta < 1e-8);
  CHECK_THROWS_AS(nsum::beta_mr_to_shapes({0.0, 0.5}), nsum::Error);
  CHECK_THROWS_AS(nsum::beta_mr_to_shapes({0.5, 1.0}), nsum::Error);

  nsum::RandomStream rng(1, 0);
  for (int t = 0; t < 1000; ++t) {
    const nsum::BetaMR p{0.001 + 0.998 * rng.uniform(), 0.001 + 0.998 * rng.uniform()};
    const auto back = nsum::beta_shapes_to_mr(nsum::beta_mr_to_shapes(p));
    REQUIRE(back.m == doctest::Approx(p.m).epsilon(1e-12));
    REQUIRE(back.rho == doctest::Approx(p.rho).epsilon(1e-12));
  }
}

TEST_CASE("beta variance identity against Monte Carlo") {
  nsum::RandomStream rng(2, 0);
  for (auto p : {nsum::BetaMR{0.1, 0.1}, {0.3, 0.7}, {0.5, 0.5}, {0.7, 0.05}, {0.9, 0.9}}) {
    const auto s = nsum::beta_mr_to_shapes(p);
    double sum = 0.0;
    double sum2 = 0.0;
    const int n = 1'000'000;
    for (int t = 0; t < n; ++t) {
      const double x = rng.beta(s.alpha, s.beta);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(var == doctest::Approx(p.m * (1 - p.m) * p.rho).epsilon(0.01));
  }
}

TEST_CASE("fit_beta_mr_moments") {
  const std::vector<double> two{0.4, 0.6};
  const auto fit = nsum::fit_beta_mr_moments(two);
  CHECK(fit.m == doctest::Approx(0.5));
  CHECK(fit.rho == doctest::Approx(0.08));

  const std::vector<double> flat(5, 0.5);
  try {
    nsum::fit_beta_mr_moments(flat);
    FAIL("expected DegenerateSamples");
  } catch (const nsum::Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateSamples);
  }

  nsum::RandomStream rng(3, 0);
  const auto s = nsum::beta_mr_to_shapes({0.542, 0.011});
  std::vector<double> draws(100000);
  for (auto& x : draws) x = rng.beta(s.alpha, s.beta);
  const auto est = nsum::fit_beta_mr_moments(draws);
  CHECK(est.m == doctest::Approx(0.542).epsilon(0.05));
  CHECK(est.rho == doctest::Approx(0.011).epsilon(0.05));
}

TEST_CASE("model spec and state checks") {
  nsum::ModelSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.kind = nsum::ModelKind::Transmission;
  CHECK_THROWS_AS(spec.validate(), nsum::Error);
  spec.transmission_prior = nsum::BetaMR{0.542, 0.011};
  CHECK_NOTHROW(spec.validate());
  spec.kind = nsum::ModelKind::RandomDegree;
  CHECK_THROWS_AS(spec.validate(), nsum::Error);

  CHECK(nsum::parse_model_kind("degree") == nsum::ModelKind::RandomDegree);
  CHECK(nsum::parse_model_kind("combined") == nsum::ModelKind::Combined);
  CHECK(nsum::parse_jacobian_mode("paper") == nsum::JacobianMode::Paper);
  CHECK_THROWS_AS(nsum::parse_model_kind("nope"), nsum::Error);

  const auto data = nsum::validate_dataset(minimal());
  nsum::ModelSpec rd;
  nsum::ChainState s;
  s.degrees = {3.0, 1.5};
  s.size_unknown = 10.0;
  CHECK_NOTHROW(nsum::check_state(s, rd, data));
  s.degrees[0] = 2.0;  // not above the row maximum
  CHECK_THROWS_AS(nsum::check_state(s, rd, data), nsum::Error);
  s.degrees[0] = 3.0;
  s.size_unknown = 1001.0;
  CHECK_THROWS_AS(nsum::check_state(s, rd, data), nsum::Error);
}
