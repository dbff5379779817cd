#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "nsum/engine.hpp"
#include "nsum/error.hpp"
#include "nsum/models.hpp"
#include "oracles.hpp"

namespace {

nsum::SurveyDataset one_row() {
  nsum::RawSurvey raw;
  raw.rows = {{3, 2}};
  raw.known_sizes = {1000};
  raw.total_population = 10000;
  return nsum::validate_dataset(raw);
}

/// Two scalar blocks with a bivariate normal target: unit-free SDs 1/0.6,
/// correlation 0.8, so each conditional SD is 0.1.
class GaussianPair : public nsum::ModelSampler {
 public:
  explicit GaussianPair(bool stuck = false) : data_(one_row()), stuck_(stuck) {}

  const nsum::SurveyDataset& data() const override { return data_; }
  const nsum::ModelSpec& spec() const override { return spec_; }
  nsum::ChainState initial_state() const override {
    nsum::ChainState s;
    s.degrees = {5.0};
    s.size_unknown = 10.0;
    s.w = 0.0;
    s.z = 0.0;
    return s;
  }
  std::vector<std::string> block_names() const override { return {"x", "y"}; }
  void block_values(const nsum::ChainState& s, std::span<double> out) const override {
    out[0] = s.w;
    out[1] = s.z;
  }
  void sweep(nsum::ChainState& s, const nsum::ProposalScale& scales, nsum::RandomStream& rng,
             std::span<nsum::AcceptanceCount> tally) const override {
    const double sd = 0.1 / 0.6;
    const double rho = 0.8;
    const auto log_density = [&](double x, double y) {
      if (stuck_) return (x == s.w && y == s.z) ? 0.0 : nsum::kNegInf;
      const double a = x / sd;
      const double b = y / sd;
      return -(a * a - 2 * rho * a * b + b * b) / (2 * (1 - rho * rho));
    };
    auto r = nsum::mh_step(s.w, [&](double v) { return log_density(v, s.z); }, scales.blocks[0], std::nullopt,
                           nsum::BoundMode::Reject, rng);
    s.w = r.value;
    tally[0].record(r.accepted);
    r = nsum::mh_step(s.z, [&](double v) { return log_density(s.w, v); }, scales.blocks[1], std::nullopt,
                      nsum::BoundMode::Reject, rng);
    s.z = r.value;
    tally[1].record(r.accepted);
  }
  std::vector<std::string> trace_names() const override { return {"x", "y"}; }
  void trace_values(const nsum::ChainState& s, std::span<double> out) const override { block_values(s, out); }

 private:
  nsum::SurveyDataset data_;
  nsum::ModelSpec spec_;
  bool stuck_;
};

}  // namespace

TEST_CASE("mh_step with a constant density always accepts") {
  nsum::RandomStream rng(1, 0);
  double x = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto r = nsum::mh_step(x, [](double) { return 0.0; }, 1.0, std::nullopt, nsum::BoundMode::Reject, rng);
    REQUIRE(r.accepted);
    x = r.value;
  }
}

TEST_CASE("mh_step samples a standard normal") {
  nsum::RandomStream rng(2, 0);
  double x = 0.0;
  double sum = 0.0;
  double sum2 = 0.0;
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    x = nsum::mh_step(x, [](double v) { return -0.5 * v * v; }, 2.3, std::nullopt, nsum::BoundMode::Reject, rng)
            .value;
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sum2 / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("mh_step rejects out-of-bounds proposals in reject mode") {
  nsum::RandomStream rng(3, 0);
  int seen = 0;
  for (int t = 0; t < 1000 && seen < 20; ++t) {
    auto probe = rng;
    const double proposal = 0.9 + 0.5 * probe.normal();
    const auto r = nsum::mh_step(0.9, [](double) { return 0.0; }, 0.5, nsum::Interval{0.0, 1.0},
                                 nsum::BoundMode::Reject, rng);
    if (proposal <= 0.0 || proposal >= 1.0) {
      ++seen;
      CHECK(r.value == 0.9);
      CHECK_FALSE(r.accepted);
    } else {
      CHECK(r.value == proposal);
    }
  }
  CHECK(seen > 0);
}

TEST_CASE("mh_step reflects in reflect mode") {
  nsum::RandomStream rng(4, 0);
  for (int t = 0; t < 1000; ++t) {
    auto probe = rng;
    const double proposal = nsum::reflect_into(0.9 + 0.5 * probe.normal(), 0.0, 1.0);
    const auto r = nsum::mh_step(0.9, [](double) { return 0.0; }, 0.5, nsum::Interval{0.0, 1.0},
                                 nsum::BoundMode::Reflect, rng);
    REQUIRE(r.value == proposal);
  }
}

TEST_CASE("mh_step reports a non-finite current density") {
  nsum::RandomStream rng(5, 0);
  try {
    nsum::mh_step(1.0, [](double) { return std::nan(""); }, 1.0, std::nullopt, nsum::BoundMode::Reject, rng);
    FAIL("expected NonFiniteDensity");
  } catch (const nsum::Error& e) {
    CHECK(e.code() == nsum::ErrorCode::NonFiniteDensity);
  }
}

TEST_CASE("pilot tuning recovers 2.3 times the conditional SD") {
  GaussianPair sampler;
  nsum::ChainConfig pilot;
  pilot.pilot_iterations = 4000;
  nsum::RandomStream rng(6, 0);
  const auto scales = nsum::tune_proposals(sampler, pilot, rng);
  CHECK(scales.blocks[0] == doctest::Approx(0.23).epsilon(0.15));
  CHECK(scales.blocks[1] == doctest::Approx(0.23).epsilon(0.15));
  // the degree never moves, so its scale is floored rather than zero
  CHECK(scales.degrees[0] > 0.0);
}

TEST_CASE("pilot that never accepts is degenerate") {
  GaussianPair sampler(true);
  nsum::ChainConfig pilot;
  nsum::RandomStream rng(7, 0);
  try {
    nsum::tune_proposals(sampler, pilot, rng);
    FAIL("expected PilotDegenerate");
  } catch (const nsum::Error& e) {
    CHECK(e.code() == nsum::ErrorCode::PilotDegenerate);
  }
  pilot.pilot_iterations = 100;
  CHECK_THROWS_AS(nsum::tune_proposals(sampler, pilot, rng), nsum::Error);
}

TEST_CASE("regression scale") {
  std::vector<double> y(100, 3.0);
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 0.0);
  CHECK(nsum::regression_proposal_scale(y, {x}) == 1e-8);
  // exact linear relation plus alternating +-1 noise: residual SE close to 1
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 2.0 * x[i] + (i % 2 == 0 ? 1.0 : -1.0);
  CHECK(nsum::regression_proposal_scale(y, {x}) == doctest::Approx(2.3).epsilon(0.02));
  // a constant regressor (e.g. a pinned parameter) is dropped, not fatal
  std::vector<double> c(100, 1.0);
  CHECK(nsum::regression_proposal_scale(y, {x, c}) == doctest::Approx(2.3).epsilon(0.02));
}

TEST_CASE("random degree regression design includes mu and sigma") {
  nsum::ModelSpec spec;
  const auto sampler = nsum::make_sampler(spec, oracle::toy_dataset());
  CHECK(sampler->block_names() == std::vector<std::string>{"N_K"});
  CHECK(sampler->trace_names() == std::vector<std::string>{"N_K", "mu", "sigma"});
}

TEST_CASE("run_chain bookkeeping and determinism") {
  nsum::ModelSpec spec;
  const auto data = oracle::toy_dataset();
  const auto sampler = nsum::make_sampler(spec, data);
  nsum::ChainConfig config = nsum::ChainConfig{}.with_iterations(2000);
  config.thin = 3;
  const auto scales = sampler->heuristic_scales(sampler->initial_state());

  nsum::RandomStream a(8, 0);
  nsum::RandomStream b(8, 0);
  const auto first = nsum::run_chain(*sampler, config, scales, a);
  const auto second = nsum::run_chain(*sampler, config, scales, b);
  CHECK(first.size() == config.stored_draws());
  CHECK(first.size() == 600);
  CHECK(first.traces == second.traces);
  for (const auto& acc : first.acceptance) {
    CHECK(acc.rate() >= 0.0);
    CHECK(acc.rate() <= 1.0);
  }

  config.burn_in = config.n_iterations - 1;
  config.thin = 1;
  nsum::RandomStream c(9, 0);
  CHECK(nsum::run_chain(*sampler, config, scales, c).size() == 1);

  config.burn_in = config.n_iterations;
  CHECK_THROWS_AS(nsum::run_chain(*sampler, config, scales, c), nsum::Error);
}

TEST_CASE("stationarity on a two-respondent, one-known-group dataset") {
  // the sigma^2 update needs two respondents, so this is the smallest valid case
  nsum::RawSurvey raw;
  raw.rows = {{3, 2}, {1, 0}};
  raw.known_sizes = {1000};
  raw.total_population = 10000;
  const auto check = oracle::random_degree_grid_check(10, nsum::validate_dataset(raw));
  INFO(check.name << " = " << check.error);
  CHECK(check.passed());
}
