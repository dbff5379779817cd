#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "nsum/error.hpp"
#include "nsum/postprocess.hpp"

namespace {

nsum::SurveyDataset dataset(std::vector<std::vector<std::int64_t>> rows, std::vector<std::int64_t> sizes,
                            std::int64_t total) {
  nsum::RawSurvey raw;
  raw.rows = std::move(rows);
  raw.known_sizes = std::move(sizes);
  raw.total_population = total;
  return nsum::validate_dataset(raw);
}

nsum::ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const nsum::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return nsum::ErrorCode::Io;
}

double variance_of(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / (v.size() - 1);
}

std::vector<double> normal_draws(nsum::RandomStream& rng, std::size_t n, double mean, double sd) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(mean, sd);
  return v;
}

}  // namespace

TEST_CASE("scale-up degrees") {
  const auto data = dataset({{1, 3, 0}, {0, 0, 4}}, {100, 200}, 1000);
  const auto d = nsum::scaleup_degrees(data);
  CHECK(d[0] == doctest::Approx(1000.0 * 4 / 300));
  CHECK(d[1] == 0.0);
  const auto doubled = nsum::scaleup_degrees(dataset({{1, 3, 0}, {0, 0, 4}}, {100, 200}, 2000));
  CHECK(doubled[0] == doctest::Approx(2 * d[0]));
}

TEST_CASE("scale-up size") {
  const auto one = dataset({{2, 2}}, {100}, 10000);
  const std::vector<double> degrees{100.0};
  CHECK(nsum::scaleup_size(one, degrees) == doctest::Approx(200.0));
  const auto zero = dataset({{2, 0}, {5, 0}}, {100}, 10000);
  CHECK(nsum::scaleup_size(zero) == 0.0);
  const auto none = dataset({{0, 3}}, {100}, 10000);
  CHECK(code_of([&] { nsum::scaleup_size(none); }) == nsum::ErrorCode::ZeroDegreeSum);
  CHECK(code_of([&] { nsum::scaleup_size(one, std::vector<double>{1.0, 2.0}); }) == nsum::ErrorCode::ShapeMismatch);

  // scaling the known columns and their sizes together leaves the estimate unchanged
  nsum::RandomStream rng(1, 0);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::vector<std::int64_t>> rows(10, std::vector<std::int64_t>(4));
    for (auto& r : rows) {
      for (auto& y : r) y = rng.binomial(20, 0.3);
    }
    rows[0][0] += 1;
    auto scaled = rows;
    for (auto& r : scaled) {
      for (std::size_t k = 0; k < 3; ++k) r[k] *= 3;
    }
    const auto a = dataset(rows, {1000, 2000, 3000}, 100000);
    const auto b = dataset(scaled, {3000, 6000, 9000}, 100000);
    CHECK(nsum::scaleup_size(a) == doctest::Approx(nsum::scaleup_size(b)).epsilon(1e-12));
  }
}

TEST_CASE("summaries") {
  std::vector<double> constant(200, 4.5);
  const auto c = nsum::summarize(constant);
  CHECK(c.mean == 4.5);
  CHECK(c.median == 4.5);
  CHECK(c.sd == 0.0);
  CHECK(c.ci95.lo == 4.5);
  CHECK(c.ci95.hi == 4.5);

  std::vector<double> ramp(10000);
  std::iota(ramp.begin(), ramp.end(), 1.0);
  const auto r = nsum::summarize(ramp);
  CHECK(r.ci95.lo == doctest::Approx(250.975).epsilon(1e-12));
  CHECK(r.ci95.hi == doctest::Approx(9750.025).epsilon(1e-12));
  CHECK(r.median == doctest::Approx(5000.5));
  CHECK(r.ci80.lo > r.ci95.lo);
  CHECK(r.ci80.hi < r.ci95.hi);
  CHECK(r.ci80.contains(r.median));

  const auto p = nsum::summarize(ramp, nsum::SummaryScale::Prevalence, 1e5);
  CHECK(p.mean == doctest::Approx(r.mean / 1e5));
  CHECK(p.ci95.hi == doctest::Approx(r.ci95.hi / 1e5));

  double previous = 0.0;
  for (double level : {0.1, 0.5, 0.8, 0.95, 0.99}) {
    const auto ci = nsum::central_interval(ramp, level);
    CHECK(ci.hi - ci.lo > previous);
    previous = ci.hi - ci.lo;
  }
  CHECK(code_of([&] { nsum::summarize(std::vector<double>(99, 1.0)); }) == nsum::ErrorCode::TooFewDraws);
}

TEST_CASE("Gelman-Rubin") {
  nsum::RandomStream rng(2, 0);
  const auto a = normal_draws(rng, 10000, 0, 1);
  const auto b = normal_draws(rng, 10000, 0, 1);
  const double same = nsum::gelman_rubin({a, b});
  CHECK(same > 0.99);
  CHECK(same < 1.02);
  const auto far = normal_draws(rng, 10000, 100, 1);
  CHECK(nsum::gelman_rubin({a, far}) > 1.1);

  // invariant under a common affine map
  auto a2 = a;
  auto b2 = b;
  for (auto& x : a2) x = 3 * x - 7;
  for (auto& x : b2) x = 3 * x - 7;
  CHECK(nsum::gelman_rubin({a2, b2}) == doctest::Approx(same).epsilon(1e-10));

  const std::vector<double> flat(50, 1.0);
  CHECK(code_of([&] { nsum::gelman_rubin({flat, flat}); }) == nsum::ErrorCode::ZeroWithinVariance);
  CHECK(code_of([&] { nsum::gelman_rubin({a}); }) == nsum::ErrorCode::Precondition);
  CHECK(code_of([&] { nsum::gelman_rubin({a, far, std::vector<double>(5, 1.0)}); }) == nsum::ErrorCode::ShapeMismatch);
}

TEST_CASE("effective sample size and Monte Carlo error") {
  nsum::RandomStream rng(3, 0);
  const auto iid = normal_draws(rng, 20000, 0, 1);
  CHECK(nsum::effective_sample_size(iid) == doctest::Approx(20000).epsilon(0.1));
  CHECK(nsum::monte_carlo_se(iid) == doctest::Approx(1.0 / std::sqrt(20000.0)).epsilon(0.35));

  // AR(1) with phi = 0.9: ESS = n (1 - phi) / (1 + phi)
  std::vector<double> ar(100000);
  double x = 0.0;
  for (auto& v : ar) {
    x = 0.9 * x + rng.normal() * std::sqrt(1 - 0.81);
    v = x;
  }
  CHECK(nsum::effective_sample_size(ar) == doctest::Approx(100000.0 * 0.1 / 1.9).epsilon(0.15));
  CHECK(nsum::monte_carlo_se(ar) == doctest::Approx(std::sqrt(19.0 / 100000.0)).epsilon(0.35));
}

TEST_CASE("recall calibration on exact lines") {
  std::vector<nsum::BackEstimatePoint> points;
  for (double size : {1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6}) {
    points.push_back({std::exp(6.7 + 0.5 * std::log(size)), 0.0, size});
  }
  const auto fit = nsum::fit_recall_calibration(points);
  CHECK(std::abs(fit.a - 6.7) < 1e-3);
  CHECK(std::abs(fit.b - 0.5) < 1e-3);
  CHECK(fit.sigma_eps < 1e-3);

  std::vector<nsum::BackEstimatePoint> identity;
  for (double size : {500.0, 4000.0, 20000.0, 90000.0}) identity.push_back({size, 0.0, size});
  const auto id = nsum::fit_recall_calibration(identity);
  CHECK(std::abs(id.a) < 1e-3);
  CHECK(std::abs(id.b - 1.0) < 1e-3);
  CHECK(id.sigma_eps < 1e-3);

  CHECK(code_of([&] { nsum::fit_recall_calibration(std::span(points).first(2)); }) == nsum::ErrorCode::Precondition);

  // estimates falling with size put the optimum at b = 0
  std::vector<nsum::BackEstimatePoint> falling;
  for (double size : {1e3, 1e4, 1e5, 1e6}) falling.push_back({1e9 / size, 0.1, size});
  CHECK(code_of([&] { nsum::fit_recall_calibration(falling); }) == nsum::ErrorCode::FitDiverged);
}

TEST_CASE("recall calibration recovers sigma_eps on simulated groups") {
  nsum::RandomStream rng(4, 0);
  std::vector<double> sigmas;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<nsum::BackEstimatePoint> points;
    for (int k = 0; k < 29; ++k) {
      const double size = std::exp(std::log(1e3) + (std::log(1e6) - std::log(1e3)) * rng.uniform());
      const double s = 0.1;
      const double y = 6.7 + 0.5 * std::log(size) + rng.normal(0, s) + rng.normal(0, 0.35);
      points.push_back({std::exp(y), s, size});
    }
    sigmas.push_back(nsum::fit_recall_calibration(points).sigma_eps);
  }
  std::sort(sigmas.begin(), sigmas.end());
  const double median = 0.5 * (sigmas[49] + sigmas[50]);
  CHECK(std::abs(median - 0.35) / 0.35 < 0.3);
}

TEST_CASE("recall adjustment of draws") {
  nsum::RandomStream rng(5, 0);
  const std::vector<double> fixed{13.4};
  CHECK(nsum::recall_adjust_draws(fixed, {6.7, 0.5, 0.0, 0.0}, rng)[0] == 13.4);

  const auto y = normal_draws(rng, 100000, 10, 0.5);
  CHECK(nsum::recall_adjust_draws(y, {0.0, 1.0, 0.0, 0.0}, rng) == y);

  const auto adjusted = nsum::recall_adjust_draws(y, {6.7, 0.5, 0.35, 0.0}, rng);
  REQUIRE(adjusted.size() == y.size());
  const double want = variance_of(y) / 0.25 + 0.35 * 0.35 / 0.25;
  CHECK(variance_of(adjusted) == doctest::Approx(want).epsilon(0.02));
  CHECK(code_of([&] { nsum::recall_adjust_draws(y, {6.7, 0.0, 0.35, 0.0}, rng); }) == nsum::ErrorCode::DomainError);
}
