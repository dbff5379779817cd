#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "nsum/error.hpp"
#include "nsum/numerics.hpp"
#include "oracles.hpp"

using nsum::RandomStream;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / (v.size() - 1);
}

}  // namespace

TEST_CASE("log_gamma known values") {
  CHECK(nsum::log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(nsum::log_gamma(0.5) - 0.5723649429247001) < 1e-12);
  CHECK(std::abs(nsum::log_gamma(11.0) - 15.104412573075516) < 1e-11);
}

TEST_CASE("log_gamma against Boost over the accuracy range") {
  double x = 1e-3;
  while (x <= 1e7) {
    const double want = boost::math::lgamma(x);
    const double err = std::abs(nsum::log_gamma(x) - want);
    INFO("x = " << x);
    CHECK(err <= std::max(1e-10, 1e-13 * std::abs(want)));
    x *= 1.37;
  }
}

TEST_CASE("log_gamma rejects nonpositive arguments") {
  CHECK_THROWS_AS(nsum::log_gamma(0.0), nsum::Error);
  CHECK_THROWS_AS(nsum::log_gamma(-2.5), nsum::Error);
}

TEST_CASE("log_beta") {
  CHECK(nsum::log_beta(1, 1) == doctest::Approx(0.0));
  CHECK(std::abs(nsum::log_beta(2, 3) - std::log(1.0 / 12.0)) < 1e-12);
  RandomStream rng(3, 0);
  for (int t = 0; t < 50; ++t) {
    const double a = 0.01 + 50 * rng.uniform();
    const double b = 0.01 + 50 * rng.uniform();
    CHECK(nsum::log_beta(a, b) == doctest::Approx(nsum::log_beta(b, a)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(nsum::log_beta(0.0, 1.0), nsum::Error);
}

TEST_CASE("log_choose") {
  CHECK(std::abs(nsum::log_choose(5, 2) - std::log(10.0)) < 1e-12);
  for (double d : {0.0, 0.3, 7.0, 1e6}) CHECK(nsum::log_choose(d, 0) == 0.0);
  const double want = boost::math::lgamma(8.5) - boost::math::lgamma(4.0) - boost::math::lgamma(5.5);
  CHECK(std::abs(nsum::log_choose(7.5, 3) - want) < 1e-12);
  for (int d = 0; d <= 40; ++d) {
    for (int y = 0; y <= d; ++y) {
      CHECK(std::abs(nsum::log_choose(d, y) - nsum::log_choose(d, d - y)) < 1e-10);
    }
  }
  // real d on every branch, against the falling factorial in long double
  for (double d : {12.5, 3e4 + 0.25, 2.5e8}) {
    for (std::int64_t y : {1, 5, 12, 13, 40}) {
      if (d < y) continue;
      long double want = 0.0L;
      for (std::int64_t j = 0; j < y; ++j) want += std::log((static_cast<long double>(d) - j) / (j + 1));
      CHECK(std::abs(nsum::log_choose(d, y) - static_cast<double>(want)) <=
            1e-12 * std::max(1.0, std::abs(static_cast<double>(want))));
    }
  }
  CHECK_THROWS_AS(nsum::log_choose(2.0, 3), nsum::Error);
}

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(42, 1);
  RandomStream b(42, 1);
  RandomStream c(42, 2);
  int same = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    same += x == c.next_u64();
  }
  CHECK(same == 0);
  CHECK(nsum::derive_stream_id(1, 2) != nsum::derive_stream_id(2, 1));
}

TEST_CASE("uniform and normal variates") {
  RandomStream rng(7, 0);
  std::vector<double> u(20000);
  std::vector<double> z(20000);
  for (auto& x : u) {
    x = rng.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
  }
  for (auto& x : z) x = rng.normal();
  CHECK(oracle::ks_pvalue(u, [](double x) { return x; }) > 0.001);
  boost::math::normal_distribution<double> n01;
  CHECK(oracle::ks_pvalue(z, [&](double x) { return boost::math::cdf(n01, x); }) > 0.001);
}

TEST_CASE("gamma, beta and binomial variates match their moments") {
  RandomStream rng(11, 0);
  std::vector<double> g(100000);
  for (auto& x : g) x = rng.gamma(0.3, 2.0);
  CHECK(mean_of(g) == doctest::Approx(0.15).epsilon(0.02));
  for (auto& x : g) x = rng.gamma(48.7, 1.0);
  CHECK(mean_of(g) == doctest::Approx(48.7).epsilon(0.01));
  for (auto& x : g) x = rng.beta(48.731, 41.178);
  CHECK(mean_of(g) == doctest::Approx(0.542).epsilon(0.005));
  CHECK(variance_of(g) == doctest::Approx(0.542 * 0.458 * 0.011).epsilon(0.03));

  for (auto [n, p] : {std::pair<std::int64_t, double>{20, 0.3}, {5000, 0.002}, {100000000, 0.01}}) {
    std::vector<double> b(20000);
    for (auto& x : b) {
      const auto draw = rng.binomial(n, p);
      REQUIRE(draw >= 0);
      REQUIRE(draw <= n);
      x = static_cast<double>(draw);
    }
    const double mean = static_cast<double>(n) * p;
    CHECK(mean_of(b) == doctest::Approx(mean).epsilon(4 * std::sqrt(mean * (1 - p) / 20000) / mean));
    CHECK(variance_of(b) == doctest::Approx(mean * (1 - p)).epsilon(0.05));
  }
  CHECK(rng.binomial(0, 0.5) == 0);
  CHECK(rng.binomial(10, 0.0) == 0);
  CHECK(rng.binomial(10, 1.0) == 10);
}

TEST_CASE("truncated normal") {
  RandomStream rng(5, 0);
  std::vector<double> draws(10000);
  for (auto& x : draws) x = nsum::sample_truncated_normal(0.0, 1.0, -50.0, 50.0, rng);
  boost::math::normal_distribution<double> n01;
  CHECK(oracle::ks_pvalue(draws, [&](double x) { return boost::math::cdf(n01, x); }) > 0.01);

  std::vector<double> half(100000);
  for (auto& x : half) x = nsum::sample_truncated_normal(0.0, 1.0, 0.0, 1e300, rng);
  CHECK(std::abs(mean_of(half) - std::sqrt(2.0 / 3.14159265358979323846)) < 0.01);

  // far tail and a sliver interval
  for (int t = 0; t < 1000; ++t) {
    const double x = nsum::sample_truncated_normal(0.0, 1.0, 40.0, 41.0, rng);
    REQUIRE(x > 40.0);
    REQUIRE(x < 41.0);
    const double y = nsum::sample_truncated_normal(0.0, 1.0, 1.0 - 1e-9, 1.0, rng);
    REQUIRE(y > 1.0 - 1e-9);
    REQUIRE(y < 1.0);
  }
}

TEST_CASE("truncated inverse gamma") {
  RandomStream rng(9, 0);
  std::vector<double> draws(100000);
  for (auto& x : draws) x = nsum::sample_truncated_inverse_gamma(3.0, 4.0, 1e-9, 1e9, rng);
  CHECK(std::abs(mean_of(draws) - 2.0) < 0.05);

  // mode S/(n+1) for n = 101, S = 100 from a histogram peak
  for (auto& x : draws) x = nsum::sample_truncated_inverse_gamma(50.0, 50.0, 1.0 / 16.0, 4.0, rng);
  std::vector<int> hist(200, 0);
  for (double x : draws) {
    REQUIRE(x > 1.0 / 16.0);
    REQUIRE(x < 4.0);
    const auto b = static_cast<std::size_t>((x - 0.5) / 0.01);
    if (x >= 0.5 && b < hist.size()) ++hist[b];
  }
  // smooth with a 9-bin window before taking the argmax
  std::size_t best = 0;
  int best_count = -1;
  for (std::size_t b = 4; b + 4 < hist.size(); ++b) {
    int s = 0;
    for (std::size_t j = b - 4; j <= b + 4; ++j) s += hist[j];
    if (s > best_count) {
      best_count = s;
      best = b;
    }
  }
  CHECK(std::abs(0.5 + 0.01 * (best + 0.5) - 100.0 / 102.0) < 0.03);

  // bounds far in the tail force the inverse-CDF fallback
  for (int t = 0; t < 200; ++t) {
    const double x = nsum::sample_truncated_inverse_gamma(50.0, 50.0, 3.9, 4.0, rng);
    REQUIRE(x > 3.9);
    REQUIRE(x < 4.0);
  }
}

TEST_CASE("reflect_into") {
  CHECK(nsum::reflect_into(1.05, 0, 1) == doctest::Approx(0.95));
  CHECK(nsum::reflect_into(0.4, 0, 1) == 0.4);
  CHECK(nsum::reflect_into(-0.3, 0, 1) == doctest::Approx(0.3));
  CHECK(nsum::reflect_into(2.3, 0, 1) == doctest::Approx(0.3));
  CHECK(nsum::reflect_into(-1.2, 0, 1) == doctest::Approx(0.8));

  // Proposal density of x' from x under folding: sum over images. Check
  // q(x -> x') = q(x' -> x) for random pairs.
  RandomStream rng(13, 0);
  const auto folded = [](double from, double to, double s) {
    double total = 0.0;
    for (int j = -3; j <= 3; ++j) {
      for (double image : {2.0 * j + to, 2.0 * j - to}) {
        const double z = (image - from) / s;
        total += std::exp(-0.5 * z * z);
      }
    }
    return total;
  };
  for (int t = 0; t < 10000; ++t) {
    const double x = rng.uniform();
    const double xp = rng.uniform();
    const double s = 0.05 + 0.5 * rng.uniform();
    REQUIRE(folded(x, xp, s) == doctest::Approx(folded(xp, x, s)).epsilon(1e-12));
  }
}
