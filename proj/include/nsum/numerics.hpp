#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace nsum {

/// Seeded pseudo-random stream.
///
/// The generator is std::mt19937_64 seeded through std::seed_seq from a
/// SplitMix64 expansion of (seed, stream_id). Both algorithms are fixed by the
/// C++ standard, and every variate transform below is implemented here rather
/// than through <random> distributions, so a (seed, stream_id) pair reproduces
/// the same draws on every conforming platform.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Gamma(shape, rate) via Marsaglia-Tsang.
  double gamma(double shape, double rate);
  /// Beta(alpha, beta) in the standard shape parameterization.
  double beta(double alpha, double beta);
  double lognormal(double mu, double sigma);
  /// Binomial(trials, p). Exact: beta splitting shrinks large trial counts,
  /// then sequential inversion finishes.
  std::int64_t binomial(std::int64_t trials, double p);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Combines identifiers into a stream id (SplitMix64 finaliser chain).
std::uint64_t derive_stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_gamma(double x);
double log_beta(double a, double b);
/// log C(d, y) for real d >= y, via gamma functions.
double log_choose(double d, std::int64_t y);

double normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate far into the tail.
double normal_sf(double x);

/// Log density of Beta(alpha, beta) at x in (0, 1).
double beta_log_pdf(double x, double alpha, double beta);

double sample_truncated_normal(double mean, double sd, double lo, double hi, RandomStream& rng);

/// Draws sigma^2 from InverseGamma(shape, rate) restricted to (lo, hi).
/// Rejection first; after 1000 misses falls back to the inverse CDF.
double sample_truncated_inverse_gamma(double shape, double rate, double lo, double hi,
                                      RandomStream& rng);

/// Folds x into [lo, hi] by reflecting at the boundaries as often as needed.
double reflect_into(double x, double lo, double hi);

}  // namespace nsum
