#include "nsum/numerics.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "nsum/error.hpp"

namespace nsum {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(2*pi)/2
constexpr std::size_t kMaxRejections = 1000;
constexpr std::int64_t kSmallChoose = 12;

// Stirling series for log Gamma, valid to double precision for x >= 10.
double log_gamma_stirling(double x) {
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
  return (x - 0.5) * std::log(x) - x + kHalfLog2Pi + series;
}

// One-sided tail draw from N(0,1) restricted to (a, b) with a large and positive
// (Robert, 1995: translated exponential proposal).
double sample_normal_tail(double a, double b, RandomStream& rng) {
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(rng.uniform()) / alpha;
    if (z >= b) continue;
    const double t = z - alpha;
    if (std::log(rng.uniform()) <= -0.5 * t * t) return z;
  }
}

// Standardised truncated normal on (a, b) with a >= 0 or the interval straddling
// zero handled by the caller. Uses the upper tail representation to keep
// precision when both bounds sit in the right tail.
double sample_std_truncated_right(double a, double b, RandomStream& rng) {
  const double sa = normal_sf(a);
  const double sb = std::isinf(b) ? 0.0 : normal_sf(b);
  if (sa <= 0.0 || sa - sb <= 1e-300 || a > 30.0) {
    if (b - a < 1e-8 * std::max(1.0, a)) return a + rng.uniform() * (b - a);
    return sample_normal_tail(a, b, rng);
  }
  const double u = sb + rng.uniform() * (sa - sb);
  double z = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
  if (z <= a) z = std::nextafter(a, b);
  if (z >= b) z = std::nextafter(b, a);
  return z;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

double RandomStream::uniform() {
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double RandomStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * factor;
  has_spare_normal_ = true;
  return u * factor;
}

double RandomStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw Error(ErrorCode::DomainError, "gamma draw needs shape > 0 and rate > 0");
  }
  if (shape < 1.0) {
    // Boost a Gamma(shape + 1) draw down: G(a) = G(a+1) * U^(1/a).
    const double g = gamma(shape + 1.0, 1.0);
    return g * std::pow(uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double RandomStream::beta(double alpha, double beta_shape) {
  const double x = gamma(alpha, 1.0);
  const double y = gamma(beta_shape, 1.0);
  const double s = x + y;
  if (s == 0.0) return alpha / (alpha + beta_shape);
  return x / s;
}

double RandomStream::lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

std::int64_t RandomStream::binomial(std::int64_t trials, double p) {
  if (trials < 0 || !(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::DomainError, "binomial draw needs trials >= 0 and p in [0, 1]");
  }
  std::int64_t successes = 0;
  std::int64_t n = trials;
  // Beta splitting: the a-th order statistic of n uniforms is Beta(a, n + 1 - a).
  while (n > 40 && static_cast<double>(n) * std::min(p, 1.0 - p) > 20.0) {
    const std::int64_t a = 1 + n / 2;
    const std::int64_t b = n + 1 - a;
    const double x = this->beta(static_cast<double>(a), static_cast<double>(b));
    if (x >= p) {
      n = a - 1;
      p = p / x;
    } else {
      successes += a;
      n = b - 1;
      p = (p - x) / (1.0 - x);
    }
  }
  if (n == 0 || p <= 0.0) return successes;
  if (p >= 1.0) return successes + n;
  const bool flip = p > 0.5;
  const double q = flip ? 1.0 - p : p;
  const double odds = q / (1.0 - q);
  double pmf = std::pow(1.0 - q, static_cast<double>(n));
  double cdf = pmf;
  const double u = uniform();
  std::int64_t k = 0;
  while (u > cdf && k < n) {
    pmf *= odds * static_cast<double>(n - k) / static_cast<double>(k + 1);
    ++k;
    cdf += pmf;
  }
  return successes + (flip ? n - k : k);
}

std::uint64_t derive_stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

double log_gamma(double x) {
  if (!(x > 0.0) || std::isinf(x)) {
    throw Error(ErrorCode::DomainError, "log_gamma needs a finite positive argument, got " +
                                            std::to_string(x));
  }
  if (x >= 10.0) return log_gamma_stirling(x);
  // Shift the argument above 10 with the recurrence Gamma(x+1) = x Gamma(x).
  double product = 1.0;
  double shifted = x;
  while (shifted < 10.0) {
    product *= shifted;
    shifted += 1.0;
  }
  return log_gamma_stirling(shifted) - std::log(product);
}

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw Error(ErrorCode::DomainError, "log_beta needs positive arguments");
  }
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double log_choose(double d, std::int64_t y) {
  if (y < 0 || !(d >= static_cast<double>(y))) {
    throw Error(ErrorCode::DomainError,
                "log_choose needs d >= y >= 0 (d=" + std::to_string(d) + ", y=" + std::to_string(y) + ")");
  }
  if (y == 0) return 0.0;
  const double yd = static_cast<double>(y);
  if (y <= kSmallChoose && d < 1e15) {
    // Falling factorial d (d-1) ... (d-y+1) / y!, exact enough and cheaper than three log-gammas.
    double product = 1.0;
    for (std::int64_t j = 0; j < y; ++j) product *= (d - static_cast<double>(j)) / static_cast<double>(j + 1);
    return std::log(product);
  }
  if (d >= 1e5 && y <= 10000) {
    // log-gamma differences cancel badly here; sum the falling factorial instead
    double sum = -log_gamma(yd + 1.0);
    for (std::int64_t j = 0; j < y; ++j) sum += std::log(d - static_cast<double>(j));
    return sum;
  }
  return log_gamma(d + 1.0) - log_gamma(yd + 1.0) - log_gamma(d - yd + 1.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double beta_log_pdf(double x, double alpha, double beta_shape) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return (alpha - 1.0) * std::log(x) + (beta_shape - 1.0) * std::log1p(-x) -
         log_beta(alpha, beta_shape);
}

double sample_truncated_normal(double mean, double sd, double lo, double hi, RandomStream& rng) {
  if (!(sd > 0.0) || !(lo < hi)) {
    throw Error(ErrorCode::DomainError, "truncated normal needs sd > 0 and lo < hi");
  }
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double mass = normal_cdf(b) - normal_cdf(a);
  if (mass > 0.25) {
    for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
      const double z = rng.normal();
      if (z > a && z < b) return mean + sd * z;
    }
  }
  double z;
  if (a >= 0.0) {
    z = sample_std_truncated_right(a, b, rng);
  } else if (b <= 0.0) {
    z = -sample_std_truncated_right(-b, -a, rng);
  } else {
    // Interval straddles zero: invert the CDF directly.
    const double fa = normal_cdf(a);
    const double fb = normal_cdf(b);
    const double u = fa + rng.uniform() * (fb - fa);
    z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
    z = std::min(std::max(z, std::nextafter(a, b)), std::nextafter(b, a));
  }
  return mean + sd * z;
}

double sample_truncated_inverse_gamma(double shape, double rate, double lo, double hi,
                                      RandomStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !(lo > 0.0) || !(lo < hi)) {
    throw Error(ErrorCode::DomainError, "truncated inverse gamma needs shape, rate > 0 and 0 < lo < hi");
  }
  for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
    const double x = 1.0 / rng.gamma(shape, rate);
    if (x > lo && x < hi) return x;
  }
  // X = 1/G with G ~ Gamma(shape, rate); X in (lo, hi) iff rate*G in (rate/hi, rate/lo).
  const double g_lo = rate / hi;
  const double g_hi = rate / lo;
  const double p_lo = boost::math::gamma_p(shape, g_lo);
  double x;
  if (p_lo < 0.5) {
    const double p_hi = boost::math::gamma_p(shape, g_hi);
    if (p_hi - p_lo <= 0.0) return p_hi <= 0.0 ? lo : hi;
    const double u = p_lo + rng.uniform() * (p_hi - p_lo);
    x = rate / boost::math::gamma_p_inv(shape, u);
  } else {
    const double q_lo = boost::math::gamma_q(shape, g_lo);
    const double q_hi = boost::math::gamma_q(shape, g_hi);
    if (q_lo - q_hi <= 0.0) return q_lo <= 0.0 ? hi : lo;
    const double u = q_hi + rng.uniform() * (q_lo - q_hi);
    x = rate / boost::math::gamma_q_inv(shape, u);
  }
  return std::min(std::max(x, std::nextafter(lo, hi)), std::nextafter(hi, lo));
}

double reflect_into(double x, double lo, double hi) {
  if (x >= lo && x <= hi) return x;
  const double width = hi - lo;
  double offset = std::fmod(x - lo, 2.0 * width);
  if (offset < 0.0) offset += 2.0 * width;
  if (offset > width) offset = 2.0 * width - offset;
  return lo + offset;
}

}  // namespace nsum
