#include "nsum/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "nsum/error.hpp"

namespace nsum {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x, double mean) {
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size() - 1);
}

std::vector<double> sorted_copy(std::span<const double> draws) {
  std::vector<double> v(draws.begin(), draws.end());
  std::sort(v.begin(), v.end());
  return v;
}

CredibleInterval interval_from_sorted(std::span<const double> sorted, double level) {
  const double tail = 0.5 * (1.0 - level);
  return {quantile_type7(sorted, tail), quantile_type7(sorted, 1.0 - tail)};
}

// Recall calibration box.
constexpr double kAMax = 15.0;
constexpr double kBMax = 1.0;
constexpr double kSigmaMax = 1.0;
constexpr double kMinVariance = 1e-12;

struct LineFit {
  double a = 0.0;
  double b = 0.0;
  double rss = 0.0;  // weighted
};

// Weighted least squares of y on x with a in [0, kAMax], b in [0, kBMax].
// The objective is a convex quadratic, so the constrained optimum is the
// unconstrained one when feasible and otherwise lies on an edge.
LineFit box_wls(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
    sxx += w[k] * x[k] * x[k];
    sxy += w[k] * x[k] * y[k];
  }
  const auto rss = [&](double a, double b) {
    double total = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double r = y[k] - a - b * x[k];
      total += w[k] * r * r;
    }
    return total;
  };
  const double det = sw * sxx - sx * sx;
  if (det > 0.0) {
    const double b = (sw * sxy - sx * sy) / det;
    const double a = (sy - b * sx) / sw;
    if (a >= 0.0 && a <= kAMax && b >= 0.0 && b <= kBMax) return {a, b, rss(a, b)};
  }
  LineFit best{0.0, 0.0, kInf};
  const auto consider = [&](double a, double b) {
    const double value = rss(a, b);
    if (value < best.rss) best = {a, b, value};
  };
  for (double b : {0.0, kBMax}) consider(std::clamp((sy - b * sx) / sw, 0.0, kAMax), b);
  if (sxx > 0.0) {
    for (double a : {0.0, kAMax}) consider(a, std::clamp((sxy - a * sx) / sxx, 0.0, kBMax));
  }
  return best;
}

struct ProfilePoint {
  double sigma = 0.0;
  LineFit line;
  double log_likelihood = kNegInf;
};

ProfilePoint profile(std::span<const BackEstimatePoint> points, double sigma) {
  std::vector<double> x, y, w;
  for (const auto& p : points) {
    x.push_back(std::log(p.true_size));
    y.push_back(std::log(p.estimate));
    w.push_back(1.0 / std::max(kMinVariance, p.log_sd * p.log_sd + sigma * sigma));
  }
  ProfilePoint out;
  out.sigma = sigma;
  out.line = box_wls(x, y, w);
  out.log_likelihood = recall_log_likelihood(points, out.line.a, out.line.b, sigma);
  return out;
}

}  // namespace

std::vector<double> scaleup_degrees(const SurveyDataset& data) {
  double known_total = 0.0;
  for (auto size : data.known_sizes()) known_total += static_cast<double>(size);
  const double total = static_cast<double>(data.total_population());
  std::vector<double> degrees(data.respondents());
  for (std::size_t i = 0; i < data.respondents(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < data.groups(); ++k) {
      if (data.is_known(k)) sum += static_cast<double>(data.response(i, k));
    }
    degrees[i] = total * sum / known_total;
  }
  return degrees;
}

double scaleup_size(const SurveyDataset& data, std::span<const double> degrees) {
  if (degrees.size() != data.respondents()) {
    throw Error(ErrorCode::ShapeMismatch, "one degree per respondent required");
  }
  const double degree_sum = std::accumulate(degrees.begin(), degrees.end(), 0.0);
  if (!(degree_sum > 0.0)) {
    throw Error(ErrorCode::ZeroDegreeSum, "estimated degrees sum to zero; no respondent reported a known-group contact");
  }
  return static_cast<double>(data.total_population()) *
         static_cast<double>(data.column_sum(data.unknown_index())) / degree_sum;
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::Precondition, "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::DomainError, "quantile level outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

PosteriorSummary summarize(std::span<const double> draws, SummaryScale scale, double total_population) {
  if (draws.size() < 100) {
    throw Error(ErrorCode::TooFewDraws, "posterior summary needs at least 100 draws, got " +
                                            std::to_string(draws.size()));
  }
  auto sorted = sorted_copy(draws);
  if (scale == SummaryScale::Prevalence) {
    if (!(total_population > 0.0)) throw Error(ErrorCode::DomainError, "total population must be positive");
    for (auto& v : sorted) v /= total_population;
  }
  PosteriorSummary s;
  s.mean = mean_of(sorted);
  s.sd = std::sqrt(variance_of(sorted, s.mean));
  s.median = quantile_type7(sorted, 0.5);
  s.ci80 = interval_from_sorted(sorted, 0.80);
  s.ci95 = interval_from_sorted(sorted, 0.95);
  return s;
}

CredibleInterval central_interval(std::span<const double> draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::DomainError, "interval level outside (0, 1)");
  const auto sorted = sorted_copy(draws);
  return interval_from_sorted(sorted, level);
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw Error(ErrorCode::Precondition, "gelman_rubin needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 10) throw Error(ErrorCode::Precondition, "gelman_rubin needs at least 10 draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw Error(ErrorCode::ShapeMismatch, "chains differ in length");
  }
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double m = mean_of(c);
    means.push_back(m);
    within += variance_of(c, m);
  }
  within /= static_cast<double>(chains.size());
  if (!(within > 0.0)) throw Error(ErrorCode::ZeroWithinVariance, "every chain is constant");
  const double between_over_n = variance_of(means, mean_of(means));
  const double nd = static_cast<double>(n);
  const double v = (nd - 1.0) / nd * within + between_over_n;
  return std::sqrt(v / within);
}

double effective_sample_size(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 4) throw Error(ErrorCode::Precondition, "effective sample size needs at least 4 draws");
  const double m = mean_of(draws);
  const auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (draws[t] - m) * (draws[t + lag] - m);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  // Initial positive (and monotone) sequence of paired autocorrelations.
  double sum = 0.0;
  double previous = kInf;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, previous);
    previous = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(static_cast<double>(n) + 10.0));
  return static_cast<double>(n) / tau;
}

double monte_carlo_se(std::span<const double> draws, std::size_t batches) {
  if (batches < 2) throw Error(ErrorCode::Precondition, "batch means need at least two batches");
  const std::size_t size = draws.size() / batches;
  if (size < 2) throw Error(ErrorCode::Precondition, "too few draws for the requested batch count");
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) means.push_back(mean_of(draws.subspan(b * size, size)));
  return std::sqrt(variance_of(means, mean_of(means)) / static_cast<double>(batches));
}

double recall_log_likelihood(std::span<const BackEstimatePoint> points, double a, double b, double sigma_eps) {
  double ll = 0.0;
  for (const auto& p : points) {
    if (!(p.estimate > 0.0 && p.true_size > 0.0)) {
      throw Error(ErrorCode::DomainError, "back-estimates and true sizes must be positive");
    }
    const double v = std::max(kMinVariance, p.log_sd * p.log_sd + sigma_eps * sigma_eps);
    const double r = std::log(p.estimate) - a - b * std::log(p.true_size);
    ll += -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * r * r / v;
  }
  return ll;
}

RecallCalibration fit_recall_calibration(std::span<const BackEstimatePoint> points, std::size_t restarts) {
  if (points.size() < 3) throw Error(ErrorCode::Precondition, "recall calibration needs at least 3 groups");
  if (restarts == 0) throw Error(ErrorCode::InvalidConfig, "restarts must be positive");

  constexpr double kGolden = 0.6180339887498949;
  std::vector<ProfilePoint> ends;
  const double width = kSigmaMax / static_cast<double>(restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    double lo = width * static_cast<double>(r);
    double hi = lo + width;
    double x1 = hi - kGolden * (hi - lo);
    double x2 = lo + kGolden * (hi - lo);
    auto p1 = profile(points, x1);
    auto p2 = profile(points, x2);
    for (int it = 0; it < 80 && hi - lo > 1e-10; ++it) {
      if (p1.log_likelihood >= p2.log_likelihood) {
        hi = x2;
        x2 = x1;
        p2 = p1;
        x1 = hi - kGolden * (hi - lo);
        p1 = profile(points, x1);
      } else {
        lo = x1;
        x1 = x2;
        p1 = p2;
        x2 = lo + kGolden * (hi - lo);
        p2 = profile(points, x2);
      }
    }
    auto best = p1.log_likelihood >= p2.log_likelihood ? p1 : p2;
    for (double edge : {width * static_cast<double>(r), width * static_cast<double>(r + 1)}) {
      auto e = profile(points, edge);
      if (e.log_likelihood > best.log_likelihood) best = e;
    }
    ends.push_back(best);
  }

  const bool all_degenerate =
      std::all_of(ends.begin(), ends.end(), [](const ProfilePoint& p) { return p.line.b <= 0.0; });
  if (all_degenerate) {
    throw Error(ErrorCode::FitDiverged, "every calibration restart ended at slope b = 0");
  }
  const auto best = *std::max_element(ends.begin(), ends.end(), [](const auto& l, const auto& r) {
    return l.log_likelihood < r.log_likelihood;
  });
  return {best.line.a, best.line.b, best.sigma, best.log_likelihood};
}

std::vector<double> recall_adjust_draws(std::span<const double> log_size_draws, const RecallCalibration& cal,
                                        RandomStream& rng) {
  if (!(cal.b > 0.0)) throw Error(ErrorCode::DomainError, "recall adjustment needs slope b > 0");
  const double noise_sd = cal.sigma_eps / cal.b;
  std::vector<double> out;
  out.reserve(log_size_draws.size());
  for (double y : log_size_draws) out.push_back((y - cal.a) / cal.b + noise_sd * rng.normal());
  return out;
}

}  // namespace nsum
