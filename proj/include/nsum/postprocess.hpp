#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nsum/core.hpp"
#include "nsum/numerics.hpp"

namespace nsum {

// Classical scale-up estimators.

/// d_i = N * sum_known y_ik / sum_known N_k.
std::vector<double> scaleup_degrees(const SurveyDataset& data);
/// N_K = N * sum_i y_iK / sum_i d_i. Throws ZeroDegreeSum when the degrees sum to zero.
double scaleup_size(const SurveyDataset& data, std::span<const double> degrees);
inline double scaleup_size(const SurveyDataset& data) { return scaleup_size(data, scaleup_degrees(data)); }

// Posterior summaries.

struct CredibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct PosteriorSummary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  CredibleInterval ci80;
  CredibleInterval ci95;
};

enum class SummaryScale { Size, Prevalence };

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7: h = (n - 1) p, x[floor h] + frac(h) (x[floor h + 1] - x[floor h])).
/// `sorted` must be ascending.
double quantile_type7(std::span<const double> sorted, double p);

/// Needs at least 100 draws. Prevalence divides every draw by `total_population`.
PosteriorSummary summarize(std::span<const double> draws, SummaryScale scale = SummaryScale::Size,
                           double total_population = 1.0);
/// Central interval at an arbitrary level, same quantile rule.
CredibleInterval central_interval(std::span<const double> draws, double level);

// Convergence diagnostics.

/// Potential scale reduction factor without chain splitting:
///   W = mean within-chain variance, B/n = variance of the chain means,
///   V = (n - 1)/n W + B/n,  R = sqrt(V / W).
/// Chains must share a length >= 10.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

/// Effective sample size from the initial positive sequence of autocorrelation
/// pair sums (Geyer 1992).
double effective_sample_size(std::span<const double> draws);

/// Monte Carlo standard error of the mean by non-overlapping batch means.
double monte_carlo_se(std::span<const double> draws, std::size_t batches = 25);

// Recall-bias calibration: log Nhat_k = a + b log N_k + delta_k + eps_k with
// delta_k ~ N(0, s_k^2) and eps_k ~ N(0, sigma_eps^2).

struct BackEstimatePoint {
  double estimate = 0.0;    // posterior mean of the size
  double log_sd = 0.0;      // posterior SD of log size (s_k)
  double true_size = 0.0;
};

struct RecallCalibration {
  double a = 0.0;
  double b = 1.0;
  double sigma_eps = 0.0;
  double log_likelihood = 0.0;
};

double recall_log_likelihood(std::span<const BackEstimatePoint> points, double a, double b,
                             double sigma_eps);

/// Maximum likelihood over the box [0,15] x [0,1] x [0,1]. For fixed sigma_eps
/// the optimum in (a, b) is a box-constrained weighted least-squares problem
/// solved exactly; sigma_eps is searched by golden section from `restarts`
/// starting brackets. Throws FitDiverged when every restart ends at b = 0.
RecallCalibration fit_recall_calibration(std::span<const BackEstimatePoint> points,
                                         std::size_t restarts = 8);

/// Replaces each log-size draw Y with (Y - a)/b + Z, Z ~ Normal(0, sigma_eps^2 / b^2).
std::vector<double> recall_adjust_draws(std::span<const double> log_size_draws,
                                        const RecallCalibration& cal, RandomStream& rng);

}  // namespace nsum
