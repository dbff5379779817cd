#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsum/core.hpp"
#include "nsum/engine.hpp"
#include "nsum/fit.hpp"
#include "nsum/postprocess.hpp"

namespace nsum {

enum class RegimeKind { NoBias, Barrier, Transmission };

std::string_view to_string(RegimeKind kind);
RegimeKind parse_regime_kind(std::string_view text);

struct SimRegime {
  RegimeKind kind = RegimeKind::NoBias;
  std::size_t n_respondents = 500;
  std::size_t n_datasets = 100;
  std::int64_t total_population = 250'000'000;
  std::int64_t unknown_size = 500'000;
  double degree_mu = 6.0;
  double degree_sigma = 0.8;
  /// Sizes of the known groups; the unknown group is the last column.
  std::vector<std::int64_t> known_sizes;
  /// Barrier only: one rho per column, unknown last.
  std::vector<double> rho;
  /// Transmission only.
  std::optional<double> tau;
  std::optional<BetaMR> tau_prior;

  void validate() const;
  std::size_t groups() const { return known_sizes.size() + 1; }

  /// Built-in regimes: 20 known groups with prevalences log-spaced over
  /// 0.05%-3%, degrees LogNormal(6, 0.8^2). No-bias and barrier use N = 2.5e8
  /// and N_K = 5e5 (barrier rho = 0.08 everywhere); transmission uses
  /// N_K = 65 000 at 3.6% prevalence, tau = 0.54 and a Beta(0.542, 0.011) prior.
  static SimRegime defaults(RegimeKind kind);
};

/// Known-group sizes round(p_j N) for p_j log-spaced from lo to hi.
std::vector<std::int64_t> log_spaced_sizes(std::int64_t total, std::size_t count, double lo, double hi);

struct SimTruth {
  std::vector<double> degrees;             // continuous draws
  std::vector<std::int64_t> trials;        // rounded degrees used as binomial trial counts
  std::vector<double> q;                   // n x K propensities; barrier only
  double tau = 1.0;
  std::int64_t unknown_size = 0;
};

struct SimulatedDataset {
  SurveyDataset data;
  SimTruth truth;
};

SimulatedDataset simulate_dataset(const SimRegime& regime, RandomStream& rng);

/// Log-likelihood of the responses given the truth record (binomial terms
/// only, with the latent q when present).
double simulation_log_likelihood(const SurveyDataset& data, const SimTruth& truth);

/// A model in a study. An empty spec means the classical scale-up estimator,
/// whose intervals come from a respondent bootstrap.
struct StudyModel {
  std::string name;
  std::optional<ModelSpec> spec;
};

struct DatasetRecord {
  std::size_t index = 0;
  double truth = 0.0;
  bool ok = false;
  std::string error;
  double estimate = 0.0;
  CredibleInterval ci80;
  CredibleInterval ci95;
  std::optional<double> psrf;
  /// 2.5%, 50%, 97.5% posterior quantiles of tau_K when the model samples it.
  std::vector<double> tau_quantiles;
};

struct StudyReport {
  std::string model;
  std::size_t datasets = 0;
  std::size_t failures = 0;
  double mae = 0.0;     // mean of |estimate - truth| / truth over successful fits
  double mae_se = 0.0;  // SD / sqrt(successful fits)
  double coverage80 = 0.0;
  double coverage95 = 0.0;
  std::vector<DatasetRecord> records;
};

struct StudyOptions {
  std::size_t bootstrap_resamples = 1000;
  /// 0: one worker per hardware thread.
  std::size_t workers = 0;
};

/// Simulates regime.n_datasets datasets and fits every model on each.
/// Dataset j is simulated from RandomStream(config.seed, derive_stream_id(tag, j));
/// results do not depend on the worker count.
std::vector<StudyReport> run_study(const SimRegime& regime, const std::vector<StudyModel>& models,
                                   const ChainConfig& config, const StudyOptions& options = {});

/// Bootstrap percentile intervals for the scale-up size estimate.
struct ScaleupInterval {
  double estimate = 0.0;
  CredibleInterval ci80;
  CredibleInterval ci95;
};
ScaleupInterval scaleup_bootstrap(const SurveyDataset& data, std::size_t resamples, RandomStream& rng);

struct BackEstimateGroup {
  std::string label;
  double true_size = 0.0;
  bool ok = false;
  std::string error;
  PosteriorSummary summary;
  double log_sd = 0.0;
};

struct BackEstimateResult {
  std::vector<BackEstimateGroup> groups;
  double mae = 0.0;
  double coverage80 = 0.0;
  double coverage95 = 0.0;
  std::size_t failures = 0;

  std::vector<BackEstimatePoint> calibration_points() const;
};

/// Refits with each known group in turn treated as unknown. The original
/// unknown column is dropped, so K >= 3 is required.
BackEstimateResult back_estimate(const SurveyDataset& data, const ModelSpec& spec, const ChainConfig& config,
                                 const StudyOptions& options = {});

struct QuantileRow {
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

struct PriorPosteriorReport {
  QuantileRow prior;
  QuantileRow posterior;
};

/// Prior quantiles from the beta distribution, posterior quantiles from the
/// draws (type 7). Needs at least 100 draws.
PriorPosteriorReport prior_posterior_report(std::span<const double> tau_draws, const BetaMR& prior);

}  // namespace nsum
