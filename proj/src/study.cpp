#include "nsum/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include <boost/math/distributions/beta.hpp>

#include "nsum/error.hpp"

namespace nsum {

namespace {

// Stream tags, so simulation, fitting and bootstrap never share a stream.
constexpr std::uint64_t kSimulateTag = 0x53494d;
constexpr std::uint64_t kFitTag = 0x464954;
constexpr std::uint64_t kBootstrapTag = 0x424f4f54;
constexpr std::uint64_t kBackTag = 0x4241434b;

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t j = 0; j < count; ++j) job(j);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t j = next++; j < count; j = next++) job(j);
    });
  }
}

double sd_of(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::vector<double> tau_quantiles(const FitResult& fit, const ModelSpec& spec) {
  if (!uses_transmission(spec.kind) || spec.fixed_tau || !fit.chains.front().has("tau_K")) return {};
  auto draws = fit.pooled("tau_K");
  std::sort(draws.begin(), draws.end());
  return {quantile_type7(draws, 0.025), quantile_type7(draws, 0.5), quantile_type7(draws, 0.975)};
}

void aggregate(StudyReport& report) {
  std::vector<double> errors;
  std::size_t hit80 = 0;
  std::size_t hit95 = 0;
  for (const auto& r : report.records) {
    if (!r.ok) {
      ++report.failures;
      continue;
    }
    errors.push_back(std::abs(r.estimate - r.truth) / r.truth);
    if (r.ci80.contains(r.truth)) ++hit80;
    if (r.ci95.contains(r.truth)) ++hit95;
  }
  report.datasets = report.records.size();
  if (errors.empty()) return;
  const auto ok = static_cast<double>(errors.size());
  for (double e : errors) report.mae += e;
  report.mae /= ok;
  report.mae_se = sd_of(errors) / std::sqrt(ok);
  report.coverage80 = static_cast<double>(hit80) / ok;
  report.coverage95 = static_cast<double>(hit95) / ok;
}

}  // namespace

std::string_view to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::NoBias:
      return "no_bias";
    case RegimeKind::Barrier:
      return "barrier";
    case RegimeKind::Transmission:
      return "transmission";
  }
  return "unknown";
}

RegimeKind parse_regime_kind(std::string_view text) {
  if (text == "no_bias" || text == "nobias" || text == "none") return RegimeKind::NoBias;
  if (text == "barrier") return RegimeKind::Barrier;
  if (text == "transmission") return RegimeKind::Transmission;
  throw Error(ErrorCode::InvalidConfig, "unknown regime '" + std::string(text) +
                                            "' (expected no_bias, barrier or transmission)");
}

void SimRegime::validate() const {
  if (n_respondents == 0) throw Error(ErrorCode::InvalidConfig, "n_respondents must be positive");
  if (n_datasets == 0) throw Error(ErrorCode::InvalidConfig, "n_datasets must be positive");
  if (total_population <= 0) throw Error(ErrorCode::InvalidConfig, "total_population must be positive");
  if (unknown_size <= 0 || unknown_size >= total_population) {
    throw Error(ErrorCode::InvalidConfig, "unknown_size must lie in (0, total_population)");
  }
  if (known_sizes.empty()) throw Error(ErrorCode::InvalidConfig, "at least one known group is required");
  for (std::size_t k = 0; k < known_sizes.size(); ++k) {
    if (known_sizes[k] <= 0 || known_sizes[k] >= total_population) {
      throw Error(ErrorCode::InvalidConfig, "known size " + std::to_string(k + 1) + " must lie in (0, total_population)");
    }
  }
  if (!(degree_sigma > 0.0) || !std::isfinite(degree_mu)) {
    throw Error(ErrorCode::InvalidConfig, "degree parameters must be finite with sigma > 0");
  }
  const bool barrier = kind == RegimeKind::Barrier;
  if (barrier != !rho.empty()) {
    throw Error(ErrorCode::InvalidConfig, "rho is required for the barrier regime and only there");
  }
  if (barrier) {
    if (rho.size() != groups()) {
      throw Error(ErrorCode::InvalidConfig, "rho needs one value per group (" + std::to_string(groups()) + ")");
    }
    for (double r : rho) {
      if (!(r > 0.0 && r < 1.0)) throw Error(ErrorCode::InvalidConfig, "rho values must lie in (0, 1)");
    }
  }
  const bool transmission = kind == RegimeKind::Transmission;
  if (transmission != tau.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "tau is required for the transmission regime and only there");
  }
  if (tau && !(*tau > 0.0 && *tau <= 1.0)) throw Error(ErrorCode::InvalidConfig, "tau must lie in (0, 1]");
  if (tau_prior) beta_mr_to_shapes(*tau_prior);
}

std::vector<std::int64_t> log_spaced_sizes(std::int64_t total, std::size_t count, double lo, double hi) {
  std::vector<std::int64_t> sizes;
  for (std::size_t j = 0; j < count; ++j) {
    const double t = count == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(count - 1);
    const double p = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    sizes.push_back(std::max<std::int64_t>(1, std::llround(p * static_cast<double>(total))));
  }
  return sizes;
}

SimRegime SimRegime::defaults(RegimeKind kind) {
  SimRegime r;
  r.kind = kind;
  if (kind == RegimeKind::Transmission) {
    r.unknown_size = 65'000;
    r.total_population = std::llround(65'000.0 / 0.036);
    r.tau = 0.54;
    r.tau_prior = BetaMR{0.542, 0.011};
  }
  r.known_sizes = log_spaced_sizes(r.total_population, 20, 0.0005, 0.03);
  if (kind == RegimeKind::Barrier) r.rho.assign(r.groups(), 0.08);
  return r;
}

SimulatedDataset simulate_dataset(const SimRegime& regime, RandomStream& rng) {
  regime.validate();
  const std::size_t n = regime.n_respondents;
  const std::size_t groups = regime.groups();
  const auto total = static_cast<double>(regime.total_population);

  std::vector<double> prevalence;
  for (auto size : regime.known_sizes) prevalence.push_back(static_cast<double>(size) / total);
  prevalence.push_back(static_cast<double>(regime.unknown_size) / total);

  SimTruth truth;
  truth.unknown_size = regime.unknown_size;
  truth.tau = regime.tau.value_or(1.0);
  RawSurvey raw;
  raw.total_population = regime.total_population;
  raw.known_sizes = regime.known_sizes;
  raw.rows.resize(n);
  if (regime.kind == RegimeKind::Barrier) truth.q.resize(n * groups);

  for (std::size_t i = 0; i < n; ++i) {
    const double d = rng.lognormal(regime.degree_mu, regime.degree_sigma);
    const std::int64_t trials = std::max<std::int64_t>(1, std::llround(d));
    truth.degrees.push_back(d);
    truth.trials.push_back(trials);
    for (std::size_t k = 0; k < groups; ++k) {
      double p = prevalence[k];
      if (regime.kind == RegimeKind::Barrier) {
        const auto shapes = beta_mr_to_shapes({p, regime.rho[k]});
        p = rng.beta(shapes.alpha, shapes.beta);
        truth.q[i * groups + k] = p;
      } else if (k + 1 == groups) {
        p *= truth.tau;
      }
      raw.rows[i].push_back(rng.binomial(trials, p));
    }
  }
  return {validate_dataset(raw), std::move(truth)};
}

double simulation_log_likelihood(const SurveyDataset& data, const SimTruth& truth) {
  const std::size_t groups = data.groups();
  const auto total = static_cast<double>(data.total_population());
  double ll = 0.0;
  for (std::size_t i = 0; i < data.respondents(); ++i) {
    const auto trials = static_cast<double>(truth.trials[i]);
    for (std::size_t k = 0; k < groups; ++k) {
      double p = 0.0;
      if (!truth.q.empty()) {
        p = truth.q[i * groups + k];
      } else if (data.is_known(k)) {
        p = data.known_prevalence(k);
      } else {
        p = truth.tau * static_cast<double>(truth.unknown_size) / total;
      }
      const auto y = static_cast<double>(data.response(i, k));
      ll += log_choose(trials, data.response(i, k));
      if (y > 0.0) ll += y * std::log(p);
      if (trials > y) ll += (trials - y) * std::log1p(-p);
    }
  }
  return ll;
}

ScaleupInterval scaleup_bootstrap(const SurveyDataset& data, std::size_t resamples, RandomStream& rng) {
  if (resamples < 100) throw Error(ErrorCode::Precondition, "bootstrap needs at least 100 resamples");
  ScaleupInterval out;
  const auto degrees = scaleup_degrees(data);
  out.estimate = scaleup_size(data, degrees);
  const std::size_t n = data.respondents();
  const double total = static_cast<double>(data.total_population());
  std::vector<double> draws;
  for (std::size_t b = 0; b < resamples; ++b) {
    double y_sum = 0.0;
    double d_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
      i = std::min(i, n - 1);
      y_sum += static_cast<double>(data.response(i, data.unknown_index()));
      d_sum += degrees[i];
    }
    if (d_sum > 0.0) draws.push_back(total * y_sum / d_sum);
  }
  std::sort(draws.begin(), draws.end());
  out.ci80 = {quantile_type7(draws, 0.10), quantile_type7(draws, 0.90)};
  out.ci95 = {quantile_type7(draws, 0.025), quantile_type7(draws, 0.975)};
  return out;
}

std::vector<StudyReport> run_study(const SimRegime& regime, const std::vector<StudyModel>& models,
                                   const ChainConfig& config, const StudyOptions& options) {
  regime.validate();
  config.validate();
  if (models.empty()) throw Error(ErrorCode::InvalidConfig, "no models to study");
  for (const auto& m : models) {
    if (m.spec) m.spec->validate();
  }

  std::vector<StudyReport> reports(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    reports[m].model = models[m].name;
    reports[m].records.resize(regime.n_datasets);
  }

  parallel_for(regime.n_datasets, options.workers, [&](std::size_t j) {
    RandomStream sim_rng(config.seed, derive_stream_id(kSimulateTag, j));
    const auto sim = simulate_dataset(regime, sim_rng);
    for (std::size_t m = 0; m < models.size(); ++m) {
      DatasetRecord& rec = reports[m].records[j];
      rec.index = j;
      rec.truth = static_cast<double>(regime.unknown_size);
      try {
        if (!models[m].spec) {
          RandomStream boot_rng(config.seed, derive_stream_id(kBootstrapTag, j, m));
          const auto s = scaleup_bootstrap(sim.data, options.bootstrap_resamples, boot_rng);
          rec.estimate = s.estimate;
          rec.ci80 = s.ci80;
          rec.ci95 = s.ci95;
        } else {
          const auto fit = fit_model(*models[m].spec, sim.data, config, derive_stream_id(kFitTag, j, m), false);
          const auto summary = fit.size_summary();
          rec.estimate = summary.mean;
          rec.ci80 = summary.ci80;
          rec.ci95 = summary.ci95;
          rec.psrf = fit.psrf("N_K");
          rec.tau_quantiles = tau_quantiles(fit, *models[m].spec);
        }
        rec.ok = true;
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
  });

  for (auto& r : reports) aggregate(r);
  return reports;
}

std::vector<BackEstimatePoint> BackEstimateResult::calibration_points() const {
  std::vector<BackEstimatePoint> points;
  for (const auto& g : groups) {
    if (g.ok) points.push_back({g.summary.mean, g.log_sd, g.true_size});
  }
  return points;
}

BackEstimateResult back_estimate(const SurveyDataset& data, const ModelSpec& spec, const ChainConfig& config,
                                 const StudyOptions& options) {
  if (data.groups() < 3) {
    throw Error(ErrorCode::Precondition, "back estimation needs at least 3 groups, got " +
                                             std::to_string(data.groups()));
  }
  spec.validate();
  config.validate();
  std::vector<std::size_t> columns;
  for (std::size_t k = 0; k < data.groups(); ++k) {
    if (data.is_known(k)) columns.push_back(k);
  }

  BackEstimateResult result;
  result.groups.resize(columns.size());
  parallel_for(columns.size(), options.workers, [&](std::size_t j) {
    const std::size_t k = columns[j];
    auto& g = result.groups[j];
    g.label = data.labels()[k];
    g.true_size = static_cast<double>(data.known_size(k));
    try {
      const auto held_out = data.relabel_unknown(k);
      const auto fit = fit_model(spec, held_out, config, derive_stream_id(kBackTag, k), false);
      const auto draws = fit.pooled("N_K");
      g.summary = summarize(draws);
      std::vector<double> logs;
      for (double v : draws) logs.push_back(std::log(v));
      g.log_sd = sd_of(logs);
      g.ok = true;
    } catch (const std::exception& e) {
      g.ok = false;
      g.error = e.what();
    }
  });

  std::size_t ok = 0, hit80 = 0, hit95 = 0;
  for (const auto& g : result.groups) {
    if (!g.ok) {
      ++result.failures;
      continue;
    }
    ++ok;
    result.mae += std::abs(g.summary.mean - g.true_size) / g.true_size;
    if (g.summary.ci80.contains(g.true_size)) ++hit80;
    if (g.summary.ci95.contains(g.true_size)) ++hit95;
  }
  if (ok > 0) {
    result.mae /= static_cast<double>(ok);
    result.coverage80 = static_cast<double>(hit80) / static_cast<double>(ok);
    result.coverage95 = static_cast<double>(hit95) / static_cast<double>(ok);
  }
  return result;
}

PriorPosteriorReport prior_posterior_report(std::span<const double> tau_draws, const BetaMR& prior) {
  if (tau_draws.size() < 100) {
    throw Error(ErrorCode::TooFewDraws, "prior/posterior report needs at least 100 draws, got " +
                                            std::to_string(tau_draws.size()));
  }
  const auto shapes = beta_mr_to_shapes(prior);
  const boost::math::beta_distribution<double> dist(shapes.alpha, shapes.beta);
  PriorPosteriorReport report;
  report.prior = {boost::math::quantile(dist, 0.025), boost::math::quantile(dist, 0.5),
                  boost::math::quantile(dist, 0.975)};
  std::vector<double> sorted(tau_draws.begin(), tau_draws.end());
  std::sort(sorted.begin(), sorted.end());
  report.posterior = {quantile_type7(sorted, 0.025), quantile_type7(sorted, 0.5), quantile_type7(sorted, 0.975)};
  return report;
}

}  // namespace nsum
