#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsum/core.hpp"
#include "nsum/error.hpp"
#include "nsum/numerics.hpp"

namespace nsum {

/// Standard deviations of the normal random-walk proposals.
struct ProposalScale {
  std::vector<double> blocks;        // scalar blocks, in ModelSampler::block_names() order
  std::vector<double> degrees;       // one per respondent
  std::vector<double> propensities;  // n x K row-major; combined model only

  void validate() const;
};

struct ChainConfig {
  std::size_t n_iterations = 30000;
  std::size_t burn_in = 3000;
  std::size_t thin = 1;
  std::size_t pilot_iterations = 1000;
  std::size_t n_chains = 2;
  std::uint64_t seed = 1;
  /// Keep full traces of d_i (and q_ik) instead of running mean/variance.
  bool store_latent_traces = false;

  void validate() const;
  std::size_t stored_draws() const;

  /// 30 000 iterations (150 000 for the combined model), 10% burn-in.
  static ChainConfig defaults_for(ModelKind kind);
  /// Same config with burn-in reset to 10% of `iterations`.
  ChainConfig with_iterations(std::size_t iterations) const;
};

enum class BoundMode { Reject, Reflect };

struct MhResult {
  double value;
  bool accepted;
};

/// One random-walk Metropolis update with a Normal(0, scale^2) increment.
///
/// Reject mode keeps the current value when the proposal leaves `bounds`;
/// reflect mode folds the proposal back inside, which keeps the kernel
/// symmetric.
template <class LogDensity>
MhResult mh_step(double current, LogDensity&& log_density, double scale,
                 const std::optional<Interval>& bounds, BoundMode mode, RandomStream& rng) {
  const double current_lp = log_density(current);
  if (!std::isfinite(current_lp)) {
    throw Error(ErrorCode::NonFiniteDensity, "log density not finite at current value " +
                                                 std::to_string(current));
  }
  double proposal = current + scale * rng.normal();
  if (bounds) {
    if (mode == BoundMode::Reflect) {
      proposal = reflect_into(proposal, bounds->lo, bounds->hi);
    }
    if (!bounds->contains(proposal)) return {current, false};
  }
  const double proposal_lp = log_density(proposal);
  if (std::isnan(proposal_lp) || proposal_lp == kNegInf) return {current, false};
  const double log_ratio = proposal_lp - current_lp;
  if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) return {proposal, true};
  return {current, false};
}

struct AcceptanceCount {
  std::string name;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;

  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
  void record(bool ok) {
    ++proposed;
    if (ok) ++accepted;
  }
};

/// A model's Metropolis-within-Gibbs sweep plus the bookkeeping the engine
/// needs to tune and store it.
class ModelSampler {
 public:
  virtual ~ModelSampler() = default;

  virtual const SurveyDataset& data() const = 0;
  virtual const ModelSpec& spec() const = 0;
  virtual ChainState initial_state() const = 0;

  /// Scalar Metropolis blocks tuned by regression on the pilot chain.
  virtual std::vector<std::string> block_names() const = 0;
  virtual void block_values(const ChainState& s, std::span<double> out) const = 0;
  virtual bool samples_propensities() const { return false; }

  /// One sweep: mu, sigma^2, scalar blocks, degrees, then propensities.
  /// `tally` has one entry per block, then "degrees", then "propensities"
  /// when sampled.
  virtual void sweep(ChainState& s, const ProposalScale& scales, RandomStream& rng,
                     std::span<AcceptanceCount> tally) const = 0;

  /// Parameters written to the draws table, one value each per stored draw.
  virtual std::vector<std::string> trace_names() const = 0;
  virtual void trace_values(const ChainState& s, std::span<double> out) const = 0;

  std::vector<AcceptanceCount> make_tally() const;
  /// |start| * 0.1, floored at 0.01, for every proposal.
  ProposalScale heuristic_scales(const ChainState& start) const;
};

struct PosteriorDraws {
  ModelSpec spec;
  ChainConfig config;
  std::vector<std::string> names;
  std::vector<std::vector<double>> traces;  // traces[j] holds draws of names[j]
  std::vector<AcceptanceCount> acceptance;

  std::vector<double> degree_mean;
  std::vector<double> degree_var;
  std::vector<double> propensity_mean;
  std::vector<double> propensity_var;
  /// Filled only when config.store_latent_traces is set.
  std::vector<std::vector<double>> degree_traces;
  std::vector<std::vector<double>> propensity_traces;

  ChainState final_state;

  std::size_t size() const { return traces.empty() ? 0 : traces.front().size(); }
  bool has(std::string_view name) const;
  const std::vector<double>& trace(std::string_view name) const;
};

struct PilotResult {
  ProposalScale scales;
  ChainState final_state;
  std::vector<AcceptanceCount> acceptance;  // of the last pilot stage
  std::size_t stages = 0;
};

/// Pilot-chain tuning. Each scalar block's scale is 2.3 times the residual
/// standard error of its pilot draws regressed on every other scalar block
/// (mu and sigma included); degrees and propensities use 2.3 times their
/// marginal pilot standard deviation. The pilot runs in stages of
/// pilot_iterations / 2 sweeps, re-tuning between stages, until acceptance
/// settles or four stages have run.
PilotResult run_pilot(const ModelSampler& sampler, const ChainConfig& pilot, RandomStream& rng);
PilotResult run_pilot(const ModelSampler& sampler, const ChainConfig& pilot, const ChainState& start,
                      RandomStream& rng);
ProposalScale tune_proposals(const ModelSampler& sampler, const ChainConfig& pilot, RandomStream& rng);

/// 2.3 x residual standard error of y regressed (OLS, with intercept) on the
/// columns of `regressors`; floored at 1e-8.
double regression_proposal_scale(std::span<const double> y,
                                 const std::vector<std::vector<double>>& regressors);

PosteriorDraws run_chain(const ModelSampler& sampler, const ChainConfig& config,
                         const ProposalScale& scales, RandomStream& rng);
PosteriorDraws run_chain(const ModelSampler& sampler, const ChainConfig& config,
                         const ProposalScale& scales, const ChainState& start, RandomStream& rng);

}  // namespace nsum
