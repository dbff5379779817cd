#include "nsum/engine.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace nsum {

namespace {

constexpr double kProposalMultiplier = 2.3;
constexpr double kScaleFloor = 1e-8;
constexpr std::size_t kMaxPilotStages = 4;

// Welford running mean/variance for one coordinate.
struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

double retune(double old_scale, double estimate, double acceptance) {
  // A stuck or free-running stage says more about the old scale than the
  // draws do about the posterior.
  if (acceptance < 0.05) return std::max(kScaleFloor, std::min(estimate, 0.2 * old_scale));
  if (acceptance > 0.9) return std::max(estimate, 3.0 * old_scale);
  return estimate;
}

bool in_band(double rate) { return rate >= 0.15 && rate <= 0.7; }

}  // namespace

void ProposalScale::validate() const {
  const auto check = [](const std::vector<double>& v, const char* what) {
    for (double s : v) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw Error(ErrorCode::DomainError, std::string("nonpositive proposal scale in ") + what);
      }
    }
  };
  check(blocks, "blocks");
  check(degrees, "degrees");
  check(propensities, "propensities");
}

void ChainConfig::validate() const {
  if (n_iterations == 0) throw Error(ErrorCode::InvalidConfig, "n_iterations must be positive");
  if (burn_in >= n_iterations) throw Error(ErrorCode::InvalidConfig, "burn_in must be below n_iterations");
  if (thin == 0) throw Error(ErrorCode::InvalidConfig, "thin must be positive");
  if (pilot_iterations == 0) throw Error(ErrorCode::InvalidConfig, "pilot_iterations must be positive");
  if (n_chains == 0) throw Error(ErrorCode::InvalidConfig, "n_chains must be positive");
}

std::size_t ChainConfig::stored_draws() const {
  return (n_iterations - burn_in + thin - 1) / thin;
}

ChainConfig ChainConfig::defaults_for(ModelKind kind) {
  ChainConfig c;
  return c.with_iterations(kind == ModelKind::Combined ? 150000 : 30000);
}

ChainConfig ChainConfig::with_iterations(std::size_t iterations) const {
  ChainConfig c = *this;
  c.n_iterations = iterations;
  c.burn_in = iterations / 10;
  return c;
}

std::vector<AcceptanceCount> ModelSampler::make_tally() const {
  std::vector<AcceptanceCount> tally;
  for (auto& name : block_names()) tally.push_back({name, 0, 0});
  tally.push_back({"degrees", 0, 0});
  if (samples_propensities()) tally.push_back({"propensities", 0, 0});
  return tally;
}

ProposalScale ModelSampler::heuristic_scales(const ChainState& start) const {
  const auto heuristic = [](double value) { return std::max(0.01, 0.1 * std::abs(value)); };
  ProposalScale scales;
  std::vector<double> values(block_names().size());
  block_values(start, values);
  for (double v : values) scales.blocks.push_back(heuristic(v));
  for (double d : start.degrees) scales.degrees.push_back(heuristic(d));
  if (samples_propensities()) {
    for (double q : start.q) scales.propensities.push_back(heuristic(q));
  }
  return scales;
}

bool PosteriorDraws::has(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<double>& PosteriorDraws::trace(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::Precondition, "no stored parameter named '" + std::string(name) + "'");
  }
  return traces[static_cast<std::size_t>(it - names.begin())];
}

double regression_proposal_scale(std::span<const double> y,
                                 const std::vector<std::vector<double>>& regressors) {
  const auto rows = static_cast<Eigen::Index>(y.size());
  const auto cols = static_cast<Eigen::Index>(regressors.size() + 1);
  if (rows <= cols) {
    throw Error(ErrorCode::Precondition, "pilot chain too short for the proposal regression");
  }
  Eigen::MatrixXd x(rows, cols);
  Eigen::VectorXd target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    x(r, 0) = 1.0;
    target(r) = y[static_cast<std::size_t>(r)];
  }
  for (Eigen::Index c = 1; c < cols; ++c) {
    const auto& col = regressors[static_cast<std::size_t>(c - 1)];
    for (Eigen::Index r = 0; r < rows; ++r) x(r, c) = col[static_cast<std::size_t>(r)];
  }
  // Centre and scale columns so the rank decision is insensitive to units.
  const double y_mean = target.mean();
  target.array() -= y_mean;
  for (Eigen::Index c = 1; c < cols; ++c) {
    const double m = x.col(c).mean();
    x.col(c).array() -= m;
    const double norm = x.col(c).norm();
    if (norm > 0.0) x.col(c) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.rightCols(cols - 1));
  qr.setThreshold(1e-10);
  const Eigen::VectorXd beta = qr.solve(target);
  const Eigen::VectorXd residual = target - x.rightCols(cols - 1) * beta;
  const auto dof = static_cast<double>(rows - 1 - qr.rank());
  const double rse = std::sqrt(residual.squaredNorm() / std::max(1.0, dof));
  return std::max(kScaleFloor, kProposalMultiplier * rse);
}

PilotResult run_pilot(const ModelSampler& sampler, const ChainConfig& pilot, RandomStream& rng) {
  return run_pilot(sampler, pilot, sampler.initial_state(), rng);
}

PilotResult run_pilot(const ModelSampler& sampler, const ChainConfig& pilot, const ChainState& start,
                      RandomStream& rng) {
  if (pilot.pilot_iterations < 200) {
    throw Error(ErrorCode::Precondition, "pilot_iterations must be at least 200");
  }
  check_state(start, sampler.spec(), sampler.data());
  const auto names = sampler.block_names();
  const std::size_t nb = names.size();
  const std::size_t n = sampler.data().respondents();
  const bool with_q = sampler.samples_propensities();
  const std::size_t stage_length = pilot.pilot_iterations / 2;

  PilotResult result;
  result.scales = sampler.heuristic_scales(start);
  ChainState state = start;
  std::vector<double> values(nb);

  for (std::size_t stage = 0; stage < kMaxPilotStages; ++stage) {
    auto tally = sampler.make_tally();
    // Stage 0 starts from the scale-up point; its first half is transient.
    const std::size_t record_from = stage == 0 ? stage_length / 2 : 0;
    std::vector<std::vector<double>> block_trace(nb + 2);
    std::vector<RunningMoments> degree_moments(n);
    std::vector<RunningMoments> q_moments(with_q ? state.q.size() : 0);

    for (std::size_t it = 0; it < stage_length; ++it) {
      sampler.sweep(state, result.scales, rng, tally);
      if (it < record_from) continue;
      sampler.block_values(state, values);
      for (std::size_t b = 0; b < nb; ++b) block_trace[b].push_back(values[b]);
      block_trace[nb].push_back(state.mu);
      block_trace[nb + 1].push_back(state.sigma);
      for (std::size_t i = 0; i < n; ++i) degree_moments[i].add(state.degrees[i]);
      for (std::size_t j = 0; j < q_moments.size(); ++j) q_moments[j].add(state.q[j]);
    }

    std::uint64_t accepted = 0;
    for (const auto& t : tally) accepted += t.accepted;
    if (accepted == 0) {
      throw Error(ErrorCode::PilotDegenerate, "pilot chain accepted no Metropolis proposal");
    }

    bool settled = true;
    for (std::size_t b = 0; b < nb; ++b) {
      std::vector<std::vector<double>> others;
      for (std::size_t o = 0; o < nb + 2; ++o) {
        if (o != b) others.push_back(block_trace[o]);
      }
      const double estimate = regression_proposal_scale(block_trace[b], others);
      result.scales.blocks[b] = retune(result.scales.blocks[b], estimate, tally[b].rate());
      settled = settled && in_band(tally[b].rate());
    }
    const double degree_rate = tally[nb].rate();
    settled = settled && in_band(degree_rate);
    for (std::size_t i = 0; i < n; ++i) {
      const double estimate =
          std::max(kScaleFloor, kProposalMultiplier * std::sqrt(degree_moments[i].variance()));
      const double old = result.scales.degrees[i];
      result.scales.degrees[i] = degree_moments[i].variance() > 0.0 ? retune(old, estimate, degree_rate)
                                                                    : std::max(kScaleFloor, 0.2 * old);
    }
    if (with_q) {
      const double q_rate = tally[nb + 1].rate();
      settled = settled && in_band(q_rate);
      for (std::size_t j = 0; j < q_moments.size(); ++j) {
        const double estimate =
            std::max(kScaleFloor, kProposalMultiplier * std::sqrt(q_moments[j].variance()));
        const double old = result.scales.propensities[j];
        result.scales.propensities[j] = q_moments[j].variance() > 0.0 ? retune(old, estimate, q_rate)
                                                                      : std::max(kScaleFloor, 0.2 * old);
      }
    }
    result.acceptance = std::move(tally);
    result.stages = stage + 1;
    if (stage >= 1 && settled) break;
  }
  result.final_state = std::move(state);
  return result;
}

ProposalScale tune_proposals(const ModelSampler& sampler, const ChainConfig& pilot, RandomStream& rng) {
  return run_pilot(sampler, pilot, rng).scales;
}

PosteriorDraws run_chain(const ModelSampler& sampler, const ChainConfig& config,
                         const ProposalScale& scales, RandomStream& rng) {
  return run_chain(sampler, config, scales, sampler.initial_state(), rng);
}

PosteriorDraws run_chain(const ModelSampler& sampler, const ChainConfig& config,
                         const ProposalScale& scales, const ChainState& start, RandomStream& rng) {
  config.validate();
  scales.validate();
  check_state(start, sampler.spec(), sampler.data());

  PosteriorDraws out;
  out.spec = sampler.spec();
  out.config = config;
  out.names = sampler.trace_names();
  const std::size_t stored = config.stored_draws();
  out.traces.assign(out.names.size(), {});
  for (auto& t : out.traces) t.reserve(stored);

  const std::size_t n = sampler.data().respondents();
  const bool with_q = sampler.samples_propensities();
  std::vector<RunningMoments> degree_moments(n);
  std::vector<RunningMoments> q_moments(with_q ? start.q.size() : 0);
  if (config.store_latent_traces) {
    out.degree_traces.assign(n, {});
    out.propensity_traces.assign(q_moments.size(), {});
  }

  auto tally = sampler.make_tally();
  ChainState state = start;
  std::vector<double> values(out.names.size());
  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    try {
      sampler.sweep(state, scales, rng, tally);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteDensity) throw;
      throw Error(ErrorCode::NonFiniteDensity, "iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it < config.burn_in || (it - config.burn_in) % config.thin != 0) continue;
    sampler.trace_values(state, values);
    for (std::size_t j = 0; j < values.size(); ++j) out.traces[j].push_back(values[j]);
    for (std::size_t i = 0; i < n; ++i) {
      degree_moments[i].add(state.degrees[i]);
      if (config.store_latent_traces) out.degree_traces[i].push_back(state.degrees[i]);
    }
    for (std::size_t j = 0; j < q_moments.size(); ++j) {
      q_moments[j].add(state.q[j]);
      if (config.store_latent_traces) out.propensity_traces[j].push_back(state.q[j]);
    }
  }

  for (const auto& m : degree_moments) {
    out.degree_mean.push_back(m.mean);
    out.degree_var.push_back(m.variance());
  }
  for (const auto& m : q_moments) {
    out.propensity_mean.push_back(m.mean);
    out.propensity_var.push_back(m.variance());
  }
  out.acceptance = std::move(tally);
  out.final_state = std::move(state);
  return out;
}

}  // namespace nsum
