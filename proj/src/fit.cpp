#include "nsum/fit.hpp"

#include <exception>
#include <thread>

#include "nsum/models.hpp"

namespace nsum {

std::vector<double> FitResult::pooled(std::string_view name) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto& t = c.trace(name);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::optional<double> FitResult::psrf(std::string_view name) const {
  if (chains.size() < 2 || chains.front().size() < 10) return std::nullopt;
  std::vector<std::vector<double>> traces;
  for (const auto& c : chains) traces.push_back(c.trace(name));
  try {
    return gelman_rubin(traces);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ZeroWithinVariance) return std::nullopt;
    throw;
  }
}

PosteriorSummary FitResult::size_summary() const { return summarize(pooled("N_K")); }

FitResult fit_model(const ModelSpec& spec, const SurveyDataset& data, const ChainConfig& config,
                    std::uint64_t stream_salt, bool parallel) {
  config.validate();
  spec.validate();
  FitResult result;
  const auto start = initial_state(spec, data, &result.warnings);
  const auto sampler = make_sampler(spec, data);

  result.chains.resize(config.n_chains);
  std::vector<std::exception_ptr> failures(config.n_chains);
  const auto run_one = [&](std::size_t c) {
    try {
      RandomStream rng(config.seed, derive_stream_id(stream_salt, c));
      const auto pilot = run_pilot(*sampler, config, start, rng);
      result.chains[c] = run_chain(*sampler, config, pilot.scales, pilot.final_state, rng);
    } catch (...) {
      failures[c] = std::current_exception();
    }
  };

  if (parallel && config.n_chains > 1) {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < config.n_chains; ++c) workers.emplace_back(run_one, c);
  } else {
    for (std::size_t c = 0; c < config.n_chains; ++c) run_one(c);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return result;
}

}  // namespace nsum
