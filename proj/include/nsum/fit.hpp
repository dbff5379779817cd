#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsum/core.hpp"
#include "nsum/engine.hpp"
#include "nsum/postprocess.hpp"

namespace nsum {

/// Output of fit_model: one PosteriorDraws per chain.
struct FitResult {
  std::vector<PosteriorDraws> chains;
  std::vector<std::string> warnings;

  const std::vector<std::string>& names() const { return chains.front().names; }
  /// Draws of `name` from every chain, concatenated in chain order.
  std::vector<double> pooled(std::string_view name) const;
  /// PSRF of `name`; empty with a single chain or a constant parameter.
  std::optional<double> psrf(std::string_view name) const;
  /// Summary of the unknown group's size in persons.
  PosteriorSummary size_summary() const;
};

/// Runs config.n_chains chains, each with its own pilot, starting from the
/// scale-up point. Chain c draws from RandomStream(config.seed,
/// derive_stream_id(stream_salt, c)). Chains run on separate threads unless
/// `parallel` is false.
FitResult fit_model(const ModelSpec& spec, const SurveyDataset& data, const ChainConfig& config,
                    std::uint64_t stream_salt = 0, bool parallel = true);

}  // namespace nsum
