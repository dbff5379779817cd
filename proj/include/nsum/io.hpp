#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsum/core.hpp"
#include "nsum/engine.hpp"
#include "nsum/fit.hpp"
#include "nsum/postprocess.hpp"
#include "nsum/study.hpp"

namespace nsum {

/// Responses file: comma-separated, header row of group labels, one row of
/// nonnegative integer counts per respondent. Blank lines are skipped.
struct ResponseTable {
  std::vector<std::string> labels;
  std::vector<std::vector<std::int64_t>> rows;
};

ResponseTable parse_responses_csv(std::string_view text, const std::string& source);
ResponseTable read_responses_csv(const std::filesystem::path& path);

/// Chain settings a config file may set; unset fields fall back to
/// ChainConfig::defaults_for(kind).
struct ChainOverrides {
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> burn_in;
  std::optional<std::size_t> thin;
  std::optional<std::size_t> pilot_iterations;
  std::optional<std::size_t> chains;
  std::optional<std::uint64_t> seed;

  /// Fields set in `other` win.
  ChainOverrides merged_with(const ChainOverrides& other) const;
  ChainConfig resolve(ModelKind kind) const;
};

/// Model/prior config file (JSON, schema_version 1). Unknown keys are errors.
///
///   {
///     "schema_version": 1,
///     "total_population": 1000000,
///     "unknown_group": "idu",
///     "known_sizes": {"label": 1234, ...},
///     "model": {
///       "kind": "transmission",
///       "mu_range": [3, 8],
///       "sigma_range": [0.25, 2],
///       "transmission_prior": {"m": 0.542, "rho": 0.011},
///       "jacobian": "exact"
///     },
///     "chain": {"iterations": 30000, "burn_in": 3000, "thin": 1,
///               "pilot_iterations": 1000, "chains": 2, "seed": 1}
///   }
struct RunConfig {
  std::int64_t total_population = 0;
  std::string unknown_group;
  std::map<std::string, std::int64_t> known_sizes;
  std::optional<ModelKind> kind;
  Interval mu_range{3.0, 8.0};
  Interval sigma_range{0.25, 2.0};
  std::optional<BetaMR> transmission_prior;
  JacobianMode jacobian_mode = JacobianMode::Exact;
  ChainOverrides chain;
};

RunConfig parse_run_config(std::string_view json_text, const std::string& source);
RunConfig load_run_config(const std::filesystem::path& path);

/// Pairs the responses with the config's sizes. Every non-unknown label
/// needs a size and every size needs a column.
SurveyDataset build_dataset(const ResponseTable& table, const RunConfig& config);
/// ModelSpec from the config; `kind` overrides the config's model kind.
ModelSpec build_model_spec(const RunConfig& config, std::optional<ModelKind> kind,
                           std::optional<JacobianMode> jacobian);

/// Recall calibration file: {"a": .., "b": .., "sigma_eps": ..,
/// "log_likelihood": .., "max_known_prevalence": ..}; the last two optional.
struct CalibrationFile {
  RecallCalibration calibration;
  /// Largest prevalence among the groups the calibration was fitted on.
  std::optional<double> max_known_prevalence;
};
CalibrationFile parse_calibration(std::string_view json_text, const std::string& source);
CalibrationFile load_calibration(const std::filesystem::path& path);
std::string calibration_json(const CalibrationFile& file);

/// Simulation regime file. Starts from SimRegime::defaults(kind) and
/// overrides any of: n_respondents, n_datasets, total_population,
/// unknown_size, degree_mu, degree_sigma, known_sizes (list) or
/// known_prevalence_range ([lo, hi, count]), rho (number or list), tau,
/// tau_prior ({m, rho}).
SimRegime parse_regime(std::string_view json_text, const std::string& source);
SimRegime load_regime(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

/// Draws table: chain, iteration, then one column per traced parameter.
std::string draws_csv(const FitResult& fit);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace nsum
