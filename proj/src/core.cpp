#include "nsum/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nsum/error.hpp"

namespace nsum {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeResponse: return "NegativeResponse";
    case ErrorCode::KnownSizeExceedsTotal: return "KnownSizeExceedsTotal";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateSamples: return "DegenerateSamples";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::NonFiniteDensity: return "NonFiniteDensity";
    case ErrorCode::PilotDegenerate: return "PilotDegenerate";
    case ErrorCode::ZeroDegreeSum: return "ZeroDegreeSum";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::TooFewDraws: return "TooFewDraws";
    case ErrorCode::ZeroWithinVariance: return "ZeroWithinVariance";
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

BetaShapes beta_mr_to_shapes(const BetaMR& p) {
  if (!(p.m > 0.0 && p.m < 1.0) || !(p.rho > 0.0 && p.rho < 1.0)) {
    throw Error(ErrorCode::DomainError, "Beta(m, rho) needs m and rho in (0, 1), got m=" +
                                            std::to_string(p.m) + " rho=" + std::to_string(p.rho));
  }
  const double total = 1.0 / p.rho - 1.0;
  return {p.m * total, (1.0 - p.m) * total};
}

BetaMR beta_shapes_to_mr(const BetaShapes& s) {
  if (!(s.alpha > 0.0) || !(s.beta > 0.0)) {
    throw Error(ErrorCode::DomainError, "beta shapes must be positive");
  }
  const double total = s.alpha + s.beta;
  return {s.alpha / total, 1.0 / (1.0 + total)};
}

BetaMR fit_beta_mr_moments(std::span<const double> samples) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::DegenerateSamples, "need at least two samples");
  }
  double mean = 0.0;
  for (double x : samples) {
    if (!(x > 0.0 && x < 1.0)) {
      throw Error(ErrorCode::DegenerateSamples, "samples must lie strictly inside (0, 1)");
    }
    mean += x;
  }
  mean /= static_cast<double>(samples.size());
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(samples.size() - 1);
  if (!(var > 0.0)) throw Error(ErrorCode::DegenerateSamples, "samples have zero variance");
  if (!(mean > 0.0 && mean < 1.0)) throw Error(ErrorCode::DegenerateSamples, "mean outside (0, 1)");
  constexpr double eps = 1e-6;
  const double rho = std::clamp(var / (mean * (1.0 - mean)), eps, 1.0 - eps);
  return {mean, rho};
}

std::int64_t SurveyDataset::known_size(std::size_t k) const {
  if (k >= k_ || k == unknown_) {
    throw Error(ErrorCode::Precondition, "column " + std::to_string(k) + " is not a known group");
  }
  return known_sizes_[known_slot_[k]];
}

double SurveyDataset::known_prevalence(std::size_t k) const {
  return static_cast<double>(known_size(k)) / static_cast<double>(total_);
}

void SurveyDataset::compute_summaries() {
  row_max_.assign(n_, 0);
  col_max_.assign(k_, 0);
  col_sum_.assign(k_, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = 0; k < k_; ++k) {
      const auto y = y_[i * k_ + k];
      row_max_[i] = std::max(row_max_[i], y);
      col_max_[k] = std::max(col_max_[k], y);
      col_sum_[k] += y;
    }
  }
  known_slot_.assign(k_, 0);
  std::size_t slot = 0;
  for (std::size_t k = 0; k < k_; ++k) {
    if (k != unknown_) known_slot_[k] = slot++;
  }
}

SurveyDataset SurveyDataset::relabel_unknown(std::size_t new_unknown,
                                             std::optional<std::int64_t> previous_unknown_size) const {
  if (new_unknown >= k_) throw Error(ErrorCode::Precondition, "column index out of range");
  if (new_unknown == unknown_) throw Error(ErrorCode::Precondition, "column is already the unknown group");
  const bool keep_old = previous_unknown_size.has_value();
  RawSurvey raw;
  raw.rows.resize(n_);
  raw.total_population = total_;
  for (std::size_t k = 0; k < k_; ++k) {
    if (k == unknown_ && !keep_old) continue;
    for (std::size_t i = 0; i < n_; ++i) raw.rows[i].push_back(response(i, k));
    if (k == new_unknown) {
      raw.unknown_index = raw.labels.size();
    } else {
      raw.known_sizes.push_back(k == unknown_ ? *previous_unknown_size : known_size(k));
    }
    raw.labels.push_back(labels_[k]);
  }
  return validate_dataset(raw);
}

SurveyDataset validate_dataset(const RawSurvey& raw) {
  if (raw.rows.empty()) throw Error(ErrorCode::ShapeMismatch, "no respondent rows");
  const std::size_t k = raw.rows.front().size();
  if (k < 2) throw Error(ErrorCode::ShapeMismatch, "need at least two group columns, got " + std::to_string(k));
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    if (raw.rows[i].size() != k) {
      throw Error(ErrorCode::ShapeMismatch, "row " + std::to_string(i + 1) + " has " +
                                                std::to_string(raw.rows[i].size()) + " columns, expected " +
                                                std::to_string(k));
    }
  }
  if (!raw.labels.empty() && raw.labels.size() != k) {
    throw Error(ErrorCode::ShapeMismatch, "got " + std::to_string(raw.labels.size()) +
                                              " labels for " + std::to_string(k) + " columns");
  }
  const std::size_t unknown = raw.unknown_index.value_or(k - 1);
  if (unknown >= k) {
    throw Error(ErrorCode::ShapeMismatch, "unknown group index " + std::to_string(unknown) + " out of range");
  }
  if (raw.known_sizes.size() != k - 1) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(k - 1) + " known sizes, got " +
                                              std::to_string(raw.known_sizes.size()));
  }
  if (raw.total_population <= 0) {
    throw Error(ErrorCode::InvalidConfig, "total population must be positive");
  }

  std::vector<std::string> labels = raw.labels;
  if (labels.empty()) {
    for (std::size_t c = 0; c < k; ++c) labels.push_back("g" + std::to_string(c + 1));
  }

  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      if (raw.rows[i][c] < 0) {
        throw Error(ErrorCode::NegativeResponse, "row " + std::to_string(i + 1) + ", column '" +
                                                     labels[c] + "' has value " +
                                                     std::to_string(raw.rows[i][c]));
      }
    }
  }
  std::size_t slot = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (c == unknown) continue;
    const auto size = raw.known_sizes[slot++];
    if (size <= 0) {
      throw Error(ErrorCode::InvalidConfig, "known size of column '" + labels[c] + "' must be positive");
    }
    if (size >= raw.total_population) {
      throw Error(ErrorCode::KnownSizeExceedsTotal, "column '" + labels[c] + "' size " +
                                                        std::to_string(size) + " is not below N=" +
                                                        std::to_string(raw.total_population));
    }
  }

  SurveyDataset out;
  out.n_ = raw.rows.size();
  out.k_ = k;
  out.unknown_ = unknown;
  out.total_ = raw.total_population;
  out.labels_ = std::move(labels);
  out.known_sizes_ = raw.known_sizes;
  out.y_.reserve(out.n_ * k);
  for (const auto& r : raw.rows) out.y_.insert(out.y_.end(), r.begin(), r.end());
  out.compute_summaries();
  return out;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::RandomDegree: return "random_degree";
    case ModelKind::Barrier: return "barrier";
    case ModelKind::Transmission: return "transmission";
    case ModelKind::Combined: return "combined";
  }
  return "unknown";
}

std::string_view to_string(JacobianMode mode) {
  return mode == JacobianMode::Exact ? "exact" : "paper";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "degree" || text == "random_degree") return ModelKind::RandomDegree;
  if (text == "barrier") return ModelKind::Barrier;
  if (text == "transmission") return ModelKind::Transmission;
  if (text == "combined") return ModelKind::Combined;
  throw Error(ErrorCode::InvalidConfig, "unknown model kind '" + std::string(text) + "'");
}

JacobianMode parse_jacobian_mode(std::string_view text) {
  if (text == "exact") return JacobianMode::Exact;
  if (text == "paper") return JacobianMode::Paper;
  throw Error(ErrorCode::InvalidConfig, "unknown jacobian mode '" + std::string(text) + "'");
}

double Interval::clamp_inside(double x) const noexcept {
  const double margin = 1e-6 * (hi - lo);
  return std::clamp(x, lo + margin, hi - margin);
}

void ModelSpec::validate() const {
  if (!(mu_range.lo < mu_range.hi)) throw Error(ErrorCode::InvalidConfig, "mu_range is empty");
  if (!(sigma_range.lo < sigma_range.hi) || !(sigma_range.lo > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sigma_range must be a nonempty positive interval");
  }
  if (uses_transmission(kind) != transmission_prior.has_value()) {
    throw Error(ErrorCode::InvalidConfig,
                uses_transmission(kind) ? "transmission models need a transmission_prior"
                                        : "transmission_prior given for a model without transmission");
  }
  if (transmission_prior) beta_mr_to_shapes(*transmission_prior);
  if (fixed_rho && !(*fixed_rho > 0.0 && *fixed_rho < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "fixed_rho must lie in (0, 1)");
  }
  if (fixed_tau && !(*fixed_tau > 0.0 && *fixed_tau <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "fixed_tau must lie in (0, 1]");
  }
}

double unknown_size_persons(const ChainState& s, const ModelSpec& spec, const SurveyDataset& data) {
  if (uses_barrier(spec.kind)) return s.size_unknown * static_cast<double>(data.total_population());
  return s.size_unknown;
}

void check_state(const ChainState& s, const ModelSpec& spec, const SurveyDataset& data) {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::DomainError, what); };
  if (s.degrees.size() != data.respondents()) fail("degree vector has wrong length");
  for (std::size_t i = 0; i < s.degrees.size(); ++i) {
    if (!(s.degrees[i] > static_cast<double>(data.row_max(i)))) {
      fail("degree of respondent " + std::to_string(i + 1) + " not above its largest response");
    }
  }
  if (!spec.mu_range.contains(s.mu)) fail("mu outside its prior range");
  if (!spec.sigma_range.contains(s.sigma)) fail("sigma outside its prior range");
  const double total = static_cast<double>(data.total_population());
  if (uses_barrier(spec.kind)) {
    if (!(s.size_unknown > 0.0 && s.size_unknown < 1.0)) fail("m_K outside (0, 1)");
    if (s.rho.size() != data.groups()) fail("rho vector has wrong length");
    for (double r : s.rho) {
      if (!(r > 0.0 && r < 1.0)) fail("rho_k outside (0, 1)");
    }
  } else {
    if (!(s.size_unknown > static_cast<double>(data.column_max(data.unknown_index())) &&
          s.size_unknown <= total)) {
      fail("N_K outside (max response, N]");
    }
  }
  if (spec.kind == ModelKind::Combined) {
    if (s.q.size() != data.respondents() * data.groups()) fail("q matrix has wrong size");
    for (double q : s.q) {
      if (!(q > 0.0 && q < 1.0)) fail("q_ik outside (0, 1)");
    }
  }
  if (uses_transmission(spec.kind)) {
    if (!(s.tau > 0.0 && s.tau <= 1.0)) fail("tau_K outside (0, 1]");
  }
  if (spec.kind == ModelKind::Transmission) {
    const double rel = 1e-9;
    if (std::abs(s.w - s.size_unknown * s.tau) > rel * std::max(1.0, s.w) ||
        std::abs(s.z - s.size_unknown / s.tau) > rel * std::max(1.0, s.z)) {
      fail("w_K, z_K inconsistent with (N_K, tau_K)");
    }
  }
}

}  // namespace nsum
