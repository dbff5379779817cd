#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nsum {

/// Beta distribution in mean/dispersion form: m = a/(a+b), rho = 1/(1+a+b).
struct BetaMR {
  double m = 0.5;
  double rho = 0.5;
};

struct BetaShapes {
  double alpha = 1.0;
  double beta = 1.0;
};

BetaShapes beta_mr_to_shapes(const BetaMR& p);
BetaMR beta_shapes_to_mr(const BetaShapes& s);

/// Method-of-moments fit using Var = m (1 - m) rho. rho is clamped to
/// [1e-6, 1 - 1e-6].
BetaMR fit_beta_mr_moments(std::span<const double> samples);

/// Input as read from disk, before validation.
struct RawSurvey {
  std::vector<std::vector<std::int64_t>> rows;
  std::vector<std::int64_t> known_sizes;  // column order, unknown column skipped
  std::int64_t total_population = 0;
  std::vector<std::string> labels;        // empty: g1..gK
  std::optional<std::size_t> unknown_index;  // empty: last column
};

/// Aggregated relational data: counts y_ik of people respondent i knows in group k.
class SurveyDataset {
 public:
  std::size_t respondents() const noexcept { return n_; }
  std::size_t groups() const noexcept { return k_; }
  std::size_t unknown_index() const noexcept { return unknown_; }
  std::int64_t total_population() const noexcept { return total_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::int64_t>& known_sizes() const noexcept { return known_sizes_; }

  std::int64_t response(std::size_t i, std::size_t k) const { return y_[i * k_ + k]; }
  std::span<const std::int64_t> row(std::size_t i) const { return {y_.data() + i * k_, k_}; }

  bool is_known(std::size_t k) const noexcept { return k != unknown_; }
  /// Size of known column k (k != unknown_index()).
  std::int64_t known_size(std::size_t k) const;
  /// N_k / N for known column k.
  double known_prevalence(std::size_t k) const;

  std::int64_t row_max(std::size_t i) const { return row_max_[i]; }
  std::int64_t column_max(std::size_t k) const { return col_max_[k]; }
  std::int64_t column_sum(std::size_t k) const { return col_sum_[k]; }

  /// Same responses with column `new_unknown` treated as unknown. The column
  /// that was unknown becomes known with size `previous_unknown_size`, or is
  /// dropped when no size is given.
  SurveyDataset relabel_unknown(std::size_t new_unknown,
                                std::optional<std::int64_t> previous_unknown_size = std::nullopt) const;

 private:
  friend SurveyDataset validate_dataset(const RawSurvey& raw);

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::size_t unknown_ = 0;
  std::int64_t total_ = 0;
  std::vector<std::int64_t> y_;
  std::vector<std::int64_t> known_sizes_;
  std::vector<std::string> labels_;
  std::vector<std::int64_t> row_max_;
  std::vector<std::int64_t> col_max_;
  std::vector<std::int64_t> col_sum_;
  std::vector<std::size_t> known_slot_;  // column -> index into known_sizes_

  void compute_summaries();
};

SurveyDataset validate_dataset(const RawSurvey& raw);

enum class ModelKind { RandomDegree, Barrier, Transmission, Combined };
enum class JacobianMode { Exact, Paper };

std::string_view to_string(ModelKind kind);
std::string_view to_string(JacobianMode mode);
/// Accepts the CLI spellings as well (degree, random_degree, ...).
ModelKind parse_model_kind(std::string_view text);
JacobianMode parse_jacobian_mode(std::string_view text);

inline bool uses_transmission(ModelKind k) {
  return k == ModelKind::Transmission || k == ModelKind::Combined;
}
inline bool uses_barrier(ModelKind k) {
  return k == ModelKind::Barrier || k == ModelKind::Combined;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double x) const noexcept { return x > lo && x < hi; }
  double clamp_inside(double x) const noexcept;
  double mid() const noexcept { return 0.5 * (lo + hi); }
};

struct ModelSpec {
  ModelKind kind = ModelKind::RandomDegree;
  Interval mu_range{3.0, 8.0};
  Interval sigma_range{0.25, 2.0};
  std::optional<BetaMR> transmission_prior;
  JacobianMode jacobian_mode = JacobianMode::Exact;
  /// Pin every rho_k (barrier/combined) instead of sampling it.
  std::optional<double> fixed_rho;
  /// Pin tau_K (transmission/combined) instead of sampling it.
  std::optional<double> fixed_tau;

  void validate() const;
};

/// Current values of every model parameter. Fields unused by a model keep
/// their defaults.
struct ChainState {
  std::vector<double> degrees;
  double mu = 5.5;
  double sigma = 1.0;
  /// N_K for random_degree/transmission, m_K for barrier/combined.
  double size_unknown = 0.0;
  std::vector<double> rho;
  std::vector<double> q;  // n x K, row-major
  double tau = 1.0;
  double w = 0.0;
  double z = 0.0;

  double& q_at(std::size_t i, std::size_t k, std::size_t groups) { return q[i * groups + k]; }
  double q_at(std::size_t i, std::size_t k, std::size_t groups) const { return q[i * groups + k]; }
};

/// Size of the unknown group in persons for any model's state.
double unknown_size_persons(const ChainState& s, const ModelSpec& spec, const SurveyDataset& data);

/// Throws DomainError naming the first violated invariant.
void check_state(const ChainState& s, const ModelSpec& spec, const SurveyDataset& data);

}  // namespace nsum
