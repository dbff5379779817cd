#include "nsum/models.hpp"

#include <algorithm>
#include <cmath>

#include "nsum/error.hpp"
#include "nsum/postprocess.hpp"

namespace nsum {

namespace {

double total_of(const SurveyDataset& data) { return static_cast<double>(data.total_population()); }

// -log d - (log d - mu)^2 / (2 sigma^2): log-normal prior on a degree, up to constants.
double log_degree_prior(double degree, const ChainState& s) {
  const double ld = std::log(degree);
  const double z = ld - s.mu;
  return -ld - z * z / (2.0 * s.sigma * s.sigma);
}

bool degree_in_support(std::size_t i, double degree, const SurveyDataset& data) {
  return degree > static_cast<double>(data.row_max(i)) && std::isfinite(degree);
}

// Beta-binomial marginal of one response with q ~ Beta(m, rho), minus the
// binomial coefficient: log B(a + y, d + b - y) - log B(a, b).
double beta_binomial_ratio(double degree, std::int64_t y, double alpha, double beta) {
  const double yd = static_cast<double>(y);
  return log_beta(alpha + yd, degree + beta - yd) - log_beta(alpha, beta);
}

double sum_log_degrees(const ChainState& s) {
  double total = 0.0;
  for (double d : s.degrees) total += std::log(d);
  return total;
}

double sum_degrees(const ChainState& s) {
  double total = 0.0;
  for (double d : s.degrees) total += d;
  return total;
}

double transmission_log_prior_tau(double tau, const ModelSpec& spec) {
  const auto shapes = beta_mr_to_shapes(*spec.transmission_prior);
  return (shapes.alpha - 1.0) * std::log(tau) + (shapes.beta - 1.0) * std::log1p(-tau);
}

}  // namespace

double gibbs_mu(const ChainState& s, const SurveyDataset& data, const ModelSpec& spec,
                RandomStream& rng) {
  const auto n = static_cast<double>(data.respondents());
  const double mean = sum_log_degrees(s) / n;
  const double sd = s.sigma / std::sqrt(n);
  return sample_truncated_normal(mean, sd, spec.mu_range.lo, spec.mu_range.hi, rng);
}

double gibbs_sigma2(const ChainState& s, const SurveyDataset& data, const ModelSpec& spec,
                    RandomStream& rng) {
  const std::size_t n = data.respondents();
  if (n < 2) throw Error(ErrorCode::Precondition, "sigma^2 update needs at least two respondents");
  double ss = 0.0;
  for (double d : s.degrees) {
    const double z = std::log(d) - s.mu;
    ss += z * z;
  }
  if (!(ss > 0.0)) {
    throw Error(ErrorCode::DegenerateScale, "every log degree equals mu; sigma^2 conditional is improper");
  }
  const double shape = 0.5 * static_cast<double>(n - 1);
  const double lo = spec.sigma_range.lo * spec.sigma_range.lo;
  const double hi = spec.sigma_range.hi * spec.sigma_range.hi;
  return sample_truncated_inverse_gamma(shape, 0.5 * ss, lo, hi, rng);
}

double logpost_NK_random_degree(double size, const ChainState& s, const SurveyDataset& data) {
  const std::size_t unknown = data.unknown_index();
  const double total = total_of(data);
  if (!(size > static_cast<double>(data.column_max(unknown)) && size < total)) return kNegInf;
  const auto y_sum = static_cast<double>(data.column_sum(unknown));
  return y_sum * std::log(size / (total - size)) + sum_degrees(s) * std::log1p(-size / total) -
         std::log(size);
}

double logpost_di_random_degree(std::size_t i, double degree, const ChainState& s,
                                const SurveyDataset& data) {
  if (!degree_in_support(i, degree, data)) return kNegInf;
  const double total = total_of(data);
  double lp = log_degree_prior(degree, s);
  for (std::size_t k = 0; k < data.groups(); ++k) {
    const double p = data.is_known(k) ? data.known_prevalence(k) : s.size_unknown / total;
    lp += log_choose(degree, data.response(i, k)) + degree * std::log1p(-p);
  }
  return lp;
}

double barrier_mean(std::size_t k, const ChainState& s, const SurveyDataset& data) {
  return data.is_known(k) ? data.known_prevalence(k) : s.size_unknown;
}

double transmission_factor(std::size_t k, const ChainState& s, const SurveyDataset& data) {
  return data.is_known(k) ? 1.0 : s.tau;
}

double logpost_mK_barrier(double m, const ChainState& s, const SurveyDataset& data) {
  if (!(m > 0.0 && m < 1.0)) return kNegInf;
  const std::size_t k = data.unknown_index();
  const auto shapes = beta_mr_to_shapes({m, s.rho[k]});
  double lp = -std::log(m);
  for (std::size_t i = 0; i < data.respondents(); ++i) {
    lp += beta_binomial_ratio(s.degrees[i], data.response(i, k), shapes.alpha, shapes.beta);
  }
  return lp;
}

double logpost_rhok_barrier(std::size_t k, double rho, const ChainState& s, const SurveyDataset& data) {
  if (!(rho > 0.0 && rho < 1.0)) return kNegInf;
  const auto shapes = beta_mr_to_shapes({barrier_mean(k, s, data), rho});
  double lp = 0.0;
  for (std::size_t i = 0; i < data.respondents(); ++i) {
    lp += beta_binomial_ratio(s.degrees[i], data.response(i, k), shapes.alpha, shapes.beta);
  }
  return lp;
}

double logpost_di_barrier(std::size_t i, double degree, const ChainState& s, const SurveyDataset& data) {
  if (!degree_in_support(i, degree, data)) return kNegInf;
  double lp = log_degree_prior(degree, s);
  for (std::size_t k = 0; k < data.groups(); ++k) {
    const auto y = data.response(i, k);
    const auto shapes = beta_mr_to_shapes({barrier_mean(k, s, data), s.rho[k]});
    lp += log_choose(degree, y) + log_gamma(degree + shapes.beta - static_cast<double>(y)) -
          log_gamma(degree + shapes.alpha + shapes.beta);
  }
  return lp;
}

double log_jacobian_wz(double w, double z, JacobianMode mode) {
  if (mode == JacobianMode::Exact) return -std::log(2.0 * z);
  return std::log(std::abs((1.0 - w) / (4.0 * z * w)));
}

double logpost_wK_transmission(double w, const ChainState& s, const SurveyDataset& data,
                               const ModelSpec& spec) {
  const std::size_t unknown = data.unknown_index();
  const double total = total_of(data);
  const double z = s.z;
  if (!(w > static_cast<double>(data.column_max(unknown)) && w < total && w < z)) return kNegInf;
  if (!(std::sqrt(w * z) < total)) return kNegInf;
  const auto shapes = beta_mr_to_shapes(*spec.transmission_prior);
  const auto y_sum = static_cast<double>(data.column_sum(unknown));
  return y_sum * std::log(w / (total - w)) + sum_degrees(s) * std::log1p(-w / total) +
         0.5 * (shapes.alpha - 2.0) * std::log(w) +
         (shapes.beta - 1.0) * std::log1p(-std::sqrt(w / z)) + log_jacobian_wz(w, z, spec.jacobian_mode);
}

double logpost_zK_transmission(double z, const ChainState& s, const SurveyDataset& data,
                               const ModelSpec& spec) {
  const double w = s.w;
  if (!(z > w) || !(std::sqrt(w * z) < total_of(data))) return kNegInf;
  const auto shapes = beta_mr_to_shapes(*spec.transmission_prior);
  return -0.5 * shapes.alpha * std::log(z) + (shapes.beta - 1.0) * std::log1p(-std::sqrt(w / z)) +
         log_jacobian_wz(w, z, spec.jacobian_mode);
}

double logpost_di_transmission(std::size_t i, double degree, const ChainState& s,
                               const SurveyDataset& data) {
  if (!degree_in_support(i, degree, data)) return kNegInf;
  const double total = total_of(data);
  double lp = log_degree_prior(degree, s);
  for (std::size_t k = 0; k < data.groups(); ++k) {
    const double w = data.is_known(k) ? static_cast<double>(data.known_size(k)) : s.w;
    lp += log_choose(degree, data.response(i, k)) + degree * std::log1p(-w / total);
  }
  return lp;
}

double logpost_combined(const CombinedTarget& target, double value, const ChainState& s,
                        const SurveyDataset& data, const ModelSpec& spec) {
  const std::size_t n = data.respondents();
  const std::size_t groups = data.groups();
  const std::size_t unknown = data.unknown_index();

  // sum_i log Beta(q_ik | m, rho) for group k.
  const auto q_column_log_density = [&](std::size_t k, double m, double rho) {
    const auto shapes = beta_mr_to_shapes({m, rho});
    const double norm = log_beta(shapes.alpha, shapes.beta);
    double lp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = s.q_at(i, k, groups);
      lp += (shapes.alpha - 1.0) * std::log(q) + (shapes.beta - 1.0) * std::log1p(-q) - norm;
    }
    return lp;
  };

  switch (target.param) {
    case CombinedParam::MK: {
      if (!(value > 0.0 && value < 1.0)) return kNegInf;
      return q_column_log_density(unknown, value, s.rho[unknown]) - std::log(value);
    }
    case CombinedParam::RhoK: {
      if (!(value > 0.0 && value < 1.0)) return kNegInf;
      return q_column_log_density(target.k, barrier_mean(target.k, s, data), value);
    }
    case CombinedParam::Qik: {
      if (!(value > 0.0 && value < 1.0)) return kNegInf;
      const std::size_t i = target.i;
      const std::size_t k = target.k;
      const auto shapes = beta_mr_to_shapes({barrier_mean(k, s, data), s.rho[k]});
      const auto y = static_cast<double>(data.response(i, k));
      const double tau = transmission_factor(k, s, data);
      return (y + shapes.alpha - 1.0) * std::log(value) +
             (s.degrees[i] - y) * std::log1p(-tau * value) + (shapes.beta - 1.0) * std::log1p(-value);
    }
    case CombinedParam::TauK: {
      if (!(value > 0.0 && value < 1.0)) return kNegInf;
      double lp = transmission_log_prior_tau(value, spec);
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<double>(data.response(i, unknown));
        lp += y * std::log(value) + (s.degrees[i] - y) * std::log1p(-value * s.q_at(i, unknown, groups));
      }
      return lp;
    }
    case CombinedParam::Di: {
      const std::size_t i = target.i;
      if (!degree_in_support(i, value, data)) return kNegInf;
      double lp = log_degree_prior(value, s);
      for (std::size_t k = 0; k < groups; ++k) {
        lp += log_choose(value, data.response(i, k)) +
              value * std::log1p(-transmission_factor(k, s, data) * s.q_at(i, k, groups));
      }
      return lp;
    }
  }
  return kNegInf;
}

ChainState initial_state(const ModelSpec& spec, const SurveyDataset& data,
                         std::vector<std::string>* warnings) {
  spec.validate();
  const std::size_t n = data.respondents();
  const std::size_t groups = data.groups();
  const std::size_t unknown = data.unknown_index();
  const double total = total_of(data);

  ChainState s;
  const auto scaleup = scaleup_degrees(data);
  s.degrees.resize(n);
  bool any_known_response = false;
  for (std::size_t i = 0; i < n; ++i) {
    s.degrees[i] = std::max(scaleup[i], static_cast<double>(data.row_max(i)) + 1.0);
    if (scaleup[i] > 0.0) any_known_response = true;
    if (warnings && data.row_max(i) == 0) {
      warnings->push_back("AllZeroResponses: respondent " + std::to_string(i + 1) +
                          " reported zero for every group; degree starts at 1");
    }
  }

  if (any_known_response) {
    double mean = 0.0;
    for (double d : s.degrees) mean += std::log(d);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double d : s.degrees) ss += (std::log(d) - mean) * (std::log(d) - mean);
    s.mu = spec.mu_range.clamp_inside(mean);
    s.sigma = n > 1 && ss > 0.0 ? spec.sigma_range.clamp_inside(std::sqrt(ss / static_cast<double>(n - 1)))
                                : spec.sigma_range.mid();
  } else {
    s.mu = spec.mu_range.mid();
    s.sigma = spec.sigma_range.mid();
  }

  // Scale-up size of the unknown group, kept strictly inside its support.
  const double floor_size = static_cast<double>(data.column_max(unknown)) + 1.0;
  double size = floor_size;
  double degree_sum = 0.0;
  for (double d : scaleup) degree_sum += d;
  if (degree_sum > 0.0) size = std::max(floor_size, scaleup_size(data, scaleup));
  size = std::min(size, 0.99 * total);

  if (uses_transmission(spec.kind)) {
    s.tau = spec.fixed_tau.value_or(spec.transmission_prior->m);
    // The observed column is thinned by tau, so the scale-up figure estimates w.
    const double w = std::min(size, 0.99 * total * s.tau);
    s.size_unknown = w / s.tau;
    s.w = w;
    s.z = s.size_unknown / s.tau;
  } else {
    s.size_unknown = size;
  }

  if (uses_barrier(spec.kind)) {
    s.size_unknown /= total;
    s.rho.assign(groups, spec.fixed_rho.value_or(0.1));
  }
  if (spec.kind == ModelKind::Combined) {
    s.q.resize(n * groups);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < groups; ++k) s.q_at(i, k, groups) = barrier_mean(k, s, data);
    }
  }
  check_state(s, spec, data);
  return s;
}

}  // namespace nsum
