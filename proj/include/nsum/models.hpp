#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "nsum/core.hpp"
#include "nsum/engine.hpp"
#include "nsum/numerics.hpp"

namespace nsum {

// Closed-form Gibbs steps shared by all four models (uniform priors on mu
// and sigma).

/// Normal(mean log d, sigma^2 / n) truncated to mu_range.
double gibbs_mu(const ChainState& s, const SurveyDataset& data, const ModelSpec& spec,
                RandomStream& rng);
/// InverseGamma((n - 1)/2, sum (log d - mu)^2 / 2) truncated so sigma stays in
/// sigma_range. Returns sigma^2.
double gibbs_sigma2(const ChainState& s, const SurveyDataset& data, const ModelSpec& spec,
                    RandomStream& rng);

// Log conditional posteriors, up to additive constants. Each returns -inf
// outside the parameter's support.

// random degree
double logpost_NK_random_degree(double size, const ChainState& s, const SurveyDataset& data);
double logpost_di_random_degree(std::size_t i, double degree, const ChainState& s,
                                const SurveyDataset& data);

// barrier effects (q integrated out: beta-binomial)
double logpost_mK_barrier(double m, const ChainState& s, const SurveyDataset& data);
double logpost_rhok_barrier(std::size_t k, double rho, const ChainState& s, const SurveyDataset& data);
double logpost_di_barrier(std::size_t i, double degree, const ChainState& s, const SurveyDataset& data);

// transmission bias, sampled as w = N_K tau_K and z = N_K / tau_K
/// log |d(N, tau) / d(w, z)|.
double log_jacobian_wz(double w, double z, JacobianMode mode);
double logpost_wK_transmission(double w, const ChainState& s, const SurveyDataset& data,
                               const ModelSpec& spec);
double logpost_zK_transmission(double z, const ChainState& s, const SurveyDataset& data,
                               const ModelSpec& spec);
double logpost_di_transmission(std::size_t i, double degree, const ChainState& s,
                               const SurveyDataset& data);

// combined barrier + transmission, with q_ik sampled explicitly
enum class CombinedParam { MK, RhoK, Qik, TauK, Di };

struct CombinedTarget {
  CombinedParam param;
  std::size_t i = 0;  // respondent, for Qik and Di
  std::size_t k = 0;  // group, for RhoK and Qik
};

double logpost_combined(const CombinedTarget& target, double value, const ChainState& s,
                        const SurveyDataset& data, const ModelSpec& spec);

/// Prior mean m_k of q_ik: N_k / N for known groups, the state's m_K for the unknown one.
double barrier_mean(std::size_t k, const ChainState& s, const SurveyDataset& data);
/// tau_k: 1 for known groups, tau_K for the unknown one.
double transmission_factor(std::size_t k, const ChainState& s, const SurveyDataset& data);

/// Scale-up starting point. Degrees come from the scale-up degree estimator,
/// floored at (largest response in the row) + 1; the unknown size from the
/// scale-up size estimator. Rows with every response zero are kept and
/// reported through `warnings`.
ChainState initial_state(const ModelSpec& spec, const SurveyDataset& data,
                         std::vector<std::string>* warnings = nullptr);

std::unique_ptr<ModelSampler> make_sampler(const ModelSpec& spec, const SurveyDataset& data);

}  // namespace nsum
