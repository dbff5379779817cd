#pragma once

// Test-side reference implementations. Everything here is computed from
// Boost.Math distributions and quadrature, never from the library's own
// special functions, so agreement is evidence rather than tautology.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nsum/core.hpp"
#include "nsum/engine.hpp"

namespace oracle {

double lgamma(double x);
/// log Binomial(y | d, p) for integer d.
double binom_log_pmf(std::int64_t d, std::int64_t y, double p);
/// log C(d, y) for real d, from Boost lgamma.
double log_choose(double d, std::int64_t y);
double lognormal_log_pdf(double d, double mu, double sigma);
double beta_log_pdf(double x, double alpha, double beta);
double beta_log_pdf_mr(double x, double m, double rho);
/// log of integral_0^1 Binom(y | d, q) Beta(q | m, rho) dq by tanh-sinh quadrature.
double beta_binomial_log_pmf_quadrature(double d, std::int64_t y, double m, double rho);

/// |got - want| / max(|want|, 1).
double scaled_error(double got, double want);

/// Kolmogorov-Smirnov p-value (asymptotic, with the Stephens correction).
double ks_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf);

struct Check {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error <= tolerance; }
};

/// Toy survey: 4 respondents (one all-zero), 3 known groups, unknown last, N = 50 000.
nsum::SurveyDataset toy_dataset();
/// A valid state for `spec` on toy_dataset() with integer degrees.
nsum::ChainState toy_state(const nsum::ModelSpec& spec, const nsum::SurveyDataset& data);

/// Cross-checks of every log conditional against the independent
/// likelihood/prior construction (differences between two parameter values),
/// plus the single-respondent quadrature examples. Tolerance 1e-6.
std::vector<Check> conditional_formula_checks();

/// Sample moments of the Gibbs draws against their closed forms.
std::vector<Check> gibbs_checks();

/// Three respondents, three known groups, N = 20 000; used by the grid checks.
nsum::SurveyDataset grid_dataset();

/// Total-variation distance between MCMC draws and a grid posterior over
/// 200 equal-width bins. Tolerance 0.05.
Check random_degree_grid_check(std::uint64_t seed, const nsum::SurveyDataset& data);
Check barrier_grid_check(std::uint64_t seed);
/// Two checks: N_K marginal and tau_K marginal.
std::vector<Check> transmission_grid_checks(std::uint64_t seed);

/// Central finite-difference determinant of (w, z) -> (sqrt(w z), sqrt(w / z)).
double jacobian_fd(double w, double z);

/// Long single-chain run; returns the stored draws of `name`.
std::vector<double> long_run(const nsum::ModelSpec& spec, const nsum::SurveyDataset& data, std::size_t iterations,
                             std::size_t thin, std::uint64_t seed, const std::string& name);

}  // namespace oracle
