#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nsum/core.hpp"
#include "nsum/error.hpp"
#include "nsum/fit.hpp"
#include "nsum/numerics.hpp"
#include "nsum/postprocess.hpp"
#include "nsum/study.hpp"

namespace py = pybind11;

namespace {

nsum::SurveyDataset make_dataset(const std::vector<std::vector<std::int64_t>>& responses,
                                 const std::vector<std::int64_t>& known_sizes, std::int64_t total_population,
                                 std::optional<std::size_t> unknown_index, const std::vector<std::string>& labels) {
  nsum::RawSurvey raw;
  raw.rows = responses;
  raw.known_sizes = known_sizes;
  raw.total_population = total_population;
  raw.unknown_index = unknown_index;
  raw.labels = labels;
  return nsum::validate_dataset(raw);
}

py::dict summary_dict(const nsum::PosteriorSummary& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["median"] = s.median;
  d["sd"] = s.sd;
  d["ci80"] = py::make_tuple(s.ci80.lo, s.ci80.hi);
  d["ci95"] = py::make_tuple(s.ci95.lo, s.ci95.hi);
  return d;
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

}  // namespace

PYBIND11_MODULE(_nsum, m) {
  m.doc() = "Network scale-up estimators and Bayesian models";

  py::register_exception<nsum::Error>(m, "NsumError", PyExc_ValueError);

  m.def("log_gamma", &nsum::log_gamma, py::arg("x"));
  m.def("log_beta", &nsum::log_beta, py::arg("a"), py::arg("b"));
  m.def("log_choose", &nsum::log_choose, py::arg("d"), py::arg("y"));
  m.def("reflect_into", &nsum::reflect_into, py::arg("x"), py::arg("lo"), py::arg("hi"));

  m.def(
      "beta_mr_to_shapes",
      [](double mean, double rho) {
        const auto s = nsum::beta_mr_to_shapes({mean, rho});
        return py::make_tuple(s.alpha, s.beta);
      },
      py::arg("m"), py::arg("rho"));

  m.def(
      "scaleup",
      [](const std::vector<std::vector<std::int64_t>>& responses, const std::vector<std::int64_t>& known_sizes,
         std::int64_t total_population, std::optional<std::size_t> unknown_index) {
        const auto data = make_dataset(responses, known_sizes, total_population, unknown_index, {});
        const auto degrees = nsum::scaleup_degrees(data);
        return py::make_tuple(to_array(degrees), nsum::scaleup_size(data, degrees));
      },
      py::arg("responses"), py::arg("known_sizes"), py::arg("total_population"), py::arg("unknown_index") = py::none(),
      "Scale-up degrees and unknown-group size.");

  m.def(
      "fit",
      [](const std::vector<std::vector<std::int64_t>>& responses, const std::vector<std::int64_t>& known_sizes,
         std::int64_t total_population, const std::string& model, std::optional<std::size_t> unknown_index,
         std::optional<std::pair<double, double>> transmission_prior, std::size_t iterations, std::size_t chains,
         std::uint64_t seed, const std::string& jacobian) {
        const auto data = make_dataset(responses, known_sizes, total_population, unknown_index, {});
        nsum::ModelSpec spec;
        spec.kind = nsum::parse_model_kind(model);
        spec.jacobian_mode = nsum::parse_jacobian_mode(jacobian);
        if (transmission_prior) spec.transmission_prior = nsum::BetaMR{transmission_prior->first, transmission_prior->second};
        auto config = nsum::ChainConfig::defaults_for(spec.kind).with_iterations(iterations);
        config.n_chains = chains;
        config.seed = seed;
        nsum::FitResult fit;
        {
          py::gil_scoped_release release;
          fit = nsum::fit_model(spec, data, config);
        }
        py::dict draws;
        for (const auto& name : fit.names()) draws[py::str(name)] = to_array(fit.pooled(name));
        py::dict psrf;
        for (const auto& name : fit.names()) {
          const auto r = fit.psrf(name);
          psrf[py::str(name)] = r ? py::cast(*r) : py::none();
        }
        py::dict out;
        out["draws"] = draws;
        out["size"] = summary_dict(fit.size_summary());
        out["psrf"] = psrf;
        out["warnings"] = fit.warnings;
        return out;
      },
      py::arg("responses"), py::arg("known_sizes"), py::arg("total_population"), py::arg("model") = "degree",
      py::arg("unknown_index") = py::none(), py::arg("transmission_prior") = py::none(),
      py::arg("iterations") = 30000, py::arg("chains") = 2, py::arg("seed") = 1, py::arg("jacobian") = "exact",
      "Fit one model; returns pooled draws, the size summary and PSRF values.");

  m.def(
      "summarize",
      [](const std::vector<double>& draws) { return summary_dict(nsum::summarize(draws)); }, py::arg("draws"));
  m.def("gelman_rubin", &nsum::gelman_rubin, py::arg("chains"));
  m.def(
      "effective_sample_size", [](const std::vector<double>& d) { return nsum::effective_sample_size(d); },
      py::arg("draws"));

  m.def(
      "fit_recall_calibration",
      [](const std::vector<double>& estimates, const std::vector<double>& log_sds, const std::vector<double>& true_sizes) {
        if (estimates.size() != log_sds.size() || estimates.size() != true_sizes.size()) {
          throw nsum::Error(nsum::ErrorCode::ShapeMismatch, "inputs must have equal length");
        }
        std::vector<nsum::BackEstimatePoint> points;
        for (std::size_t k = 0; k < estimates.size(); ++k) points.push_back({estimates[k], log_sds[k], true_sizes[k]});
        const auto c = nsum::fit_recall_calibration(points);
        return py::dict(py::arg("a") = c.a, py::arg("b") = c.b, py::arg("sigma_eps") = c.sigma_eps,
                        py::arg("log_likelihood") = c.log_likelihood);
      },
      py::arg("estimates"), py::arg("log_sds"), py::arg("true_sizes"));

  m.def(
      "recall_adjust_draws",
      [](const std::vector<double>& log_draws, double a, double b, double sigma_eps, std::uint64_t seed) {
        nsum::RandomStream rng(seed, 0);
        return to_array(nsum::recall_adjust_draws(log_draws, {a, b, sigma_eps, 0.0}, rng));
      },
      py::arg("log_draws"), py::arg("a"), py::arg("b"), py::arg("sigma_eps"), py::arg("seed") = 1);

  m.def(
      "prior_quantiles",
      [](double mean, double rho) {
        std::vector<double> dummy(100, mean);
        const auto r = nsum::prior_posterior_report(dummy, {mean, rho});
        return py::make_tuple(r.prior.q025, r.prior.q50, r.prior.q975);
      },
      py::arg("m"), py::arg("rho"), "2.5%, 50% and 97.5% quantiles of Beta(m, rho).");

  m.def(
      "simulate",
      [](const std::string& regime, std::size_t n_respondents, std::uint64_t seed) {
        auto r = nsum::SimRegime::defaults(nsum::parse_regime_kind(regime));
        r.n_respondents = n_respondents;
        nsum::RandomStream rng(seed, 0);
        const auto sim = nsum::simulate_dataset(r, rng);
        std::vector<std::vector<std::int64_t>> rows;
        for (std::size_t i = 0; i < sim.data.respondents(); ++i) {
          const auto row = sim.data.row(i);
          rows.emplace_back(row.begin(), row.end());
        }
        py::dict out;
        out["responses"] = rows;
        out["known_sizes"] = sim.data.known_sizes();
        out["total_population"] = sim.data.total_population();
        out["unknown_size"] = sim.truth.unknown_size;
        out["tau"] = sim.truth.tau;
        return out;
      },
      py::arg("regime") = "no_bias", py::arg("n_respondents") = 500, py::arg("seed") = 1,
      "Simulate one dataset from a built-in regime.");
}
