#include "nsum/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "nsum/error.hpp"
#include "nsum/fit.hpp"
#include "nsum/io.hpp"
#include "nsum/postprocess.hpp"
#include "nsum/study.hpp"

namespace nsum {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr std::uint64_t kFitSalt = 0x434c4946;
constexpr std::uint64_t kRecallSalt = 0x52454341;

// Removes the lock file when the command finishes.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".nsum.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, dir.string() + ": cannot create output directory: " + ec.message());
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (!f) throw Error(ErrorCode::Io, dir.string() + ": output directory is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

struct ChainFlags {
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 0;
  std::size_t pilot = 0;
  std::size_t chains = 0;
  std::uint64_t seed = 0;
  CLI::Option* iterations_opt = nullptr;
  CLI::Option* burn_in_opt = nullptr;
  CLI::Option* thin_opt = nullptr;
  CLI::Option* pilot_opt = nullptr;
  CLI::Option* chains_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void add_to(CLI::App& app) {
    iterations_opt = app.add_option("--iterations", iterations, "MCMC iterations per chain");
    burn_in_opt = app.add_option("--burn-in", burn_in, "iterations discarded per chain (default 10%)");
    thin_opt = app.add_option("--thin", thin, "keep every n-th draw");
    pilot_opt = app.add_option("--pilot-iterations", pilot, "pilot-chain length for proposal tuning");
    chains_opt = app.add_option("--chains", chains, "number of chains");
    seed_opt = app.add_option("--seed", seed, "random seed");
  }

  ChainOverrides overrides() const {
    ChainOverrides c;
    if (iterations_opt->count()) c.iterations = iterations;
    if (burn_in_opt->count()) c.burn_in = burn_in;
    if (thin_opt->count()) c.thin = thin;
    if (pilot_opt->count()) c.pilot_iterations = pilot;
    if (chains_opt->count()) c.chains = chains;
    if (seed_opt->count()) c.seed = seed;
    return c;
  }
};

void append_chain_args(std::vector<std::string>& argv, const ChainConfig& c) {
  argv.insert(argv.end(), {"--iterations", std::to_string(c.n_iterations), "--burn-in", std::to_string(c.burn_in),
                           "--thin", std::to_string(c.thin), "--pilot-iterations", std::to_string(c.pilot_iterations),
                           "--chains", std::to_string(c.n_chains), "--seed", std::to_string(c.seed)});
}

ojson chain_json(const ChainConfig& c) {
  ojson j;
  j["iterations"] = c.n_iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["pilot_iterations"] = c.pilot_iterations;
  j["chains"] = c.n_chains;
  j["seed"] = c.seed;
  return j;
}

ojson spec_json(const ModelSpec& s) {
  ojson j;
  j["kind"] = std::string(to_string(s.kind));
  j["mu_range"] = {s.mu_range.lo, s.mu_range.hi};
  j["sigma_range"] = {s.sigma_range.lo, s.sigma_range.hi};
  if (s.transmission_prior) j["transmission_prior"] = {{"m", s.transmission_prior->m}, {"rho", s.transmission_prior->rho}};
  j["jacobian"] = std::string(to_string(s.jacobian_mode));
  return j;
}

ojson interval_json(const CredibleInterval& c) { return ojson::array({c.lo, c.hi}); }

ojson summary_json(const PosteriorSummary& s) {
  ojson j;
  j["mean"] = s.mean;
  j["median"] = s.median;
  j["sd"] = s.sd;
  j["ci80"] = interval_json(s.ci80);
  j["ci95"] = interval_json(s.ci95);
  return j;
}

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

void write_manifest(const fs::path& out_dir, const std::vector<std::string>& argv, const ojson& inputs,
                    const ojson& resolved, std::uint64_t seed, double seconds) {
  ojson m;
  m["schema_version"] = 1;
  m["command"] = argv.front();
  m["argv"] = argv;
  m["inputs"] = inputs;
  m["resolved_config"] = resolved;
  m["seed"] = seed;
  m["version"] = NSUM_VERSION;
  m["wall_clock_seconds"] = seconds;
  write_text_file(out_dir / "manifest.json", m.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_known_prevalence(const SurveyDataset& data) {
  double best = 0.0;
  for (std::size_t k = 0; k < data.groups(); ++k) {
    if (data.is_known(k)) best = std::max(best, data.known_prevalence(k));
  }
  return best;
}

// fit

struct FitArgs {
  std::string data;
  std::string config;
  std::string model;
  std::string out;
  std::string calibration;
  std::string jacobian;
  ChainFlags chain;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const auto table = read_responses_csv(a.data);
  const auto config = load_run_config(a.config);
  const auto data = build_dataset(table, config);
  std::optional<ModelKind> kind;
  if (!a.model.empty()) kind = parse_model_kind(a.model);
  std::optional<JacobianMode> jacobian;
  if (!a.jacobian.empty()) jacobian = parse_jacobian_mode(a.jacobian);
  const auto spec = build_model_spec(config, kind, jacobian);
  const auto chain = config.chain.merged_with(a.chain.overrides()).resolve(spec.kind);
  if (chain.stored_draws() * chain.n_chains < 100) {
    throw Error(ErrorCode::InvalidConfig, "fewer than 100 stored draws; raise --iterations or lower --burn-in/--thin");
  }
  std::optional<CalibrationFile> calibration;
  if (!a.calibration.empty()) calibration = load_calibration(a.calibration);

  const fs::path out_dir(a.out);
  OutputLock lock(out_dir);
  const auto fit = fit_model(spec, data, chain, kFitSalt);
  const double total = static_cast<double>(data.total_population());

  ojson summary;
  summary["schema_version"] = 1;
  summary["model"] = spec_json(spec);
  summary["chain"] = chain_json(chain);
  summary["total_population"] = data.total_population();
  summary["unknown_group"] = data.labels()[data.unknown_index()];
  summary["respondents"] = data.respondents();
  summary["scaleup_estimate"] = scaleup_size(data);
  const auto size_draws = fit.pooled("N_K");
  summary["size"] = summary_json(summarize(size_draws));
  summary["prevalence"] = summary_json(summarize(size_draws, SummaryScale::Prevalence, total));

  ojson params = ojson::object();
  ojson psrf = ojson::object();
  for (const auto& name : fit.names()) {
    ojson p = summary_json(summarize(fit.pooled(name)));
    const auto r = fit.psrf(name);
    p["psrf"] = optional_number(r);
    double ess = 0.0;
    for (const auto& c : fit.chains) ess += effective_sample_size(c.trace(name));
    p["ess"] = ess;
    params[name] = p;
    psrf[name] = optional_number(r);
  }
  summary["parameters"] = params;
  summary["psrf"] = psrf;
  ojson acceptance = ojson::array();
  for (std::size_t c = 0; c < fit.chains.size(); ++c) {
    for (const auto& t : fit.chains[c].acceptance) {
      acceptance.push_back({{"chain", c + 1}, {"block", t.name}, {"proposed", t.proposed}, {"rate", t.rate()}});
    }
  }
  summary["acceptance"] = acceptance;
  std::vector<std::string> warnings = fit.warnings;

  std::string adjusted_csv;
  if (calibration) {
    const auto& cal = calibration->calibration;
    std::vector<double> logs;
    for (double v : size_draws) logs.push_back(std::log(v));
    RandomStream rng(chain.seed, derive_stream_id(kRecallSalt, 0));
    auto adjusted = recall_adjust_draws(logs, cal, rng);
    for (auto& v : adjusted) v = std::exp(v);
    const double limit = calibration->max_known_prevalence.value_or(max_known_prevalence(data));
    const double prevalence = summarize(size_draws).mean / total;
    if (prevalence > limit) {
      const std::string w = "RecallExtrapolation: unadjusted prevalence " + format_double(prevalence) +
                            " exceeds the largest calibration group prevalence " + format_double(limit) +
                            "; the recall adjustment is an extrapolation";
      err << "WARNING: " << w << "\n";
      warnings.push_back(w);
    }
    ojson r;
    r["calibration"] = {{"a", cal.a}, {"b", cal.b}, {"sigma_eps", cal.sigma_eps}};
    r["size"] = summary_json(summarize(adjusted));
    r["prevalence"] = summary_json(summarize(adjusted, SummaryScale::Prevalence, total));
    summary["recall_adjusted"] = r;
    adjusted_csv = "draw,N_K_adjusted\n";
    for (std::size_t t = 0; t < adjusted.size(); ++t) {
      adjusted_csv += std::to_string(t + 1) + "," + format_double(adjusted[t]) + "\n";
    }
  }
  summary["warnings"] = warnings;

  write_text_file(out_dir / "draws.csv", draws_csv(fit));
  write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
  if (calibration) write_text_file(out_dir / "draws_recall_adjusted.csv", adjusted_csv);

  std::vector<std::string> argv{"fit", "--data", absolute(a.data), "--config", absolute(a.config), "--model",
                                std::string(to_string(spec.kind)), "--jacobian", std::string(to_string(spec.jacobian_mode))};
  append_chain_args(argv, chain);
  if (calibration) argv.insert(argv.end(), {"--recall-calibration", absolute(a.calibration)});
  argv.insert(argv.end(), {"--out", absolute(a.out)});
  ojson inputs{{"data", absolute(a.data)}, {"config", absolute(a.config)}};
  if (calibration) inputs["recall_calibration"] = absolute(a.calibration);
  write_manifest(out_dir, argv, inputs, {{"model", spec_json(spec)}, {"chain", chain_json(chain)}}, chain.seed,
                 seconds_since(start));

  for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
  const auto s = summarize(size_draws);
  out << "N_K posterior mean " << format_double(s.mean) << ", 95% interval [" << format_double(s.ci95.lo) << ", "
      << format_double(s.ci95.hi) << "]; outputs in " << a.out << "\n";
  return kExitOk;
}

// simulate

struct SimulateArgs {
  std::string regime;
  std::vector<std::string> models;
  std::size_t n_datasets = 0;
  CLI::Option* n_datasets_opt = nullptr;
  std::size_t workers = 0;
  std::size_t bootstrap = 1000;
  std::string out;
  ChainFlags chain;
};

StudyModel study_model(const std::string& name, const SimRegime& regime) {
  if (name == "scaleup") return {name, std::nullopt};
  ModelSpec spec;
  spec.kind = parse_model_kind(name);
  if (uses_transmission(spec.kind)) {
    if (!regime.tau_prior) {
      throw Error(ErrorCode::InvalidConfig, "model '" + name + "' needs tau_prior in the regime config");
    }
    spec.transmission_prior = regime.tau_prior;
  }
  return {std::string(to_string(spec.kind)), spec};
}

ojson record_json(const DatasetRecord& r) {
  ojson j;
  j["dataset"] = r.index;
  j["truth"] = r.truth;
  j["ok"] = r.ok;
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["estimate"] = r.estimate;
  j["ci80"] = interval_json(r.ci80);
  j["ci95"] = interval_json(r.ci95);
  j["psrf"] = optional_number(r.psrf);
  if (!r.tau_quantiles.empty()) j["tau_quantiles"] = r.tau_quantiles;
  return j;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  auto regime = load_regime(a.regime);
  if (a.n_datasets_opt->count()) {
    if (a.n_datasets == 0) throw Error(ErrorCode::InvalidConfig, "--n-datasets must be positive");
    regime.n_datasets = a.n_datasets;
  }
  regime.validate();
  if (a.models.empty()) throw Error(ErrorCode::InvalidConfig, "--models needs at least one model");
  std::vector<StudyModel> models;
  for (const auto& name : a.models) {
    auto m = study_model(name, regime);
    for (const auto& seen : models) {
      if (seen.name == m.name) throw Error(ErrorCode::InvalidConfig, "model '" + m.name + "' listed twice");
    }
    models.push_back(std::move(m));
  }
  const auto overrides = a.chain.overrides();

  const fs::path out_dir(a.out);
  OutputLock lock(out_dir);
  StudyOptions options;
  options.workers = a.workers;
  options.bootstrap_resamples = a.bootstrap;

  std::string table = "model,datasets,failures,mae,mae_se,coverage80,coverage95\n";
  std::size_t failures = 0;
  ojson resolved_chains = ojson::object();
  std::uint64_t seed = 0;
  for (const auto& m : models) {
    const auto chain = overrides.resolve(m.spec ? m.spec->kind : ModelKind::RandomDegree);
    seed = chain.seed;
    resolved_chains[m.name] = chain_json(chain);
    const auto report = run_study(regime, {m}, chain, options).front();
    failures += report.failures;

    ojson j;
    j["schema_version"] = 1;
    j["model"] = report.model;
    if (m.spec) j["spec"] = spec_json(*m.spec);
    j["regime"] = std::string(to_string(regime.kind));
    j["chain"] = chain_json(chain);
    j["datasets"] = report.datasets;
    j["failures"] = report.failures;
    j["mae"] = report.mae;
    j["mae_se"] = report.mae_se;
    j["coverage80"] = report.coverage80;
    j["coverage95"] = report.coverage95;
    ojson records = ojson::array();
    std::string flat = "dataset,truth,ok,estimate,ci80_lo,ci80_hi,ci95_lo,ci95_hi\n";
    for (const auto& r : report.records) {
      records.push_back(record_json(r));
      flat += std::to_string(r.index) + "," + format_double(r.truth) + "," + (r.ok ? "1" : "0") + "," +
              format_double(r.estimate) + "," + format_double(r.ci80.lo) + "," + format_double(r.ci80.hi) + "," +
              format_double(r.ci95.lo) + "," + format_double(r.ci95.hi) + "\n";
    }
    j["records"] = records;
    write_text_file(out_dir / ("report_" + m.name + ".json"), j.dump(2) + "\n");
    write_text_file(out_dir / ("report_" + m.name + ".csv"), flat);
    table += m.name + "," + std::to_string(report.datasets) + "," + std::to_string(report.failures) + "," +
             format_double(report.mae) + "," + format_double(report.mae_se) + "," + format_double(report.coverage80) +
             "," + format_double(report.coverage95) + "\n";
    out << m.name << ": MAE " << format_double(report.mae) << ", 95% coverage " << format_double(report.coverage95)
        << ", failures " << report.failures << "\n";
  }
  write_text_file(out_dir / "table.csv", table);

  std::vector<std::string> argv{"simulate", "--regime", absolute(a.regime), "--models"};
  std::string joined;
  for (const auto& m : a.models) joined += (joined.empty() ? "" : ",") + m;
  argv.push_back(joined);
  argv.insert(argv.end(), {"--n-datasets", std::to_string(regime.n_datasets), "--workers", std::to_string(a.workers),
                           "--bootstrap", std::to_string(a.bootstrap)});
  if (overrides.iterations) argv.insert(argv.end(), {"--iterations", std::to_string(*overrides.iterations)});
  if (overrides.burn_in) argv.insert(argv.end(), {"--burn-in", std::to_string(*overrides.burn_in)});
  if (overrides.thin) argv.insert(argv.end(), {"--thin", std::to_string(*overrides.thin)});
  if (overrides.pilot_iterations) argv.insert(argv.end(), {"--pilot-iterations", std::to_string(*overrides.pilot_iterations)});
  if (overrides.chains) argv.insert(argv.end(), {"--chains", std::to_string(*overrides.chains)});
  argv.insert(argv.end(), {"--seed", std::to_string(seed), "--out", absolute(a.out)});
  write_manifest(out_dir, argv, {{"regime", absolute(a.regime)}},
                 {{"regime", std::string(to_string(regime.kind))}, {"n_datasets", regime.n_datasets}, {"chains", resolved_chains}},
                 seed, seconds_since(start));
  if (failures > 0) {
    err << failures << " dataset fit(s) failed; see the report files\n";
    return kExitSampler;
  }
  return kExitOk;
}

// backestimate

struct BackArgs {
  std::string data;
  std::string config;
  std::string model;
  std::string out;
  bool fit_recall = false;
  std::size_t workers = 0;
  ChainFlags chain;
};

int cmd_backestimate(const BackArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const auto table = read_responses_csv(a.data);
  const auto config = load_run_config(a.config);
  const auto data = build_dataset(table, config);
  if (data.groups() < 3) {
    throw Error(ErrorCode::Precondition, "back estimation needs at least 3 groups, got " + std::to_string(data.groups()));
  }
  std::optional<ModelKind> kind;
  if (!a.model.empty()) kind = parse_model_kind(a.model);
  const auto spec = build_model_spec(config, kind, std::nullopt);
  const auto chain = config.chain.merged_with(a.chain.overrides()).resolve(spec.kind);
  if (chain.stored_draws() * chain.n_chains < 100) {
    throw Error(ErrorCode::InvalidConfig, "fewer than 100 stored draws; raise --iterations");
  }

  const fs::path out_dir(a.out);
  OutputLock lock(out_dir);
  StudyOptions options;
  options.workers = a.workers;
  const auto result = back_estimate(data, spec, chain, options);

  ojson j;
  j["schema_version"] = 1;
  j["model"] = spec_json(spec);
  j["chain"] = chain_json(chain);
  ojson groups = ojson::array();
  for (const auto& g : result.groups) {
    ojson e;
    e["group"] = g.label;
    e["true_size"] = g.true_size;
    e["ok"] = g.ok;
    if (g.ok) {
      e["size"] = summary_json(g.summary);
      e["log_sd"] = g.log_sd;
    } else {
      e["error"] = g.error;
    }
    groups.push_back(e);
  }
  j["groups"] = groups;
  j["mae"] = result.mae;
  j["coverage80"] = result.coverage80;
  j["coverage95"] = result.coverage95;
  j["failures"] = result.failures;

  int status = kExitOk;
  if (a.fit_recall) {
    const auto points = result.calibration_points();
    CalibrationFile file;
    file.calibration = fit_recall_calibration(points);
    double largest = 0.0;
    for (const auto& p : points) largest = std::max(largest, p.true_size);
    file.max_known_prevalence = largest / static_cast<double>(data.total_population());
    write_text_file(out_dir / "calibration.json", calibration_json(file));
    j["calibration"] = {{"a", file.calibration.a}, {"b", file.calibration.b}, {"sigma_eps", file.calibration.sigma_eps}};
  }
  write_text_file(out_dir / "backestimate.json", j.dump(2) + "\n");

  std::vector<std::string> argv{"backestimate", "--data", absolute(a.data), "--config", absolute(a.config), "--model",
                                std::string(to_string(spec.kind)), "--workers", std::to_string(a.workers)};
  append_chain_args(argv, chain);
  if (a.fit_recall) argv.push_back("--fit-recall");
  argv.insert(argv.end(), {"--out", absolute(a.out)});
  write_manifest(out_dir, argv, {{"data", absolute(a.data)}, {"config", absolute(a.config)}},
                 {{"model", spec_json(spec)}, {"chain", chain_json(chain)}}, chain.seed, seconds_since(start));

  out << "back estimates: MAE " << format_double(result.mae) << ", 80% coverage " << format_double(result.coverage80)
      << ", 95% coverage " << format_double(result.coverage95) << "\n";
  if (result.failures > 0) {
    err << result.failures << " group fit(s) failed\n";
    status = kExitSampler;
  }
  return status;
}

// replay

int cmd_replay(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
               std::ostream& err) {
  const auto text = read_text_file(manifest_path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, manifest_path + ": malformed manifest (" + e.what() + ")");
  }
  if (!m.is_object() || !m.contains("argv") || !m["argv"].is_array() || m["argv"].empty()) {
    throw Error(ErrorCode::InvalidConfig, manifest_path + ": manifest has no argv list");
  }
  std::vector<std::string> argv;
  for (const auto& a : m["argv"]) {
    if (!a.is_string()) throw Error(ErrorCode::InvalidConfig, manifest_path + ": argv entries must be strings");
    argv.push_back(a.get<std::string>());
  }
  if (argv.front() == "replay") throw Error(ErrorCode::InvalidConfig, manifest_path + ": cannot replay a replay");
  if (!out_override.empty()) {
    const auto it = std::find(argv.begin(), argv.end(), "--out");
    if (it == argv.end() || it + 1 == argv.end()) {
      throw Error(ErrorCode::InvalidConfig, manifest_path + ": manifest argv has no --out");
    }
    *(it + 1) = absolute(out_override);
  }
  return run_cli(argv, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Network scale-up size estimation"};
  app.name("nsum");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(NSUM_VERSION));

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit one model to a survey");
  fit_cmd->add_option("--data", fit.data, "responses file (CSV with header)")->required();
  fit_cmd->add_option("--config", fit.config, "model and prior config (JSON)")->required();
  fit_cmd->add_option("--model", fit.model, "degree | barrier | transmission | combined");
  fit_cmd->add_option("--out", fit.out, "output directory")->required();
  fit_cmd->add_option("--recall-calibration", fit.calibration, "calibration file from backestimate --fit-recall");
  fit_cmd->add_option("--jacobian", fit.jacobian, "exact | paper");
  fit.chain.add_to(*fit_cmd);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulation study over a regime");
  sim_cmd->add_option("--regime", sim.regime, "regime config (JSON)")->required();
  sim_cmd->add_option("--models", sim.models, "comma-separated: scaleup,degree,barrier,transmission,combined")
      ->required()
      ->delimiter(',');
  sim.n_datasets_opt = sim_cmd->add_option("--n-datasets", sim.n_datasets, "number of simulated datasets");
  sim_cmd->add_option("--workers", sim.workers, "worker threads (0: all cores)");
  sim_cmd->add_option("--bootstrap", sim.bootstrap, "bootstrap resamples for scale-up intervals");
  sim_cmd->add_option("--out", sim.out, "output directory")->required();
  sim.chain.add_to(*sim_cmd);

  BackArgs back;
  auto* back_cmd = app.add_subcommand("backestimate", "leave-one-out estimates of the known groups");
  back_cmd->add_option("--data", back.data, "responses file (CSV with header)")->required();
  back_cmd->add_option("--config", back.config, "model and prior config (JSON)")->required();
  back_cmd->add_option("--model", back.model, "degree | barrier | transmission | combined");
  back_cmd->add_option("--out", back.out, "output directory")->required();
  back_cmd->add_flag("--fit-recall", back.fit_recall, "also fit the recall calibration");
  back_cmd->add_option("--workers", back.workers, "worker threads (0: all cores)");
  back.chain.add_to(*back_cmd);

  std::string manifest;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a command from its manifest");
  replay_cmd->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  replay_cmd->add_option("--out", replay_out, "write to this directory instead of the recorded one");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    CLI::App* shown = &app;
    for (auto* sub : app.get_subcommands()) shown = sub;
    err << shown->help();
    return kExitValidation;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out, err);
    if (*sim_cmd) return cmd_simulate(sim, out, err);
    if (*back_cmd) return cmd_backestimate(back, out, err);
    if (*replay_cmd) return cmd_replay(manifest, replay_out, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_validation() ? kExitValidation : kExitSampler;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
  return kExitUnexpected;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace nsum
