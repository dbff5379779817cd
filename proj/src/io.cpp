#include "nsum/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nsum/error.hpp"

namespace nsum {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& source, const std::string& where, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, source + ": " + (where.empty() ? "" : where + ": ") + what);
}

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(source, "", std::string("malformed JSON (") + e.what() + ")");
  }
}

void require_object(const json& j, const std::string& source, const std::string& where) {
  if (!j.is_object()) config_error(source, where, "expected an object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& source,
                const std::string& where) {
  require_object(j, source, where);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      config_error(source, where, "unknown key '" + key + "' (allowed: " + list + ")");
    }
  }
}

std::string path_of(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double get_number(const json& j, const std::string& source, const std::string& where) {
  if (!j.is_number()) config_error(source, where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) config_error(source, where, "expected a finite number");
  return v;
}

std::int64_t get_integer(const json& j, const std::string& source, const std::string& where) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  }
  config_error(source, where, "expected an integer");
}

std::size_t get_count(const json& j, const std::string& source, const std::string& where) {
  const auto v = get_integer(j, source, where);
  if (v < 0) config_error(source, where, "expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::string get_string(const json& j, const std::string& source, const std::string& where) {
  if (!j.is_string()) config_error(source, where, "expected a string");
  return j.get<std::string>();
}

Interval get_interval(const json& j, const std::string& source, const std::string& where) {
  if (!j.is_array() || j.size() != 2) config_error(source, where, "expected [lo, hi]");
  Interval r{get_number(j[0], source, where + "[0]"), get_number(j[1], source, where + "[1]")};
  if (!(r.lo < r.hi)) config_error(source, where, "interval must have lo < hi");
  return r;
}

BetaMR get_beta_mr(const json& j, const std::string& source, const std::string& where) {
  check_keys(j, {"m", "rho"}, source, where);
  if (!j.contains("m") || !j.contains("rho")) config_error(source, where, "needs both m and rho");
  BetaMR p{get_number(j["m"], source, path_of(where, "m")), get_number(j["rho"], source, path_of(where, "rho"))};
  if (!(p.m > 0.0 && p.m < 1.0 && p.rho > 0.0 && p.rho < 1.0)) {
    config_error(source, where, "m and rho must lie in (0, 1)");
  }
  return p;
}

void check_schema_version(const json& j, const std::string& source) {
  if (j.contains("schema_version") && get_integer(j["schema_version"], source, "schema_version") != 1) {
    config_error(source, "schema_version", "only version 1 is supported");
  }
}

ChainOverrides parse_chain(const json& j, const std::string& source) {
  const std::string where = "chain";
  check_keys(j, {"iterations", "burn_in", "thin", "pilot_iterations", "chains", "seed"}, source, where);
  ChainOverrides c;
  if (j.contains("iterations")) c.iterations = get_count(j["iterations"], source, "chain.iterations");
  if (j.contains("burn_in")) c.burn_in = get_count(j["burn_in"], source, "chain.burn_in");
  if (j.contains("thin")) c.thin = get_count(j["thin"], source, "chain.thin");
  if (j.contains("pilot_iterations")) {
    c.pilot_iterations = get_count(j["pilot_iterations"], source, "chain.pilot_iterations");
  }
  if (j.contains("chains")) c.chains = get_count(j["chains"], source, "chain.chains");
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(get_count(j["seed"], source, "chain.seed"));
  return c;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

ResponseTable parse_responses_csv(std::string_view text, const std::string& source) {
  ResponseTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (table.labels.empty()) {
      std::set<std::string> seen;
      for (const auto& c : cells) {
        if (c.empty()) throw Error(ErrorCode::ShapeMismatch, where + ": empty group label in header");
        if (!seen.insert(c).second) throw Error(ErrorCode::ShapeMismatch, where + ": duplicate group label '" + c + "'");
      }
      table.labels = cells;
      continue;
    }
    if (cells.size() != table.labels.size()) {
      throw Error(ErrorCode::ShapeMismatch, where + ": expected " + std::to_string(table.labels.size()) +
                                                " values, got " + std::to_string(cells.size()));
    }
    std::vector<std::int64_t> row;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      std::int64_t value = 0;
      const auto& c = cells[k];
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), value);
      if (ec != std::errc() || ptr != c.data() + c.size() || c.empty()) {
        throw Error(ErrorCode::ShapeMismatch,
                    where + ": column '" + table.labels[k] + "': '" + c + "' is not an integer count");
      }
      if (value < 0) {
        throw Error(ErrorCode::NegativeResponse,
                    where + ": column '" + table.labels[k] + "': negative response " + c);
      }
      row.push_back(value);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.labels.empty()) throw Error(ErrorCode::ShapeMismatch, source + ": no header row");
  if (table.rows.empty()) throw Error(ErrorCode::ShapeMismatch, source + ": no respondent rows");
  return table;
}

ResponseTable read_responses_csv(const std::filesystem::path& path) {
  return parse_responses_csv(read_text_file(path), path.string());
}

ChainOverrides ChainOverrides::merged_with(const ChainOverrides& other) const {
  ChainOverrides c = *this;
  if (other.iterations) c.iterations = other.iterations;
  if (other.burn_in) c.burn_in = other.burn_in;
  if (other.thin) c.thin = other.thin;
  if (other.pilot_iterations) c.pilot_iterations = other.pilot_iterations;
  if (other.chains) c.chains = other.chains;
  if (other.seed) c.seed = other.seed;
  return c;
}

ChainConfig ChainOverrides::resolve(ModelKind kind) const {
  ChainConfig c = ChainConfig::defaults_for(kind);
  if (iterations) c = c.with_iterations(*iterations);
  if (burn_in) c.burn_in = *burn_in;
  if (thin) c.thin = *thin;
  if (pilot_iterations) c.pilot_iterations = *pilot_iterations;
  if (chains) c.n_chains = *chains;
  if (seed) c.seed = *seed;
  c.validate();
  return c;
}

RunConfig parse_run_config(std::string_view json_text, const std::string& source) {
  const json j = parse_json(json_text, source);
  check_keys(j, {"schema_version", "total_population", "unknown_group", "known_sizes", "model", "chain"}, source, "");
  check_schema_version(j, source);
  RunConfig c;
  if (!j.contains("total_population")) {
    config_error(source, "", "total_population is required (prevalence is never inferred)");
  }
  c.total_population = get_integer(j["total_population"], source, "total_population");
  if (c.total_population <= 0) config_error(source, "total_population", "must be positive");
  if (!j.contains("unknown_group")) config_error(source, "", "unknown_group is required");
  c.unknown_group = get_string(j["unknown_group"], source, "unknown_group");
  if (!j.contains("known_sizes")) config_error(source, "", "known_sizes is required");
  require_object(j["known_sizes"], source, "known_sizes");
  for (const auto& [label, value] : j["known_sizes"].items()) {
    c.known_sizes[label] = get_integer(value, source, "known_sizes." + label);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, {"kind", "mu_range", "sigma_range", "transmission_prior", "jacobian"}, source, "model");
    try {
      if (m.contains("kind")) c.kind = parse_model_kind(get_string(m["kind"], source, "model.kind"));
      if (m.contains("jacobian")) {
        c.jacobian_mode = parse_jacobian_mode(get_string(m["jacobian"], source, "model.jacobian"));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InvalidConfig) throw;
      config_error(source, "model", e.what());
    }
    if (m.contains("mu_range")) c.mu_range = get_interval(m["mu_range"], source, "model.mu_range");
    if (m.contains("sigma_range")) c.sigma_range = get_interval(m["sigma_range"], source, "model.sigma_range");
    if (m.contains("transmission_prior")) {
      c.transmission_prior = get_beta_mr(m["transmission_prior"], source, "model.transmission_prior");
    }
  }
  if (j.contains("chain")) c.chain = parse_chain(j["chain"], source);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.string());
}

SurveyDataset build_dataset(const ResponseTable& table, const RunConfig& config) {
  RawSurvey raw;
  raw.rows = table.rows;
  raw.labels = table.labels;
  raw.total_population = config.total_population;
  const auto it = std::find(table.labels.begin(), table.labels.end(), config.unknown_group);
  if (it == table.labels.end()) {
    throw Error(ErrorCode::InvalidConfig,
                "unknown_group '" + config.unknown_group + "' is not a column of the responses file");
  }
  raw.unknown_index = static_cast<std::size_t>(it - table.labels.begin());
  for (const auto& label : table.labels) {
    if (label == config.unknown_group) {
      if (config.known_sizes.count(label)) {
        throw Error(ErrorCode::InvalidConfig, "known_sizes lists the unknown group '" + label + "'");
      }
      continue;
    }
    const auto size = config.known_sizes.find(label);
    if (size == config.known_sizes.end()) {
      throw Error(ErrorCode::InvalidConfig, "known_sizes has no entry for column '" + label + "'");
    }
    raw.known_sizes.push_back(size->second);
  }
  for (const auto& [label, size] : config.known_sizes) {
    if (std::find(table.labels.begin(), table.labels.end(), label) == table.labels.end()) {
      throw Error(ErrorCode::InvalidConfig, "known_sizes entry '" + label + "' matches no column");
    }
  }
  return validate_dataset(raw);
}

ModelSpec build_model_spec(const RunConfig& config, std::optional<ModelKind> kind,
                           std::optional<JacobianMode> jacobian) {
  ModelSpec spec;
  if (kind) {
    spec.kind = *kind;
  } else if (config.kind) {
    spec.kind = *config.kind;
  } else {
    throw Error(ErrorCode::InvalidConfig, "no model given (use --model or model.kind in the config)");
  }
  spec.mu_range = config.mu_range;
  spec.sigma_range = config.sigma_range;
  spec.jacobian_mode = jacobian.value_or(config.jacobian_mode);
  if (uses_transmission(spec.kind)) {
    if (!config.transmission_prior) {
      throw Error(ErrorCode::InvalidConfig,
                  std::string("model '") + std::string(to_string(spec.kind)) + "' needs model.transmission_prior");
    }
    spec.transmission_prior = config.transmission_prior;
  }
  spec.validate();
  return spec;
}

CalibrationFile parse_calibration(std::string_view json_text, const std::string& source) {
  const json j = parse_json(json_text, source);
  check_keys(j, {"schema_version", "a", "b", "sigma_eps", "log_likelihood", "max_known_prevalence"}, source, "");
  check_schema_version(j, source);
  for (const char* key : {"a", "b", "sigma_eps"}) {
    if (!j.contains(key)) config_error(source, "", std::string(key) + " is required");
  }
  CalibrationFile f;
  f.calibration.a = get_number(j["a"], source, "a");
  f.calibration.b = get_number(j["b"], source, "b");
  f.calibration.sigma_eps = get_number(j["sigma_eps"], source, "sigma_eps");
  if (j.contains("log_likelihood")) f.calibration.log_likelihood = get_number(j["log_likelihood"], source, "log_likelihood");
  if (j.contains("max_known_prevalence")) {
    f.max_known_prevalence = get_number(j["max_known_prevalence"], source, "max_known_prevalence");
  }
  if (!(f.calibration.b > 0.0)) config_error(source, "b", "must be positive");
  if (f.calibration.sigma_eps < 0.0) config_error(source, "sigma_eps", "must be nonnegative");
  return f;
}

CalibrationFile load_calibration(const std::filesystem::path& path) {
  return parse_calibration(read_text_file(path), path.string());
}

std::string calibration_json(const CalibrationFile& file) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["a"] = file.calibration.a;
  j["b"] = file.calibration.b;
  j["sigma_eps"] = file.calibration.sigma_eps;
  j["log_likelihood"] = file.calibration.log_likelihood;
  if (file.max_known_prevalence) j["max_known_prevalence"] = *file.max_known_prevalence;
  return j.dump(2) + "\n";
}

SimRegime parse_regime(std::string_view json_text, const std::string& source) {
  const json j = parse_json(json_text, source);
  check_keys(j,
             {"schema_version", "kind", "n_respondents", "n_datasets", "total_population", "unknown_size",
              "degree_mu", "degree_sigma", "known_sizes", "known_prevalence_range", "rho", "tau", "tau_prior"},
             source, "");
  check_schema_version(j, source);
  if (!j.contains("kind")) config_error(source, "", "kind is required");
  SimRegime r;
  try {
    r = SimRegime::defaults(parse_regime_kind(get_string(j["kind"], source, "kind")));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InvalidConfig) throw;
    config_error(source, "kind", e.what());
  }
  if (j.contains("n_respondents")) r.n_respondents = get_count(j["n_respondents"], source, "n_respondents");
  if (j.contains("n_datasets")) r.n_datasets = get_count(j["n_datasets"], source, "n_datasets");
  const bool resized = j.contains("total_population");
  if (resized) r.total_population = get_integer(j["total_population"], source, "total_population");
  if (j.contains("unknown_size")) r.unknown_size = get_integer(j["unknown_size"], source, "unknown_size");
  if (j.contains("degree_mu")) r.degree_mu = get_number(j["degree_mu"], source, "degree_mu");
  if (j.contains("degree_sigma")) r.degree_sigma = get_number(j["degree_sigma"], source, "degree_sigma");
  if (j.contains("known_sizes") && j.contains("known_prevalence_range")) {
    config_error(source, "", "give known_sizes or known_prevalence_range, not both");
  }
  if (j.contains("known_sizes")) {
    const auto& ks = j["known_sizes"];
    if (!ks.is_array() || ks.empty()) config_error(source, "known_sizes", "expected a nonempty list");
    r.known_sizes.clear();
    for (std::size_t k = 0; k < ks.size(); ++k) {
      r.known_sizes.push_back(get_integer(ks[k], source, "known_sizes[" + std::to_string(k) + "]"));
    }
  } else if (j.contains("known_prevalence_range") || resized) {
    double lo = 0.0005, hi = 0.03;
    std::size_t count = r.known_sizes.size();
    if (j.contains("known_prevalence_range")) {
      const auto& p = j["known_prevalence_range"];
      if (!p.is_array() || p.size() != 3) config_error(source, "known_prevalence_range", "expected [lo, hi, count]");
      lo = get_number(p[0], source, "known_prevalence_range[0]");
      hi = get_number(p[1], source, "known_prevalence_range[1]");
      count = get_count(p[2], source, "known_prevalence_range[2]");
      if (!(lo > 0.0 && lo <= hi && hi < 1.0) || count == 0) {
        config_error(source, "known_prevalence_range", "need 0 < lo <= hi < 1 and count > 0");
      }
    }
    r.known_sizes = log_spaced_sizes(r.total_population, count, lo, hi);
  }
  if (j.contains("rho")) {
    const auto& rho = j["rho"];
    if (rho.is_array()) {
      r.rho.clear();
      for (std::size_t k = 0; k < rho.size(); ++k) {
        r.rho.push_back(get_number(rho[k], source, "rho[" + std::to_string(k) + "]"));
      }
    } else {
      r.rho.assign(r.groups(), get_number(rho, source, "rho"));
    }
  } else if (r.kind == RegimeKind::Barrier && r.rho.size() != r.groups()) {
    r.rho.assign(r.groups(), 0.08);
  }
  if (j.contains("tau")) r.tau = get_number(j["tau"], source, "tau");
  if (j.contains("tau_prior")) r.tau_prior = get_beta_mr(j["tau_prior"], source, "tau_prior");
  try {
    r.validate();
  } catch (const Error& e) {
    config_error(source, "", e.what());
  }
  return r;
}

SimRegime load_regime(const std::filesystem::path& path) {
  return parse_regime(read_text_file(path), path.string());
}

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw Error(ErrorCode::Io, "could not format a number");
  return std::string(buffer, ptr);
}

std::string draws_csv(const FitResult& fit) {
  std::string out = "chain,iteration";
  for (const auto& name : fit.names()) out += "," + name;
  out += "\n";
  for (std::size_t c = 0; c < fit.chains.size(); ++c) {
    const auto& chain = fit.chains[c];
    for (std::size_t t = 0; t < chain.size(); ++t) {
      out += std::to_string(c + 1);
      out += ",";
      out += std::to_string(chain.config.burn_in + t * chain.config.thin + 1);
      for (const auto& trace : chain.traces) {
        out += ",";
        out += format_double(trace[t]);
      }
      out += "\n";
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, path.string() + ": cannot open for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, tmp.string() + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::Io, tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, path.string() + ": " + ec.message());
}

}  // namespace nsum
