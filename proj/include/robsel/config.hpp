#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "robsel/bootstrap.hpp"
#include "robsel/criterion.hpp"
#include "robsel/errors.hpp"
#include "robsel/estimators.hpp"
#include "robsel/family.hpp"
#include "robsel/simulation.hpp"

namespace robsel {

using json = nlohmann::json;

/// Every recognized configuration key with its default. Anything else in a
/// config file or --set assignment is rejected by name.
inline const json& config_defaults() {
  static const json defaults = {
      {"data",
       {{"path", ""},
        {"response", ""},
        {"add_intercept", true},
        {"always_include", json::array()}}},
      {"family", {{"name", "gaussian-identity"}}},
      {"estimator",
       {{"kind", "ml"},
        {"huber_c", 1.345},
        {"max_iter", 100},
        {"tol", 1e-8},
        {"mallows_weights_column", ""}}},
      {"loss", {{"b", 2.0}}},
      {"scale", {{"method", "default"}}},
      {"bootstrap",
       {{"m", 0},  // 0: use the default resample size round(3n/8)
        {"B", 50},
        {"K", 8},
        {"max_retries", 10},
        {"max_skip_fraction", 0.2}}},
      {"criterion", {{"k", 2.0}}},
      {"selection", {{"search", "exhaustive"}, {"include_null", false}}},
      {"simulate",
       {{"truth", {1.0, 0.0, 0.0, 0.0}},
        {"contamination", "none"},
        {"runs", 500},
        {"n", 64}}},
      {"seed", 12345},
      {"threads", 1},
  };
  return defaults;
}

namespace detail {

inline void check_known_keys(const json& doc, const json& schema, const std::string& prefix) {
  if (!doc.is_object()) {
    if (prefix.empty()) throw ConfigError("config: top level must be an object");
    return;
  }
  for (const auto& [key, value] : doc.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (schema.at(key).is_object()) {
      if (!value.is_object())
        throw ConfigError("config key '" + path + "' must be an object");
      check_known_keys(value, schema.at(key), path);
    }
  }
}

inline void merge_into(json& base, const json& overlay) {
  for (const auto& [key, value] : overlay.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object())
      merge_into(base[key], value);
    else
      base[key] = value;
  }
}

inline json parse_set_value(const std::string& text) {
  json parsed = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_discarded()) return parsed;
  if (text.find(',') != std::string::npos) {
    // bare comma list: numbers if they all parse, strings otherwise
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t comma = text.find(',', start);
      parts.push_back(text.substr(start, comma == std::string::npos
                                             ? std::string::npos
                                             : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    json arr = json::array();
    bool numeric = true;
    for (const auto& part : parts) {
      json num = json::parse(part, nullptr, false);
      if (num.is_discarded() || !num.is_number()) {
        numeric = false;
        break;
      }
      arr.push_back(num);
    }
    if (numeric) return arr;
    arr = json::array();
    for (const auto& part : parts) arr.push_back(part);
    return arr;
  }
  return json(text);
}

}  // namespace detail

/// Layered configuration document: defaults, then an optional file, then
/// --set assignments in order. Every layer is validated against the schema.
class ConfigDoc {
 public:
  ConfigDoc() : doc_(config_defaults()) {}

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json file = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (file.is_discarded())
      throw ConfigError("config file '" + path + "' is not valid JSON");
    detail::check_known_keys(file, config_defaults(), "");
    detail::merge_into(doc_, file);
  }

  /// "section.key=value"; values parse as JSON when possible, comma lists
  /// become arrays, anything else is a string.
  void apply_set(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const json value = detail::parse_set_value(assignment.substr(eq + 1));

    std::vector<std::string> keys;
    std::size_t start = 0;
    while (start <= path.size()) {
      const std::size_t dot = path.find('.', start);
      keys.push_back(path.substr(start, dot == std::string::npos ? std::string::npos
                                                                 : dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    json patch = value;
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) patch = json{{*it, patch}};
    detail::check_known_keys(patch, config_defaults(), "");
    detail::merge_into(doc_, patch);
  }

  void set(const std::string& path, const json& value) {
    apply_set(path + "=" + value.dump());
  }

  const json& raw() const { return doc_; }

  std::string dump() const { return doc_.dump(2) + "\n"; }

 private:
  json doc_;
};

/// Typed view of the document with range checks.
struct RunConfig {
  std::string data_path;
  std::string response;
  bool add_intercept = true;
  std::vector<std::string> always_include_names;
  std::string family_name = "gaussian-identity";
  EstimatorSpec estimator;
  std::string mallows_weights_column;
  double loss_b = 2.0;
  std::string scale_method = "default";
  BootstrapConfig bootstrap;
  double criterion_k = 2.0;
  std::string search = "exhaustive";
  bool include_null = false;
  Eigen::VectorXd sim_truth;
  std::string sim_contamination = "none";
  int sim_runs = 500;
  int sim_n = 64;
  std::uint64_t seed = 12345;
  int threads = 1;
};

namespace detail {

template <class T>
T fetch(const json& doc, const std::string& section, const std::string& key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

template <class T>
T fetch_top(const json& doc, const std::string& key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig resolve_config(const ConfigDoc& cfg) {
  const json& doc = cfg.raw();
  RunConfig rc;
  rc.data_path = detail::fetch<std::string>(doc, "data", "path");
  rc.response = detail::fetch<std::string>(doc, "data", "response");
  rc.add_intercept = detail::fetch<bool>(doc, "data", "add_intercept");
  rc.always_include_names =
      detail::fetch<std::vector<std::string>>(doc, "data", "always_include");
  rc.family_name = detail::fetch<std::string>(doc, "family", "name");

  const std::string kind = detail::fetch<std::string>(doc, "estimator", "kind");
  if (kind == "ml")
    rc.estimator.kind = EstimatorKind::ml;
  else if (kind == "cr")
    rc.estimator.kind = EstimatorKind::cantoni_ronchetti;
  else
    throw ConfigError("estimator.kind must be 'ml' or 'cr', got '" + kind + "'");
  rc.estimator.huber_c = detail::fetch<double>(doc, "estimator", "huber_c");
  rc.estimator.max_iter = detail::fetch<int>(doc, "estimator", "max_iter");
  rc.estimator.tol = detail::fetch<double>(doc, "estimator", "tol");
  rc.mallows_weights_column =
      detail::fetch<std::string>(doc, "estimator", "mallows_weights_column");
  if (rc.estimator.huber_c <= 0.0) throw ConfigError("estimator.huber_c must be positive");
  if (rc.estimator.max_iter < 1) throw ConfigError("estimator.max_iter must be positive");
  if (rc.estimator.tol <= 0.0) throw ConfigError("estimator.tol must be positive");

  rc.loss_b = detail::fetch<double>(doc, "loss", "b");
  if (rc.loss_b <= 0.0) throw ConfigError("loss.b must be positive");

  rc.scale_method = detail::fetch<std::string>(doc, "scale", "method");
  if (rc.scale_method != "default") scale_method_from_name(rc.scale_method);

  rc.bootstrap.m = detail::fetch<int>(doc, "bootstrap", "m");
  rc.bootstrap.B = detail::fetch<int>(doc, "bootstrap", "B");
  rc.bootstrap.K = detail::fetch<int>(doc, "bootstrap", "K");
  rc.bootstrap.max_retries = detail::fetch<int>(doc, "bootstrap", "max_retries");
  rc.bootstrap.max_skip_fraction =
      detail::fetch<double>(doc, "bootstrap", "max_skip_fraction");
  if (rc.bootstrap.m < 0) throw ConfigError("bootstrap.m must be nonnegative");
  if (rc.bootstrap.B < 1) throw ConfigError("bootstrap.B must be positive");
  if (rc.bootstrap.K < 1) throw ConfigError("bootstrap.K must be positive");
  if (rc.bootstrap.max_retries < 0)
    throw ConfigError("bootstrap.max_retries must be nonnegative");
  if (rc.bootstrap.max_skip_fraction < 0.0 || rc.bootstrap.max_skip_fraction > 1.0)
    throw ConfigError("bootstrap.max_skip_fraction must lie in [0, 1]");

  rc.criterion_k = detail::fetch<double>(doc, "criterion", "k");
  if (rc.criterion_k <= 0.0) throw ConfigError("criterion.k must be positive");

  rc.search = detail::fetch<std::string>(doc, "selection", "search");
  if (rc.search != "exhaustive" && rc.search != "backward" && rc.search != "both")
    throw ConfigError("selection.search must be 'exhaustive', 'backward', or 'both'");
  rc.include_null = detail::fetch<bool>(doc, "selection", "include_null");

  const auto truth = detail::fetch<std::vector<double>>(doc, "simulate", "truth");
  rc.sim_truth = Eigen::Map<const Eigen::VectorXd>(truth.data(),
                                                   static_cast<Eigen::Index>(truth.size()));
  rc.sim_contamination = detail::fetch<std::string>(doc, "simulate", "contamination");
  contamination_from_name(rc.sim_contamination);
  rc.sim_runs = detail::fetch<int>(doc, "simulate", "runs");
  rc.sim_n = detail::fetch<int>(doc, "simulate", "n");
  if (rc.sim_runs < 1) throw ConfigError("simulate.runs must be positive");
  if (rc.sim_n < 8) throw ConfigError("simulate.n must be at least 8");

  rc.seed = detail::fetch_top<std::uint64_t>(doc, "seed");
  rc.threads = detail::fetch_top<int>(doc, "threads");
  if (rc.threads < 1) throw ConfigError("threads must be positive");
  return rc;
}

/// Default resample size when bootstrap.m is left at zero: three eighths of
/// the sample, rounded, at least one.
inline int default_resample_size(Eigen::Index n) {
  return std::max<int>(1, static_cast<int>((3 * n + 4) / 8));
}

}  // namespace robsel
