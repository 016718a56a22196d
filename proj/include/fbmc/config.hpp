#ifndef FBMC_CONFIG_HPP
#define FBMC_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "fbmc/core/error.hpp"
#include "fbmc/core/hash.hpp"

namespace fbmc {

enum class Mode { fbmc, fbmc_plus, fbmc_cc, ntc, nodal, uniform };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::fbmc: return "fbmc";
    case Mode::fbmc_plus: return "fbmc_plus";
    case Mode::fbmc_cc: return "fbmc_cc";
    case Mode::ntc: return "ntc";
    case Mode::nodal: return "nodal";
    case Mode::uniform: return "uniform";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::fbmc, Mode::fbmc_plus, Mode::fbmc_cc, Mode::ntc, Mode::nodal, Mode::uniform})
    if (to_string(m) == s) return m;
  throw ConfigError(fmt::format("unknown mode '{}'", s));
}

inline bool is_flow_based(Mode m) {
  return m == Mode::fbmc || m == Mode::fbmc_plus || m == Mode::fbmc_cc;
}

/// Fully resolved scenario settings. Built from an INI file whose explicit
/// keys override the defaults implied by the mode.
struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path dataset;
  Mode mode = Mode::fbmc;
  double capacity_scale = 1.0;

  // Flow-based parameters.
  double minram = 0.2;
  bool cross_border_only = false;
  double z2z_threshold = 0.05;
  double outage_sensitivity = 0.2;
  std::optional<std::filesystem::path> fav_file;

  // Market.
  std::optional<double> ntc;
  std::optional<std::filesystem::path> ntc_file;
  double curtailment_penalty = 5.0;
  double exchange_penalty = 0.01;

  // Congestion management.
  double redispatch_price = 30.0;
  double slack_penalty = 1000.0;

  // Uncertainty.
  double epsilon = 0.05;
  double relative_std = 0.1;
  double correlation = 0.0;

  // Monte Carlo.
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  std::string alpha = "cc";  // cc | pro_rata

  // Domain slice.
  bool slice = false;
  std::size_t slice_timestep = 0;
  std::string slice_x = "";  // "Z1:Z2"; empty = first two zones
  std::string slice_y = "";

  unsigned threads = 1;

  bool chance_constrained() const { return mode == Mode::fbmc_cc; }

  /// Canonical text of every resolved setting; hashed into run metadata.
  std::string canonical() const {
    std::ostringstream o;
    auto kv = [&](const char* k, const auto& v) { o << k << '=' << v << '\n'; };
    kv("name", name);
    kv("dataset", dataset.filename().string());
    kv("mode", to_string(mode));
    kv("capacity_scale", fmt::format("{}", capacity_scale));
    kv("minram", fmt::format("{}", minram));
    kv("cross_border_only", cross_border_only);
    kv("z2z_threshold", fmt::format("{}", z2z_threshold));
    kv("outage_sensitivity", fmt::format("{}", outage_sensitivity));
    kv("fav_file", fav_file ? fav_file->filename().string() : "");
    kv("ntc", ntc ? fmt::format("{}", *ntc) : "");
    kv("ntc_file", ntc_file ? ntc_file->filename().string() : "");
    kv("curtailment_penalty", fmt::format("{}", curtailment_penalty));
    kv("exchange_penalty", fmt::format("{}", exchange_penalty));
    kv("redispatch_price", fmt::format("{}", redispatch_price));
    kv("slack_penalty", fmt::format("{}", slack_penalty));
    kv("epsilon", fmt::format("{}", epsilon));
    kv("relative_std", fmt::format("{}", relative_std));
    kv("correlation", fmt::format("{}", correlation));
    kv("samples", samples);
    kv("seed", seed);
    kv("alpha", alpha);
    kv("slice", slice);
    kv("slice_timestep", slice_timestep);
    kv("slice_x", slice_x);
    kv("slice_y", slice_y);
    return o.str();
  }

  std::string hash() const { return sha256_hex(canonical()); }

  void validate() const {
    if (!(capacity_scale > 0.0)) throw ConfigError("capacity_scale must be positive");
    if (!(minram >= 0.0 && minram <= 1.0)) throw ConfigError("minram must lie in [0, 1]");
    for (double v : {z2z_threshold, outage_sensitivity})
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("CNEC thresholds must lie in [0, 1]");
    if (mode == Mode::ntc && !ntc && !ntc_file)
      throw ConfigError("ntc mode needs market.ntc or market.ntc_file");
    if (ntc && *ntc < 0.0) throw ConfigError("market.ntc must be nonnegative");
    for (double v : {curtailment_penalty, exchange_penalty, redispatch_price, slack_penalty})
      if (v < 0.0) throw ConfigError("penalties must be nonnegative");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
    if (relative_std < 0.0) throw ConfigError("relative_std must be nonnegative");
    if (!(correlation >= 0.0 && correlation < 1.0)) throw ConfigError("correlation must lie in [0, 1)");
    if (alpha != "cc" && alpha != "pro_rata") throw ConfigError("montecarlo.alpha must be cc or pro_rata");
    if (threads < 1) throw ConfigError("threads must be at least 1");
  }
};

namespace detail {

using Tree = boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"scenario", {"name", "dataset", "mode", "capacity_scale", "threads"}},
      {"market",
       {"minram", "cross_border_only", "z2z_threshold", "outage_sensitivity", "fav_file", "ntc",
        "ntc_file", "curtailment_penalty", "exchange_penalty", "long_term_allocation"}},
      {"redispatch", {"price", "slack_penalty"}},
      {"uncertainty", {"epsilon", "relative_std", "correlation"}},
      {"montecarlo", {"samples", "seed", "alpha"}},
      {"slice", {"enabled", "timestep", "x", "y"}},
  };
  return keys;
}

template <class T>
T get(const Tree& tree, const std::string& key) {
  try {
    return tree.get<T>(Tree::path_type(key, '.'));
  } catch (const boost::property_tree::ptree_bad_data&) {
    throw ConfigError(fmt::format("invalid value for {}: '{}'", key, tree.get<std::string>(key)));
  }
}

inline bool get_bool(const Tree& tree, const std::string& key) {
  auto v = tree.get<std::string>(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("invalid boolean for {}: '{}'", key, v));
}

}  // namespace detail

/// Applies `section.key=value` overrides to a parsed tree.
inline void apply_overrides(detail::Tree& tree, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || s.find('.') > eq)
      throw ConfigError(fmt::format("override '{}' is not of the form section.key=value", s));
    tree.put(s.substr(0, eq), s.substr(eq + 1));
  }
}

/// Resolves a tree into a config. Relative paths resolve against `base`.
inline ScenarioConfig resolve_config(const detail::Tree& tree, const std::filesystem::path& base) {
  const auto& known = detail::known_keys();
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) throw ConfigError(fmt::format("unknown config section [{}]", section));
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError(fmt::format("unknown config key {}.{}", section, key));
  }
  auto has = [&](const std::string& k) { return tree.get_optional<std::string>(k).has_value(); };
  auto path = [&](const std::string& k) {
    std::filesystem::path p = tree.get<std::string>(k);
    return p.is_absolute() ? p : base / p;
  };
  if (has("market.long_term_allocation") && !tree.get<std::string>("market.long_term_allocation").empty())
    throw ConfigError("market.long_term_allocation is not supported");

  ScenarioConfig c;
  if (!has("scenario.dataset")) throw ConfigError("scenario.dataset is required");
  c.dataset = path("scenario.dataset");
  if (has("scenario.mode")) c.mode = parse_mode(tree.get<std::string>("scenario.mode"));
  c.name = has("scenario.name") ? tree.get<std::string>("scenario.name") : to_string(c.mode);

  // Mode presets, overridable by explicit keys below.
  if (c.mode == Mode::fbmc_plus || c.mode == Mode::fbmc_cc) {
    c.cross_border_only = true;
    c.minram = 0.7;
  }

  if (has("scenario.capacity_scale")) c.capacity_scale = detail::get<double>(tree, "scenario.capacity_scale");
  if (has("scenario.threads")) c.threads = detail::get<unsigned>(tree, "scenario.threads");
  if (has("market.minram")) c.minram = detail::get<double>(tree, "market.minram");
  if (has("market.cross_border_only")) c.cross_border_only = detail::get_bool(tree, "market.cross_border_only");
  if (has("market.z2z_threshold")) c.z2z_threshold = detail::get<double>(tree, "market.z2z_threshold");
  if (has("market.outage_sensitivity")) c.outage_sensitivity = detail::get<double>(tree, "market.outage_sensitivity");
  if (has("market.fav_file")) c.fav_file = path("market.fav_file");
  if (has("market.ntc")) c.ntc = detail::get<double>(tree, "market.ntc");
  if (has("market.ntc_file")) c.ntc_file = path("market.ntc_file");
  if (has("market.curtailment_penalty")) c.curtailment_penalty = detail::get<double>(tree, "market.curtailment_penalty");
  if (has("market.exchange_penalty")) c.exchange_penalty = detail::get<double>(tree, "market.exchange_penalty");
  if (has("redispatch.price")) c.redispatch_price = detail::get<double>(tree, "redispatch.price");
  if (has("redispatch.slack_penalty")) c.slack_penalty = detail::get<double>(tree, "redispatch.slack_penalty");
  if (has("uncertainty.epsilon")) c.epsilon = detail::get<double>(tree, "uncertainty.epsilon");
  if (has("uncertainty.relative_std")) c.relative_std = detail::get<double>(tree, "uncertainty.relative_std");
  if (has("uncertainty.correlation")) c.correlation = detail::get<double>(tree, "uncertainty.correlation");
  if (has("montecarlo.samples")) c.samples = detail::get<std::size_t>(tree, "montecarlo.samples");
  if (has("montecarlo.seed")) c.seed = detail::get<std::uint64_t>(tree, "montecarlo.seed");
  if (has("montecarlo.alpha")) c.alpha = tree.get<std::string>("montecarlo.alpha");
  if (has("slice.enabled")) c.slice = detail::get_bool(tree, "slice.enabled");
  if (has("slice.timestep")) c.slice_timestep = detail::get<std::size_t>(tree, "slice.timestep");
  if (has("slice.x")) c.slice_x = tree.get<std::string>("slice.x");
  if (has("slice.y")) c.slice_y = tree.get<std::string>("slice.y");
  c.validate();
  return c;
}

inline detail::Tree read_config_tree(const std::filesystem::path& file) {
  detail::Tree tree;
  try {
    boost::property_tree::ini_parser::read_ini(file.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("cannot read config {}: {}", file.string(), e.message()));
  }
  return tree;
}

inline ScenarioConfig load_config(const std::filesystem::path& file,
                                  const std::vector<std::string>& overrides = {}) {
  auto tree = read_config_tree(file);
  apply_overrides(tree, overrides);
  return resolve_config(tree, file.parent_path());
}

}  // namespace fbmc

#endif  // FBMC_CONFIG_HPP
