#include "config.hpp"

#include <array>
#include <sstream>

#include "sgdetect/errors.hpp"
#include "text_io.hpp"

namespace sgdetect {

namespace {

constexpr std::array kKnownKeys{
    "run.seed", "run.out", "run.jobs",
    "model.file", "model.x0",
    "filter.steady_state", "filter.dos", "filter.initial_covariance",
    "quantizer.levels", "quantizer.thresholds", "quantizer.quantiles", "quantizer.calibration_steps",
    "train.alpha", "train.epsilon", "train.cost", "train.horizon", "train.window", "train.episodes",
    "train.schedule", "train.sign_mode", "train.log_interval", "train.table",
    "detect.table", "detect.input", "detect.scenario", "detect.tau", "detect.max_horizon", "detect.warmup",
    "eval.detectors", "eval.tables", "eval.scenarios", "eval.euclidean_thresholds", "eval.cosine_thresholds",
    "eval.prediction_source", "eval.n_trials", "eval.bound", "eval.max_horizon", "eval.warmup",
    "eval.false_alarm_trials", "eval.grid_points", "eval.grid_steps",
    "mse.scenarios", "mse.tau", "mse.horizon", "mse.runs",
};

constexpr std::array kScenarioFields{
    "kind", "fdi_lo", "fdi_hi", "sign_mode", "stealth_lo", "stealth_hi", "jam_var_lo", "jam_var_hi",
    "corr_entry_var", "availability", "removed_lines", "tau",
};

bool known_key(std::string_view key) {
  for (std::string_view k : kKnownKeys)
    if (k == key) return true;
  if (key.starts_with("scenario.")) {
    const auto rest = key.substr(9);
    const auto dot = rest.rfind('.');
    if (dot == std::string_view::npos || dot == 0) return false;
    const auto field = rest.substr(dot + 1);
    for (std::string_view f : kScenarioFields)
      if (f == field) return true;
  }
  return false;
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path(), path.string());
}

Config Config::parse(std::string_view text, std::filesystem::path base_dir, std::string_view origin) {
  Config c;
  c.base_ = std::move(base_dir);
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'section.key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (!known_key(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (c.values_.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

const std::string& Config::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string Config::text_or(const std::string& key, std::string fallback) const {
  return has(key) ? text(key) : std::move(fallback);
}

double Config::number(const std::string& key) const {
  double v = 0.0;
  if (!detail::parse_number(detail::trim(text(key)), v)) throw ConfigError("config key '" + key + "' is not a number");
  return v;
}

double Config::number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

std::int64_t Config::integer(const std::string& key) const {
  const std::string& s = text(key);
  std::int64_t v = 0;
  if (detail::parse_number(s, v)) return v;
  // Accept integral values written in scientific notation, e.g. 4e5.
  double d = 0.0;
  if (detail::parse_number(s, d) && d == static_cast<double>(static_cast<std::int64_t>(d)))
    return static_cast<std::int64_t>(d);
  throw ConfigError("config key '" + key + "' is not an integer");
}

std::int64_t Config::integer_or(const std::string& key, std::int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool Config::flag_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = text(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config key '" + key + "' must be true or false");
}

std::vector<double> Config::numbers(const std::string& key) const {
  std::vector<double> out;
  for (auto tok : detail::split_ws(text(key))) {
    double v = 0.0;
    if (!detail::parse_number(tok, v)) throw ConfigError("config key '" + key + "' has a non-numeric entry");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> Config::words(const std::string& key) const {
  std::vector<std::string> out;
  for (auto tok : detail::split_ws(text(key))) out.emplace_back(tok);
  return out;
}

std::filesystem::path Config::path(const std::string& key) const {
  std::filesystem::path p = text(key);
  return p.is_absolute() ? p : base_ / p;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [k, v] : values_) {
    mix(k);
    mix(" = ");
    mix(v);
    mix("\n");
  }
  return h;
}

}  // namespace sgdetect
