// Copyright 2026 The apres Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "apres/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <functional>
#include <set>

#include "apres/fs_util.hpp"
#include "apres/nb_regression.hpp"

namespace apres {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError(ConfigErrc::BadValue, fmt::format("{}: '{}' is not {}", key, value, want));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto s = trim(value);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) bad_value(key, value, "an integer");
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  const auto s = trim(value);
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used != s.size()) bad_value(key, value, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

std::string fmt_double(double d) { return fmt::format("{}", d); }

struct Key {
  std::string_view name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string path_text(const std::optional<fs::path>& p) { return p ? p->string() : std::string(); }

std::optional<fs::path> path_value(std::string_view v) {
  const auto s = trim(v);
  if (s.empty()) return std::nullopt;
  return fs::path(s).lexically_normal();
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"provider.name", [](RunConfig& c, std::string_view v) { c.provider.name = trim(v); },
       [](const RunConfig& c) { return c.provider.name; }},
      {"provider.base_url", [](RunConfig& c, std::string_view v) { c.provider.base_url = trim(v); },
       [](const RunConfig& c) { return c.provider.base_url; }},
      {"provider.model", [](RunConfig& c, std::string_view v) { c.provider.model = trim(v); },
       [](const RunConfig& c) { return c.provider.model; }},
      {"provider.api_key_env", [](RunConfig& c, std::string_view v) { c.provider.api_key_env = trim(v); },
       [](const RunConfig& c) { return c.provider.api_key_env; }},
      {"provider.timeout_s",
       [](RunConfig& c, std::string_view v) { c.provider.timeout_s = parse_integer<int>("timeout_s", v); },
       [](const RunConfig& c) { return std::to_string(c.provider.timeout_s); }},
      {"provider.max_retries",
       [](RunConfig& c, std::string_view v) { c.provider.max_retries = parse_integer<int>("max_retries", v); },
       [](const RunConfig& c) { return std::to_string(c.provider.max_retries); }},
      {"provider.stub_seed",
       [](RunConfig& c, std::string_view v) { c.provider.stub_seed = parse_integer<std::uint64_t>("stub_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.provider.stub_seed); }},
      {"provider.creative_temperature",
       [](RunConfig& c, std::string_view v) { c.provider.creative_temperature = parse_double("creative_temperature", v); },
       [](const RunConfig& c) { return fmt_double(c.provider.creative_temperature); }},
      {"provider.backoff_base_s",
       [](RunConfig& c, std::string_view v) { c.provider.backoff_base_s = parse_double("backoff_base_s", v); },
       [](const RunConfig& c) { return fmt_double(c.provider.backoff_base_s); }},
      {"search.n0", [](RunConfig& c, std::string_view v) { c.search.n0 = parse_integer<int>("n0", v); },
       [](const RunConfig& c) { return std::to_string(c.search.n0); }},
      {"search.n", [](RunConfig& c, std::string_view v) { c.search.n = parse_integer<int>("n", v); },
       [](const RunConfig& c) { return std::to_string(c.search.n); }},
      {"search.p_debug", [](RunConfig& c, std::string_view v) { c.search.p_debug = parse_double("p_debug", v); },
       [](const RunConfig& c) { return fmt_double(c.search.p_debug); }},
      {"search.d_max", [](RunConfig& c, std::string_view v) { c.search.d_max = parse_integer<int>("d_max", v); },
       [](const RunConfig& c) { return std::to_string(c.search.d_max); }},
      {"search.max_iterations",
       [](RunConfig& c, std::string_view v) { c.search.max_iterations = parse_integer<int>("max_iterations", v); },
       [](const RunConfig& c) { return std::to_string(c.search.max_iterations); }},
      {"search.revision_iterations",
       [](RunConfig& c, std::string_view v) { c.revision_iterations = parse_integer<int>("revision_iterations", v); },
       [](const RunConfig& c) { return std::to_string(c.revision_iterations); }},
      {"search.seed", [](RunConfig& c, std::string_view v) { c.search.seed = parse_integer<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.search.seed); }},
      {"search.lambda_grid",
       [](RunConfig& c, std::string_view v) {
         std::vector<double> grid;
         std::size_t start = 0;
         const std::string s(v);
         while (start <= s.size()) {
           auto comma = s.find(',', start);
           if (comma == std::string::npos) comma = s.size();
           const auto item = trim(std::string_view(s).substr(start, comma - start));
           if (!item.empty()) grid.push_back(parse_double("lambda_grid", item));
           start = comma + 1;
         }
         if (grid.empty()) bad_value("lambda_grid", v, "a comma-separated list of numbers");
         c.lambda_grid = std::move(grid);
       },
       [](const RunConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.lambda_grid.size(); ++i) out += (i ? ", " : "") + fmt_double(c.lambda_grid[i]);
         return out;
       }},
      {"search.tournament_budget",
       [](RunConfig& c, std::string_view v) {
         c.tournament_budget = parse_integer<std::size_t>("tournament_budget", v);
       },
       [](const RunConfig& c) { return std::to_string(c.tournament_budget); }},
      {"search.quantile", [](RunConfig& c, std::string_view v) { c.quantile = parse_double("quantile", v); },
       [](const RunConfig& c) { return fmt_double(c.quantile); }},
      {"search.workers", [](RunConfig& c, std::string_view v) { c.workers = parse_integer<std::size_t>("workers", v); },
       [](const RunConfig& c) { return std::to_string(c.workers); }},
      {"paths.corpus", [](RunConfig& c, std::string_view v) { c.corpus_path = path_value(v); },
       [](const RunConfig& c) { return path_text(c.corpus_path); }},
      {"paths.run_dir", [](RunConfig& c, std::string_view v) { c.run_dir = path_value(v); },
       [](const RunConfig& c) { return path_text(c.run_dir); }},
      {"paths.rubric", [](RunConfig& c, std::string_view v) { c.rubric_path = path_value(v); },
       [](const RunConfig& c) { return path_text(c.rubric_path); }},
  };
  return table;
}

const Key& find_key(std::string_view key) {
  for (const auto& k : keys())
    if (k.name == key) return k;
  throw ConfigError(ConfigErrc::UnknownKey, fmt::format("unknown configuration key '{}'", key));
}

}  // namespace

RunConfig::RunConfig() : lambda_grid(default_lambda_grid()) {}

void RunConfig::validate() const {
  try {
    provider.validate();
    search.validate();
    SearchConfig rev = revision_search();
    rev.validate();
  } catch (const Error& e) {
    throw ConfigError(ConfigErrc::BadValue, e.what());
  }
  if (lambda_grid.empty()) throw ConfigError(ConfigErrc::BadValue, "lambda_grid is empty");
  for (double l : lambda_grid)
    if (!(l >= 0.0)) throw ConfigError(ConfigErrc::BadValue, fmt::format("lambda {} is negative", l));
  if (!(quantile > 0.0 && quantile < 1.0))
    throw ConfigError(ConfigErrc::BadValue, fmt::format("quantile {} is outside (0, 1)", quantile));
  if (workers < 1) throw ConfigError(ConfigErrc::BadValue, "workers must be >= 1");
}

SearchConfig RunConfig::revision_search() const {
  SearchConfig c = search;
  c.max_iterations = revision_iterations;
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_key(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, std::string_view key) { return find_key(key).get(config); }

void apply_config_text(RunConfig& config, std::string_view text, std::string_view origin) {
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string line(text.substr(start, end - start));
    start = end + 1;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(ConfigErrc::Syntax, fmt::format("{}:{}: unterminated section header", origin, line_no));
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "provider" && section != "search" && section != "paths")
        throw ConfigError(ConfigErrc::UnknownKey, fmt::format("{}:{}: unknown section [{}]", origin, line_no, section));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(ConfigErrc::Syntax, fmt::format("{}:{}: expected key = value", origin, line_no));
    if (section.empty())
      throw ConfigError(ConfigErrc::Syntax, fmt::format("{}:{}: key outside a section", origin, line_no));
    const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
    try {
      set_config_value(config, key, std::string_view(line).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(e.code(), fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
    if (end == text.size()) break;
  }
}

void apply_config_file(RunConfig& config, const fs::path& path) {
  const auto text = read_file(path);
  if (!text) throw ConfigError(ConfigErrc::MissingPath, fmt::format("cannot read config file {}", path.string()));
  apply_config_text(config, *text, path.string());
  // Relative paths in a config file are taken relative to the file.
  const fs::path base = path.parent_path();
  for (auto* p : {&config.corpus_path, &config.run_dir, &config.rubric_path})
    if (*p && p->value().is_relative() && !base.empty()) *p = (base / p->value()).lexically_normal();
}

std::string resolved_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += fmt::format("{} = {}\n", k.name, k.get(config));
  return out;
}

bool is_budget_key(std::string_view key) {
  return key == "search.max_iterations" || key == "search.revision_iterations" || key == "search.tournament_budget";
}

bool is_per_command_key(std::string_view key) {
  static const std::set<std::string_view> operational = {"search.seed",         "search.workers",
                                                         "provider.timeout_s",  "provider.max_retries",
                                                         "provider.backoff_base_s", "provider.api_key_env"};
  return is_budget_key(key) || operational.contains(key);
}

}  // namespace apres
