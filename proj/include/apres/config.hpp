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

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apres/error.hpp"
#include "apres/gateway.hpp"
#include "apres/search.hpp"

namespace apres {

enum class ConfigErrc { Syntax, UnknownKey, BadValue, MissingPath, ResolvedMismatch };
constexpr std::string_view module_name(ConfigErrc) { return "config"; }
using ConfigError = ModuleError<ConfigErrc>;

struct RunConfig {
  ProviderConfig provider;
  SearchConfig search;  // rubric search
  int revision_iterations = 120;
  std::vector<double> lambda_grid;
  std::size_t tournament_budget = 20000;
  double quantile = 0.25;
  std::size_t workers = 4;
  std::optional<std::filesystem::path> corpus_path;
  std::optional<std::filesystem::path> run_dir;
  std::optional<std::filesystem::path> rubric_path;

  RunConfig();
  void validate() const;
  // Search settings for revision: the rubric-search ones with the revision budget.
  SearchConfig revision_search() const;
};

// Keys are "section.key"; the sections are provider, search and paths.
std::vector<std::string> config_keys();
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

// key = value lines under [section] headers; '#' starts a comment.
void apply_config_text(RunConfig& config, std::string_view text, std::string_view origin = "config");
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// Canonical dump of every key, one "section.key = value" line each.
std::string resolved_config_text(const RunConfig& config);

// Keys that may differ between invocations on one run directory: budgets
// extend a journaled run instead of changing its meaning.
bool is_budget_key(std::string_view key);

// Keys that may change between commands sharing a run directory: budgets, the seed
// and settings that do not affect results.
bool is_per_command_key(std::string_view key);

}  // namespace apres
