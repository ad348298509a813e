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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apres/error.hpp"
#include "apres/rng.hpp"
#include "json.hpp"

namespace apres {

enum class SearchErrc {
  InvalidConfig,
  NoValidNode,
  NoEligibleParent,
  TaskFailure,
  CorruptJournal,
  RejectedConfigMismatch,
};
constexpr std::string_view module_name(SearchErrc) { return "search"; }
using SearchError = ModuleError<SearchErrc>;

struct SearchConfig {
  int n0 = 3;
  int n = 3;
  double p_debug = 0.5;
  int d_max = 5;
  int max_iterations = 200;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SearchConfig&) const = default;
};

enum class NodeStatus { Ok, Buggy };
// Baseline: the unmodified starting artifact, when the task has one.
enum class Mode { Baseline, Root, Improve, Debug };

std::string_view to_string(NodeStatus status);
std::string_view to_string(Mode mode);

struct Node {
  std::string id;
  std::optional<std::string> parent_id;
  std::string artifact;
  std::optional<double> metric;  // higher is better; present iff status is Ok
  NodeStatus status = NodeStatus::Buggy;
  std::optional<std::string> bug_report;
  int debug_depth = 0;
  int children = 0;
  Mode mode = Mode::Root;
  int iteration = 0;  // 1-based proposal index
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  std::map<std::string, std::string> columns;  // task metric columns for metrics.csv

  bool ok() const noexcept { return status == NodeStatus::Ok; }
};

struct Proposal {
  std::string artifact;
  std::optional<std::string> bug_report;  // set when the proposal itself is unusable
};

struct Evaluation {
  std::optional<double> metric;
  std::optional<std::string> bug_report;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  std::map<std::string, std::string> columns;
};

class SearchTree {
 public:
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& at(std::size_t i) const { return nodes_.at(i); }
  const Node* find(std::string_view id) const;
  // Highest-metric ok node, older on ties; nullopt when none is ok.
  std::optional<std::size_t> best() const;
  std::size_t root_count() const;

  Node& add(Node node);
  Node& mutable_at(std::size_t i) { return nodes_.at(i); }

 private:
  std::vector<Node> nodes_;
};

class SearchTask {
 public:
  virtual ~SearchTask() = default;

  // Stable description of everything the task's outputs depend on; a resumed
  // run must present the same fingerprint.
  virtual std::string fingerprint() const = 0;
  virtual std::optional<std::string> baseline_artifact() { return std::nullopt; }
  virtual Proposal propose_root(std::size_t index) = 0;
  virtual Proposal propose_child(const Node& parent, Mode mode, const SearchTree& tree) = 0;
  virtual Evaluation evaluate(const std::string& artifact) = 0;
  virtual std::vector<std::string> metric_columns() const { return {}; }
  // Roots are independent, so their proposals may be produced concurrently.
  virtual std::size_t root_workers() const { return 1; }
};

struct Selection {
  std::size_t index = 0;
  Mode mode = Mode::Improve;
};

Selection select_parent(const SearchTree& tree, const SearchConfig& config, Rng& rng);

struct SearchResult {
  Node best;
  SearchTree tree;
  bool stopped_early = false;  // no eligible parent before the budget ran out
};

// With a run_dir the journal is written after every committed node.
SearchResult run_search(SearchTask& task, const SearchConfig& config,
                        const std::optional<std::filesystem::path>& run_dir = std::nullopt);

// Continues the journal in run_dir. Every config field except max_iterations
// must match the journaled one, and so must the task fingerprint.
SearchResult resume_search(const std::filesystem::path& run_dir, SearchTask& task, const SearchConfig& config);

bool journal_exists(const std::filesystem::path& run_dir);

std::string node_id(std::size_t index);

}  // namespace apres
