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

#include "apres/search.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "apres/fs_util.hpp"
#include "apres/parallel.hpp"

namespace apres {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kJournalVersion = 1;

Mode mode_from(std::string_view s) {
  for (Mode m : {Mode::Baseline, Mode::Root, Mode::Improve, Mode::Debug})
    if (to_string(m) == s) return m;
  throw SearchError(SearchErrc::CorruptJournal, fmt::format("unknown node mode '{}'", s));
}

ojson config_to_json(const SearchConfig& c, std::string_view fingerprint) {
  return {{"n0", c.n0},           {"n", c.n},
          {"p_debug", c.p_debug}, {"d_max", c.d_max},
          {"max_iterations", c.max_iterations}, {"seed", c.seed},
          {"task", fingerprint}};
}

ojson eval_to_json(const Node& node) {
  ojson columns = ojson::object();
  for (const auto& [k, v] : node.columns) columns[k] = v;
  return {{"status", to_string(node.status)},
          {"metric", node.metric ? ojson(*node.metric) : ojson(nullptr)},
          {"bug_report", node.bug_report ? ojson(*node.bug_report) : ojson(nullptr)},
          {"details", node.details},
          {"columns", columns}};
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class Journal {
 public:
  Journal(std::optional<fs::path> dir, const SearchConfig& config, std::string fingerprint,
          std::vector<std::string> columns)
      : dir_(std::move(dir)), config_(config), fingerprint_(std::move(fingerprint)), columns_(std::move(columns)) {}

  void commit(const SearchTree& tree, const Node& node, const Rng& rng) {
    if (!dir_) return;
    const fs::path node_dir = *dir_ / "nodes" / node.id;
    atomic_write(node_dir / "artifact", node.artifact);
    atomic_write(node_dir / "eval", eval_to_json(node).dump(2) + "\n");
    write_tree(tree, rng);
  }

  void write_tree(const SearchTree& tree, const Rng& rng) const {
    if (!dir_) return;
    ojson nodes = ojson::array();
    ojson edges = ojson::array();
    for (const auto& n : tree.nodes()) {
      nodes.push_back({{"id", n.id},
                       {"parent_id", n.parent_id ? ojson(*n.parent_id) : ojson(nullptr)},
                       {"mode", to_string(n.mode)},
                       {"iteration", n.iteration},
                       {"status", to_string(n.status)},
                       {"metric", n.metric ? ojson(*n.metric) : ojson(nullptr)},
                       {"debug_depth", n.debug_depth},
                       {"children", n.children}});
      if (n.parent_id) edges.push_back(ojson::array({*n.parent_id, n.id}));
    }
    const auto best = tree.best();
    const ojson doc = {{"version", kJournalVersion},
                       {"config", config_to_json(config_, fingerprint_)},
                       {"rng_state", rng.save_state()},
                       {"nodes", nodes},
                       {"edges", edges},
                       {"best_id", best ? ojson(tree.at(*best).id) : ojson(nullptr)}};
    atomic_write(*dir_ / "tree.json", doc.dump(2) + "\n");
    write_metrics(tree);
  }

 private:
  void write_metrics(const SearchTree& tree) const {
    std::string out = "iteration,node_id,parent_id,mode,status,metric,best_metric";
    for (const auto& c : columns_) out += "," + csv_field(c);
    out += '\n';
    std::optional<double> best;
    for (const auto& n : tree.nodes()) {
      if (n.metric && (!best || *n.metric > *best)) best = n.metric;
      out += fmt::format("{},{},{},{},{},{},{}", n.iteration, n.id, n.parent_id.value_or(""), to_string(n.mode),
                         to_string(n.status), n.metric ? fmt::format("{}", *n.metric) : "",
                         best ? fmt::format("{}", *best) : "");
      for (const auto& c : columns_) {
        const auto it = n.columns.find(c);
        out += "," + csv_field(it == n.columns.end() ? "" : it->second);
      }
      out += '\n';
    }
    atomic_write(*dir_ / "metrics.csv", out);
  }

  std::optional<fs::path> dir_;
  SearchConfig config_;
  std::string fingerprint_;
  std::vector<std::string> columns_;
};

void apply_evaluation(Node& node, Evaluation eval) {
  if (eval.metric && !std::isfinite(*eval.metric)) {
    eval.bug_report = fmt::format("non-finite metric {}", *eval.metric);
    eval.metric.reset();
  }
  if (eval.metric && !eval.bug_report) {
    node.status = NodeStatus::Ok;
    node.metric = eval.metric;
    node.bug_report.reset();
  } else {
    node.status = NodeStatus::Buggy;
    node.metric.reset();
    node.bug_report = eval.bug_report.value_or("evaluation produced no metric");
  }
  node.details = std::move(eval.details);
  node.columns = std::move(eval.columns);
}

template <typename Fn>
auto guarded(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw SearchError(SearchErrc::TaskFailure, fmt::format("task failed: {}", e.what()));
  }
}

// Proposal plus evaluation for one new node; pure with respect to the tree.
Node realize(SearchTask& task, Proposal proposal, Node node) {
  node.artifact = std::move(proposal.artifact);
  if (proposal.bug_report) {
    node.status = NodeStatus::Buggy;
    node.bug_report = std::move(proposal.bug_report);
    return node;
  }
  apply_evaluation(node, guarded([&] { return task.evaluate(node.artifact); }));
  return node;
}

struct Loop {
  SearchTask& task;
  const SearchConfig& config;
  SearchTree& tree;
  Rng& rng;
  Journal& journal;

  void commit(Node node) {
    if (node.parent_id) {
      for (std::size_t i = 0; i < tree.size(); ++i)
        if (tree.at(i).id == *node.parent_id) ++tree.mutable_at(i).children;
    }
    const Node& added = tree.add(std::move(node));
    journal.commit(tree, added, rng);
  }

  bool has_baseline() const { return !tree.nodes().empty() && tree.at(0).mode == Mode::Baseline; }

  // Returns false when the search stopped for lack of an eligible parent.
  bool run() {
    const auto max_nodes = static_cast<std::size_t>(config.max_iterations);
    if (tree.size() == 0 && max_nodes > 0) {
      if (auto base = guarded([&] { return task.baseline_artifact(); })) {
        Node node;
        node.id = node_id(0);
        node.mode = Mode::Baseline;
        node.iteration = 1;
        commit(realize(task, Proposal{std::move(*base), std::nullopt}, std::move(node)));
      }
    }
    const std::size_t offset = has_baseline() ? 1 : 0;
    const std::size_t roots_done = tree.size() - offset;
    if (roots_done < static_cast<std::size_t>(config.n0) && tree.size() < max_nodes) {
      const std::size_t total = std::min<std::size_t>(static_cast<std::size_t>(config.n0), max_nodes - offset);
      const std::size_t pending = total > roots_done ? total - roots_done : 0;
      std::vector<Node> made(pending);
      parallel_for(pending, task.root_workers(), [&](std::size_t k) {
        const std::size_t r = roots_done + k;
        Node node;
        node.id = node_id(offset + r);
        node.mode = Mode::Root;
        node.iteration = static_cast<int>(offset + r + 1);
        made[k] = realize(task, guarded([&] { return task.propose_root(r); }), std::move(node));
      });
      for (auto& node : made) commit(std::move(node));
    }
    while (tree.size() < max_nodes) {
      Selection sel;
      try {
        sel = select_parent(tree, config, rng);
      } catch (const SearchError& e) {
        if (e.code() != SearchErrc::NoEligibleParent) throw;
        return false;
      }
      const Node parent = tree.at(sel.index);
      Node node;
      node.id = node_id(tree.size());
      node.parent_id = parent.id;
      node.mode = sel.mode;
      node.iteration = static_cast<int>(tree.size() + 1);
      node.debug_depth = sel.mode == Mode::Debug ? parent.debug_depth + 1 : 0;
      Proposal proposal = guarded([&] { return task.propose_child(parent, sel.mode, tree); });
      commit(realize(task, std::move(proposal), std::move(node)));
    }
    return true;
  }
};

SearchResult finish(SearchTree tree, bool completed) {
  const auto best = tree.best();
  if (!best) throw SearchError(SearchErrc::NoValidNode, "no node evaluated successfully");
  SearchResult result;
  result.best = tree.at(*best);
  result.tree = std::move(tree);
  result.stopped_early = !completed;
  return result;
}

[[noreturn]] void corrupt(const std::string& why) {
  throw SearchError(SearchErrc::CorruptJournal, "corrupt journal: " + why);
}

}  // namespace

void SearchConfig::validate() const {
  auto bad = [](const std::string& why) { throw SearchError(SearchErrc::InvalidConfig, why); };
  if (n0 < 1) bad(fmt::format("n0 must be >= 1, got {}", n0));
  if (n < 1) bad(fmt::format("n must be >= 1, got {}", n));
  if (!(p_debug >= 0.0 && p_debug <= 1.0)) bad(fmt::format("p_debug must lie in [0, 1], got {}", p_debug));
  if (d_max < 0) bad(fmt::format("d_max must be >= 0, got {}", d_max));
  if (max_iterations < 1) bad(fmt::format("max_iterations must be >= 1, got {}", max_iterations));
}

std::string_view to_string(NodeStatus status) { return status == NodeStatus::Ok ? "ok" : "buggy"; }

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Baseline: return "baseline";
    case Mode::Root: return "root";
    case Mode::Improve: return "improve";
    case Mode::Debug: return "debug";
  }
  return "root";
}

std::string node_id(std::size_t index) { return fmt::format("{:04d}", index); }

const Node* SearchTree::find(std::string_view id) const {
  for (const auto& n : nodes_)
    if (n.id == id) return &n;
  return nullptr;
}

std::optional<std::size_t> SearchTree::best() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].ok() && (!best || *nodes_[i].metric > *nodes_[*best].metric)) best = i;
  return best;
}

std::size_t SearchTree::root_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.mode == Mode::Root; }));
}

Node& SearchTree::add(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.back();
}

Selection select_parent(const SearchTree& tree, const SearchConfig& config, Rng& rng) {
  if (tree.size() == 0) throw SearchError(SearchErrc::NoEligibleParent, "empty search tree");
  std::vector<std::size_t> debuggable;
  std::optional<std::size_t> improvable;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const Node& n = tree.at(i);
    if (n.children >= config.n) continue;
    if (!n.ok() && n.debug_depth < config.d_max) debuggable.push_back(i);
    if (n.ok() && (!improvable || *n.metric > *tree.at(*improvable).metric)) improvable = i;
  }
  const bool want_debug = rng.uniform01() < config.p_debug;
  auto pick_debug = [&] { return Selection{debuggable[rng.uniform_index(debuggable.size())], Mode::Debug}; };
  if (want_debug && !debuggable.empty()) return pick_debug();
  if (improvable) return Selection{*improvable, Mode::Improve};
  if (!debuggable.empty()) return pick_debug();
  throw SearchError(SearchErrc::NoEligibleParent, "every node is saturated or at the debug cap");
}

SearchResult run_search(SearchTask& task, const SearchConfig& config, const std::optional<fs::path>& run_dir) {
  config.validate();
  SearchTree tree;
  Rng rng(config.seed);
  Journal journal(run_dir, config, task.fingerprint(), task.metric_columns());
  Loop loop{task, config, tree, rng, journal};
  const bool completed = loop.run();
  return finish(std::move(tree), completed);
}

bool journal_exists(const fs::path& run_dir) { return fs::exists(run_dir / "tree.json"); }

SearchResult resume_search(const fs::path& run_dir, SearchTask& task, const SearchConfig& config) {
  config.validate();
  const auto text = read_file(run_dir / "tree.json");
  if (!text) corrupt(fmt::format("{} is missing", (run_dir / "tree.json").string()));
  ojson doc;
  try {
    doc = ojson::parse(*text);
  } catch (const nlohmann::json::exception& e) {
    corrupt(fmt::format("tree.json does not parse: {}", e.what()));
  }

  SearchTree tree;
  Rng rng;
  try {
    if (doc.at("version").get<int>() != kJournalVersion) corrupt("unsupported journal version");
    const auto& c = doc.at("config");
    SearchConfig saved{c.at("n0").get<int>(),      c.at("n").get<int>(),
                       c.at("p_debug").get<double>(), c.at("d_max").get<int>(),
                       c.at("max_iterations").get<int>(), c.at("seed").get<std::uint64_t>()};
    SearchConfig compare = config;
    compare.max_iterations = saved.max_iterations;
    if (!(compare == saved))
      throw SearchError(SearchErrc::RejectedConfigMismatch,
                        fmt::format("journal config {} does not match the requested one", c.dump()));
    if (c.at("task").get<std::string>() != task.fingerprint())
      throw SearchError(SearchErrc::RejectedConfigMismatch, "journal was written for a different task setup");

    std::map<std::string, int> child_counts;
    std::set<std::string> seen;
    const auto& nodes = doc.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& j = nodes[i];
      Node n;
      n.id = j.at("id").get<std::string>();
      if (n.id != node_id(i)) corrupt(fmt::format("node {} has id '{}'", i, n.id));
      if (!j.at("parent_id").is_null()) {
        n.parent_id = j.at("parent_id").get<std::string>();
        if (!seen.contains(*n.parent_id))
          corrupt(fmt::format("node {} references missing parent {}", n.id, *n.parent_id));
        ++child_counts[*n.parent_id];
      }
      n.mode = mode_from(j.at("mode").get<std::string>());
      if ((n.mode == Mode::Baseline || n.mode == Mode::Root) == n.parent_id.has_value())
        corrupt(fmt::format("node {} parentage does not fit mode {}", n.id, to_string(n.mode)));
      if (n.mode == Mode::Baseline && i != 0) corrupt("baseline node is not first");
      n.iteration = j.at("iteration").get<int>();
      if (n.iteration != static_cast<int>(i + 1)) corrupt(fmt::format("node {} has iteration {}", n.id, n.iteration));
      n.debug_depth = j.at("debug_depth").get<int>();
      n.children = j.at("children").get<int>();

      const fs::path node_dir = run_dir / "nodes" / n.id;
      auto artifact = read_file(node_dir / "artifact");
      auto eval_text = read_file(node_dir / "eval");
      if (!artifact || !eval_text) corrupt(fmt::format("files of node {} are missing", n.id));
      n.artifact = std::move(*artifact);
      const ojson ev = ojson::parse(*eval_text);
      n.status = ev.at("status").get<std::string>() == "ok" ? NodeStatus::Ok : NodeStatus::Buggy;
      if (to_string(n.status) != j.at("status").get<std::string>())
        corrupt(fmt::format("status of node {} disagrees with its eval file", n.id));
      if (!ev.at("metric").is_null()) n.metric = ev.at("metric").get<double>();
      if (n.ok() != n.metric.has_value()) corrupt(fmt::format("node {} status and metric disagree", n.id));
      if (!j.at("metric").is_null() && (!n.metric || j.at("metric").get<double>() != *n.metric))
        corrupt(fmt::format("metric of node {} disagrees with its eval file", n.id));
      if (!ev.at("bug_report").is_null()) n.bug_report = ev.at("bug_report").get<std::string>();
      n.details = ev.at("details");
      for (const auto& [k, v] : ev.at("columns").items()) n.columns[k] = v.get<std::string>();
      if (n.debug_depth < 0 || n.debug_depth > config.d_max)
        corrupt(fmt::format("node {} has debug depth {}", n.id, n.debug_depth));
      if (n.parent_id) {
        const Node* parent = tree.find(*n.parent_id);
        const int expect = n.mode == Mode::Debug ? parent->debug_depth + 1 : 0;
        if (n.debug_depth != expect) corrupt(fmt::format("node {} debug depth does not follow its parent", n.id));
      }
      seen.insert(n.id);
      tree.add(std::move(n));
    }
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const auto it = child_counts.find(tree.at(i).id);
      if (tree.at(i).children != (it == child_counts.end() ? 0 : it->second))
        corrupt(fmt::format("child count of node {} does not match its edges", tree.at(i).id));
    }
    rng.restore_state(doc.at("rng_state").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    corrupt(e.what());
  } catch (const SearchError&) {
    throw;
  } catch (const std::exception& e) {
    corrupt(e.what());
  }

  Journal journal(run_dir, config, task.fingerprint(), task.metric_columns());
  journal.write_tree(tree, rng);
  Loop loop{task, config, tree, rng, journal};
  const bool completed = loop.run();
  return finish(std::move(tree), completed);
}

}  // namespace apres
