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

#include "apres/rubric_search.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "apres/fs_util.hpp"
#include "apres/parallel.hpp"
#include "apres/prompts.hpp"

namespace apres {

namespace {

struct SplitRows {
  DesignMatrix x;
  std::vector<std::int64_t> y;
};

SplitRows rows_for(const std::vector<std::string>& ids, const FeatureTable& table,
                   const std::unordered_map<std::string, std::size_t>& row_of, const Corpus& corpus) {
  SplitRows out;
  out.x.column_keys = table.matrix.column_keys;
  std::vector<Eigen::Index> picked;
  for (const auto& id : ids) {
    const auto it = row_of.find(id);
    if (it == row_of.end()) continue;
    picked.push_back(static_cast<Eigen::Index>(it->second));
    out.y.push_back(corpus.at(id).citations_12mo);
  }
  out.x.values.resize(static_cast<Eigen::Index>(picked.size()), table.matrix.values.cols());
  for (std::size_t r = 0; r < picked.size(); ++r)
    out.x.values.row(static_cast<Eigen::Index>(r)) = table.matrix.values.row(picked[r]);
  return out;
}

double mae_of(const NBModel& model, const SplitRows& rows) {
  if (rows.y.empty()) return 0.0;
  const Eigen::VectorXd pred = predict(model, rows.x.values);
  const auto truth = to_doubles(rows.y);
  return mae(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())), truth);
}

std::string weakest_items(const NBModel& model, std::size_t count) {
  std::vector<std::pair<double, std::string>> order;
  for (std::size_t i = 0; i < model.column_keys.size(); ++i)
    order.emplace_back(std::abs(model.coefficients(static_cast<Eigen::Index>(i))), model.column_keys[i]);
  std::sort(order.begin(), order.end());
  std::string out;
  for (std::size_t i = 0; i < std::min(count, order.size()); ++i)
    out += fmt::format("{}{} ({:.3f})", i ? ", " : "", order[i].second, order[i].first);
  return out;
}

}  // namespace

RubricEvaluation evaluate_rubric(const Rubric& rubric, const Corpus& corpus, const CorpusSplit& split,
                                 Gateway& gateway, const RubricSearchOptions& options) {
  std::vector<const Paper*> papers;
  for (auto name : {SplitName::Train, SplitName::Validation, SplitName::Test})
    for (const auto& id : split.ids(name)) papers.push_back(&corpus.at(id));

  std::vector<std::optional<ScoreVector>> scored(papers.size());
  std::vector<std::string> failures(papers.size());
  parallel_for(papers.size(), options.paper_workers, [&](std::size_t i) {
    try {
      scored[i] = score_paper(rubric, *papers[i], gateway, options.scoring);
    } catch (const RubricError& e) {
      if (e.code() == RubricErrc::GatewayFailure) throw;
      failures[i] = e.what();
    }
  });

  RubricEvaluation ev;
  std::string first_failure;
  for (std::size_t i = 0; i < papers.size(); ++i) {
    if (scored[i]) {
      ev.vectors.push_back(std::move(*scored[i]));
    } else {
      if (first_failure.empty()) first_failure = failures[i];
      ++ev.scoring_failures;
    }
  }
  if (static_cast<double>(ev.scoring_failures) > options.max_failure_fraction * static_cast<double>(papers.size()))
    throw RubricError(RubricErrc::MissingScore,
                      fmt::format("scoring failed on {} of {} papers (first: {})", ev.scoring_failures, papers.size(),
                                  first_failure));

  const FeatureTable table = features(rubric, ev.vectors);
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < table.paper_ids.size(); ++r) row_of[table.paper_ids[r]] = r;
  const SplitRows train = rows_for(split.train, table, row_of, corpus);
  const SplitRows val = rows_for(split.validation, table, row_of, corpus);
  const SplitRows test = rows_for(split.test, table, row_of, corpus);

  ev.grid = grid_search(train.x, train.y, val.x, val.y, options.lambda_grid);
  ev.validation_mae = ev.grid.validation_mae;
  ev.test_mae = mae_of(ev.grid.best.model, test);
  const NBModel baseline = constant_baseline(train.y, rubric.items.size());
  ev.baseline_validation_mae = mae_of(baseline, val);
  ev.baseline_test_mae = mae_of(baseline, test);
  return ev;
}

RubricSearchTask::RubricSearchTask(const Corpus& corpus, CorpusSplit split, Gateway& gateway,
                                   RubricSearchOptions options, Rubric seed)
    : corpus_(corpus), split_(std::move(split)), gateway_(gateway), options_(std::move(options)),
      seed_(std::move(seed)) {
  seed_.validate();
}

std::string RubricSearchTask::fingerprint() const {
  std::string material;
  for (auto name : {SplitName::Train, SplitName::Validation, SplitName::Test}) {
    for (const auto& id : split_.ids(name)) material += paper_to_line(corpus_.at(id)) + "\n";
    material += "--\n";
  }
  for (double l : options_.lambda_grid) material += fmt::format("{};", l);
  material += "\n" + render_rubric_text(seed_) + gateway_.provider().id() + "\n" + gateway_.config().model;
  return "rubric-search:" + sha256_hex(material);
}

Proposal RubricSearchTask::propose(const Rubric* parent, const std::string& critique,
                                   std::optional<std::string> parent_id) {
  ProposerOptions opts = options_.proposer;
  opts.parent_id = std::move(parent_id);
  const std::string reply = gateway_.complete(proposal_request(parent, critique, gateway_, opts)).text;
  try {
    Rubric r = parse_rubric_text(reply, Provenance::Proposed);
    return {render_rubric_text(r), std::nullopt};
  } catch (const RubricError& e) {
    return {reply, e.what()};
  }
}

Proposal RubricSearchTask::propose_root(std::size_t index) {
  return propose(&seed_, fmt::format("Proposal {} of the initial set. Extend or reshape the rubric so its scores "
                                     "track how often a paper will be cited.",
                                     index + 1),
                 std::nullopt);
}

Proposal RubricSearchTask::propose_child(const Node& parent, Mode mode, const SearchTree& tree) {
  const std::size_t attempt = static_cast<std::size_t>(parent.children) + 1;
  if (mode == Mode::Debug) {
    // Repair against the nearest usable ancestor, or the seed when none.
    const Node* base = nullptr;
    for (const Node* n = &parent; n != nullptr; n = n->parent_id ? tree.find(*n->parent_id) : nullptr)
      if (n->ok()) {
        base = n;
        break;
      }
    const Rubric fallback = base ? parse_rubric_text(base->artifact) : seed_;
    const std::string critique =
        fmt::format("{} Repair attempt {}. It failed with: {}\nRejected output:\n{}", kRepairNote, attempt,
                    parent.bug_report.value_or("unknown error"), parent.artifact);
    return propose(&fallback, critique, parent.id);
  }
  const Rubric current = parse_rubric_text(parent.artifact);
  std::string critique = fmt::format("Refinement attempt {}.", attempt);
  if (parent.details.contains("val_mae")) {
    critique += fmt::format(
        " This rubric reaches a validation MAE of {:.4f} citations against {:.4f} for a constant predictor.",
        parent.details["val_mae"].get<double>(), parent.details["baseline_val_mae"].get<double>());
    if (parent.details.contains("model"))
      critique += fmt::format(" Items with the weakest regression weight: {}.",
                              weakest_items(model_from_json(parent.details["model"]), 3));
  }
  critique += " Revise the rubric so its scores predict citations more accurately.";
  return propose(&current, critique, parent.id);
}

Evaluation RubricSearchTask::evaluate(const std::string& artifact) {
  Evaluation ev;
  Rubric rubric;
  try {
    rubric = parse_rubric_text(artifact);
  } catch (const RubricError& e) {
    ev.bug_report = e.what();
    return ev;
  }
  RubricEvaluation r;
  try {
    r = evaluate_rubric(rubric, corpus_, split_, gateway_, options_);
  } catch (const RubricError& e) {
    if (e.code() == RubricErrc::GatewayFailure) throw;
    ev.bug_report = e.what();
    return ev;
  } catch (const RegressionError& e) {
    ev.bug_report = e.what();
    return ev;
  }
  ev.metric = -r.validation_mae;
  ev.details["items"] = rubric.items.size();
  ev.details["lambda"] = r.grid.best_lambda;
  ev.details["val_mae"] = r.validation_mae;
  ev.details["test_mae"] = r.test_mae;
  ev.details["baseline_val_mae"] = r.baseline_validation_mae;
  ev.details["baseline_test_mae"] = r.baseline_test_mae;
  ev.details["scoring_failures"] = r.scoring_failures;
  ev.details["model"] = model_to_json(r.grid.best.model);
  ev.columns["items"] = fmt::format("{}", rubric.items.size());
  ev.columns["lambda"] = fmt::format("{}", r.grid.best_lambda);
  ev.columns["val_mae"] = fmt::format("{}", r.validation_mae);
  ev.columns["test_mae"] = fmt::format("{}", r.test_mae);
  ev.columns["baseline_val_mae"] = fmt::format("{}", r.baseline_validation_mae);
  return ev;
}

RubricSearchResult run_rubric_search(const Corpus& corpus, const CorpusSplit& split, const SearchConfig& config,
                                     Gateway& gateway, const RubricSearchOptions& options) {
  RubricSearchTask task(corpus, split, gateway, options);
  const SearchResult result = options.resume && options.run_dir && journal_exists(*options.run_dir)
                                  ? resume_search(*options.run_dir, task, config)
                                  : run_search(task, config, options.run_dir);
  RubricSearchResult out;
  out.best = parse_rubric_text(result.best.artifact, Provenance::Discovered);
  out.best.parent_id = result.best.parent_id;
  out.best_node_id = result.best.id;
  const auto& d = result.best.details;
  out.validation_mae = d["val_mae"].get<double>();
  out.test_mae = d["test_mae"].get<double>();
  out.baseline_validation_mae = d["baseline_val_mae"].get<double>();
  out.baseline_test_mae = d["baseline_test_mae"].get<double>();
  out.lambda = d["lambda"].get<double>();
  out.nodes = result.tree.size();
  out.stopped_early = result.stopped_early;
  return out;
}

}  // namespace apres
