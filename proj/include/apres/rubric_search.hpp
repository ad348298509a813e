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
#include <optional>
#include <string>
#include <vector>

#include "apres/corpus.hpp"
#include "apres/gateway.hpp"
#include "apres/nb_regression.hpp"
#include "apres/rubric.hpp"
#include "apres/search.hpp"

namespace apres {

struct RubricSearchOptions {
  std::vector<double> lambda_grid = default_lambda_grid();
  ScoringOptions scoring{.workers = 1};
  ProposerOptions proposer;
  std::size_t paper_workers = 4;
  double max_failure_fraction = 0.10;  // scoring failures tolerated before a rubric is buggy
  std::optional<std::filesystem::path> run_dir;
  bool resume = false;
};

// Per-rubric evaluation: scores every paper, fits the regression on the
// training split and reports MAE on validation and test.
struct RubricEvaluation {
  GridSearchResult grid;
  double validation_mae = 0;
  double test_mae = 0;
  double baseline_validation_mae = 0;
  double baseline_test_mae = 0;
  std::size_t scoring_failures = 0;
  std::vector<ScoreVector> vectors;
};

RubricEvaluation evaluate_rubric(const Rubric& rubric, const Corpus& corpus, const CorpusSplit& split,
                                 Gateway& gateway, const RubricSearchOptions& options);

class RubricSearchTask : public SearchTask {
 public:
  RubricSearchTask(const Corpus& corpus, CorpusSplit split, Gateway& gateway, RubricSearchOptions options,
                   Rubric seed = seed_rubric());

  std::string fingerprint() const override;
  Proposal propose_root(std::size_t index) override;
  Proposal propose_child(const Node& parent, Mode mode, const SearchTree& tree) override;
  Evaluation evaluate(const std::string& artifact) override;
  std::vector<std::string> metric_columns() const override {
    return {"items", "lambda", "val_mae", "test_mae", "baseline_val_mae"};
  }

 private:
  Proposal propose(const Rubric* parent, const std::string& critique, std::optional<std::string> parent_id);

  const Corpus& corpus_;
  CorpusSplit split_;
  Gateway& gateway_;
  RubricSearchOptions options_;
  Rubric seed_;
};

struct RubricSearchResult {
  Rubric best;
  std::string best_node_id;
  double validation_mae = 0;
  double test_mae = 0;
  double baseline_validation_mae = 0;
  double baseline_test_mae = 0;
  double lambda = 0;
  std::size_t nodes = 0;
  bool stopped_early = false;
};

RubricSearchResult run_rubric_search(const Corpus& corpus, const CorpusSplit& split, const SearchConfig& config,
                                     Gateway& gateway, const RubricSearchOptions& options = {});

}  // namespace apres
