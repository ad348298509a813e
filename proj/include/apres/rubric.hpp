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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apres/corpus.hpp"
#include "apres/error.hpp"
#include "apres/gateway.hpp"
#include "apres/nb_regression.hpp"
#include "json.hpp"

namespace apres {

enum class RubricErrc {
  InvalidItem,
  DuplicateKey,
  TooManyItems,
  EmptyRubric,
  MalformedProposal,
  GuidelineMissing,
  ScoreOutOfRange,
  MissingScore,
  GatewayFailure,
  KeyMismatch,
  EmptyPaper,
};
constexpr std::string_view module_name(RubricErrc) { return "rubric"; }
using RubricError = ModuleError<RubricErrc>;

inline constexpr std::size_t kMaxRubricItems = 128;

struct RubricItem {
  std::string key;  // ^[a-z][a-z0-9_]*$
  std::string question;
  std::string guideline_0;
  std::string guideline_5;
  std::string guideline_10;

  void validate() const;
  bool operator==(const RubricItem&) const = default;
};

enum class Provenance { Seed, Proposed, Discovered };
std::string_view to_string(Provenance provenance);

struct Rubric {
  std::vector<RubricItem> items;
  Provenance provenance = Provenance::Proposed;
  std::optional<std::string> parent_id;

  void validate() const;
  std::vector<std::string> keys() const;
  bool operator==(const Rubric&) const = default;
};

// Per-paper rubric scores. Keys equal the rubric's key set; scores in [0, 10].
struct ScoreVector {
  std::string paper_id;
  std::map<std::string, double> scores;
  std::map<std::string, std::string> feedback;

  bool operator==(const ScoreVector&) const = default;
};

// Two-section text form mirroring proposer output:
//   EVALUATION_RUBRIC = {...}
//   SCORING_GUIDELINES = {...}
std::string render_evaluation_block(const Rubric& rubric);
std::string render_guidelines_block(const Rubric& rubric);
std::string render_rubric_text(const Rubric& rubric);

// Reads the two dictionaries from proposer output or a rubric file. A
// ```python fence is used when present; otherwise the whole text is scanned.
Rubric parse_rubric_text(std::string_view text, Provenance provenance = Provenance::Proposed);

// Canonical structured export: [{key, question, g0, g5, g10}, ...]
nlohmann::ordered_json rubric_to_json(const Rubric& rubric);
Rubric rubric_from_json(const nlohmann::ordered_json& j, Provenance provenance = Provenance::Proposed);

// Loads either form; JSON is recognized by a leading '['.
Rubric load_rubric(const std::filesystem::path& path, Provenance provenance = Provenance::Discovered);
void save_rubric(const std::filesystem::path& path, const Rubric& rubric);

// Four-item starting rubric (clarity, correctness, contribution and impact,
// presentation and style) from which the search's first proposals branch.
Rubric seed_rubric();

struct ProposerOptions {
  int max_tokens = 8192;
  std::optional<std::string> parent_id;  // search-tree id of the parent artifact
};

// Proposer request; with a parent the current rubric and the critique are
// appended after the template.
ChatRequest proposal_request(const Rubric* parent, std::string_view critique, const Gateway& gateway,
                             const ProposerOptions& options = {});
Rubric propose_rubric(const Rubric* parent, std::string_view critique, Gateway& gateway,
                      const ProposerOptions& options = {});

struct ScoringOptions {
  std::size_t workers = 4;
  int max_tokens = 1024;
  double temperature = 0.0;
};

// One reviewer call per rubric item, merged by key. A missing or
// out-of-range score is re-asked once before the error is raised.
ScoreVector score_paper(const Rubric& rubric, const Paper& paper, Gateway& gateway,
                        const ScoringOptions& options = {});

struct FeatureTable {
  DesignMatrix matrix;
  std::vector<std::string> paper_ids;
};

// Rows in vector order, columns in rubric item order, values unscaled.
FeatureTable features(const Rubric& rubric, std::span<const ScoreVector> vectors);

nlohmann::ordered_json score_vector_to_json(const ScoreVector& v);
ScoreVector score_vector_from_json(const nlohmann::ordered_json& j);

// Review text shown to the pairwise judge.
std::string render_reviews(const Rubric& rubric, const ScoreVector& v);

}  // namespace apres
