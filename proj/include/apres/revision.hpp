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
#include <string_view>
#include <vector>

#include "apres/corpus.hpp"
#include "apres/error.hpp"
#include "apres/gateway.hpp"
#include "apres/rubric.hpp"
#include "apres/search.hpp"

namespace apres {

enum class RevisionErrc {
  UnterminatedBlock,
  EmptySearch,
  NoBlocks,
  TooManyBlocks,
  NoOpBlock,
  SearchNotFound,
  AmbiguousMatch,
  ProtectedRegionEdit,
  StructuralEdit,
  Empty,
  RevisionFailed,
};
constexpr std::string_view module_name(RevisionErrc) { return "revision"; }
using RevisionError = ModuleError<RevisionErrc>;

inline constexpr std::size_t kMaxEditBlocks = 64;

// Sections plus their rendered text; immutable once built.
class Document {
 public:
  Document() = default;
  explicit Document(std::vector<Section> sections);

  const std::vector<Section>& sections() const noexcept { return sections_; }
  const std::string& full_text() const noexcept { return full_text_; }
  const std::vector<SectionLayout>& layout() const noexcept { return layout_; }

  bool operator==(const Document& other) const { return sections_ == other.sections_; }

 private:
  std::vector<Section> sections_;
  std::string full_text_;
  std::vector<SectionLayout> layout_;
};

struct EditBlock {
  std::string search;
  std::string replace;
  bool operator==(const EditBlock&) const = default;
};

struct EditScript {
  std::vector<EditBlock> blocks;
  bool operator==(const EditScript&) const = default;
};

EditScript parse_edit_script(std::string_view text);
std::string render_edit_script(const EditScript& script);

// Occurrences of needle in haystack, overlapping ones included.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

Document apply_edits(const Document& doc, const EditScript& script);

double overall_score(const ScoreVector& v);
double improvement(double s_ori, double s_rev);

struct RevisionState {
  std::string paper_id;
  double s_ori = 0;
  double s_rev = 0;
  double delta_s = 0;
  Document best_draft;
  std::string best_node_id;
  std::size_t nodes = 0;
  bool stopped_early = false;
};

struct RevisionOptions {
  ScoringOptions scoring;
  int max_tokens = 8192;
  std::optional<std::filesystem::path> run_dir;
  bool resume = false;  // continue the journal in run_dir when one exists
};

// Search task over drafts of one paper; the unmodified paper is the baseline.
class RevisionTask : public SearchTask {
 public:
  RevisionTask(Paper paper, Rubric rubric, Gateway& gateway, RevisionOptions options);

  std::string fingerprint() const override;
  std::optional<std::string> baseline_artifact() override;
  Proposal propose_root(std::size_t index) override;
  Proposal propose_child(const Node& parent, Mode mode, const SearchTree& tree) override;
  Evaluation evaluate(const std::string& artifact) override;
  std::vector<std::string> metric_columns() const override { return {"score"}; }
  std::size_t root_workers() const override { return 1; }

  const Paper& original() const noexcept { return paper_; }

 private:
  Proposal revise(const Paper& draft, std::string_view feedback, std::string_view failure, std::size_t attempt);
  std::string feedback_for(const Paper& draft);

  Paper paper_;
  Rubric rubric_;
  Gateway& gateway_;
  RevisionOptions options_;
  std::vector<std::string> protected_headings_;
};

RevisionState run_revision(const Paper& paper, const Rubric& rubric, const SearchConfig& config, Gateway& gateway,
                           const RevisionOptions& options = {});

Paper paper_with_document(const Paper& paper, const Document& doc);

}  // namespace apres
