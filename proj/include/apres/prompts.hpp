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

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apres/corpus.hpp"
#include "apres/gateway.hpp"
#include "apres/rubric.hpp"

namespace apres {

enum class PromptKind { Reviewer, Proposer, Revision, Judge, Unknown };

// Opening of every repair request sent after a failed proposal or edit.
inline constexpr std::string_view kRepairNote = "The previous attempt could not be used.";

// Replaces each {name} placeholder in one left-to-right pass, so substituted
// text is never rescanned. With python_braces, "{{" and "}}" render as single
// braces.
std::string fill_template(std::string_view tmpl, std::span<const std::pair<std::string_view, std::string_view>> values,
                          bool python_braces = false);

std::string_view reviewer_template();
std::string_view proposer_template();
std::string_view revision_template();
std::string_view judge_template();

// Reviewer instructions for the given items. With one item this is the
// single-criterion reviewer prompt; with the full rubric it is the review form
// quoted to the judge.
std::string render_reviewer_prompt(std::span<const RubricItem> items);
// The paper as sent to the reviewer (title line plus rendered sections).
std::string render_paper_message(const Paper& paper);

std::string render_proposer_prompt(const std::string* parent_rubric_text, std::string_view critique);

struct RevisionPromptInput {
  const Rubric* rubric = nullptr;
  std::string_view paper_text;
  std::vector<std::string> protected_headings;
  std::string_view feedback;      // latest reviewer feedback on this draft
  std::string_view failure_note;  // set when repairing a failed edit script
  std::size_t attempt = 0;        // distinguishes sibling requests; 0 omits the line
};
std::string render_revision_prompt(const RevisionPromptInput& input);

struct JudgePromptInput {
  std::string_view review_instruction_form;
  std::string_view paper_a_id, paper_a_text, paper_a_reviews;
  std::string_view paper_b_id, paper_b_text, paper_b_reviews;
};
std::string render_judge_prompt(const JudgePromptInput& input);

PromptKind classify_prompt(const ChatRequest& request);

}  // namespace apres
