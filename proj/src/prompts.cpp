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

#include "apres/prompts.hpp"

#include <fmt/format.h>

namespace apres {

namespace {

constexpr std::string_view kReviewerHead =
    "You are reviewing a paper for a top-tier, highly selective academic conference.\n"
    "Please evaluate the following paper according to these criteria with their scoring guidelines:\n"
    "\n";

constexpr std::string_view kReviewerCriterion =
    "**{rubric_item}**: {Rubric item description}.\n"
    "  Score 0: {Score 0 guideline}\n"
    "  Score 5: {Score 5 guideline}\n"
    "  Score 10: {Score 10 guideline}\n";

constexpr std::string_view kReviewerMiddle =
    "\n"
    "Given the highly selective nature of this top conference,\n"
    "please apply rigorous standards in your evaluation.\n"
    "Only exceptional work should receive scores of 8-10,\n"
    "while work with significant flaws should receive lower scores.\n"
    "\n"
    "Please provide your response in the following JSON format\n"
    "wrapped in ```json ``` tags:\n"
    "```json\n"
    "{\n";

constexpr std::string_view kReviewerJsonLine =
    "  \"{rubric_item}\": {\"score\": <0-10>, \"feedback\": \"<detailed feedback>\"},\n";

constexpr std::string_view kReviewerTail =
    "}\n"
    "```";

constexpr std::string_view kProposerTemplate =
    "You are an expert in research evaluation. \n"
    "Your task is to propose a set of evaluation rubrics designed \n"
    "to predict the future citation count of a research paper.\n"
    "\n"
    "Your output must be two Python dictionaries: \n"
    "`EVALUATION_RUBRIC` and `SCORING_GUIDELINES`.\n"
    "\n"
    "1.  `EVALUATION_RUBRIC`: Keys should be short, snake_case strings \n"
    "(e.g., `novelty`), and values should be a clear question defining the criterion.\n"
    "\n"
    "2.  `SCORING_GUIDELINES`: Keys must match those in `EVALUATION_RUBRIC`. \n"
    "Values should be a nested dictionary using a 0-5-10 scoring scale \n"
    "(0=poor, 5=average, 10=exceptional) with a brief, clear description for each score.\n"
    "\n"
    "The rubrics should focus on factors that make a paper influential and highly cited.\n"
    "\n"
    "Example Format:\n"
    "```python\n"
    "EVALUATION_RUBRIC = {\n"
    "    \"clarity\": \"Is the paper's writing and structure exceptionally clear?\",\n"
    "}\n"
    "\n"
    "SCORING_GUIDELINES = {\n"
    "    \"clarity\": {\n"
    "        0: \"The paper is confusing or unintelligible.\",\n"
    "        5: \"The paper is understandable but lacks precision.\",\n"
    "        10: \"The paper is exceptionally clear and unambiguous.\"\n"
    "    },\n"
    "}\n"
    "Please generate the complete EVALUATION_RUBRIC and SCORING_GUIDELINES dictionaries.";

constexpr std::string_view kRevisionTemplate =
    "You are an expert academic editor. \n"
    "Your goal is to rewrite the paper provided below to achieve a higher score based on \n"
    "the given evaluation rubrics.\n"
    "\n"
    "**Instructions:**\n"
    "1.  Work section-by-section (e.g., Abstract, Introduction, etc.).\n"
    "2.  For each section, first briefly list the key weaknesses you are fixing by referencing \n"
    "the `rubric_item_key`.\n"
    "3.  Then, provide the improved, rewritten version of that section.\n"
    "4.  Focus only on improving the writing, framing, and structure. \n"
    "**Do not change the core data, findings, or results.**\n"
    "\n"
    "---\n"
    "### **Context: Evaluation Rubrics**\n"
    "{EVALUATION_RUBRIC}\n"
    "{SCORING_GUIDELINES}\n"
    "\n"
    "---\n"
    "### **Context: Original Paper**\n"
    "{Paper text}\n"
    "\n"
    "---";

constexpr std::string_view kJudgeTemplate =
    "You are an expert reviewer comparing two research papers. You have access to the full text of both "
    "papers and their detailed reviews.\n"
    "The reviews are generated by the following system prompt:\n"
    "{review_instruction_form}\n"
    "\n"
    "Below are the reviews of the two papers:\n"
    "\n"
    "Paper A:\n"
    "Title: {paper_a_id}\n"
    "Text: {paper_a_text}\n"
    "Reviews: {paper_a_reviews}\n"
    "\n"
    "Paper B:\n"
    "Title: {paper_b_id}\n"
    "Text: {paper_b_text}\n"
    "Reviews: {paper_b_reviews}\n"
    "\n"
    "Based on the papers and their reviews, which paper is better overall? Consider all aspects including:\n"
    "- Technical soundness and correctness\n"
    "- Novelty and originality\n"
    "- Significance and impact\n"
    "- Clarity of presentation\n"
    "- Quality of experiments and evaluation\n"
    "- Overall contribution to the field\n"
    "\n"
    "Respond in the following format:\n"
    "\n"
    "THOUGHT:\n"
    "<Your reasoning for the comparison>\n"
    "\n"
    "DECISION:\n"
    "```json\n"
    "{{\n"
    "    \"confidence\": 1-5 (1=very uncertain, 5=very confident),\n"
    "    \"reasoning\": \"Brief explanation of why one paper is better\",\n"
    "    \"score_difference\": 1-10 (how much better the winner is, 1=slightly better, 10=much better)\n"
    "    \"winner\": \"A\" or \"B\",\n"
    "}}\n"
    "```";

constexpr std::string_view kEditFormat =
    "### **Edit Format**\n"
    "Return your changes as search/replace blocks rather than rewritten sections:\n"
    "\n"
    "<<<<<<< SEARCH\n"
    "exact text copied from the current paper\n"
    "=======\n"
    "improved text\n"
    ">>>>>>> REPLACE\n"
    "\n"
    "Each SEARCH text must occur exactly once in the paper above, copied byte for byte. "
    "Keep every edit inside a single section body; headings cannot be edited.";

const std::string& reviewer_single_template() {
  static const std::string tmpl = [] {
    std::string t(kReviewerHead);
    t += kReviewerCriterion;
    t += kReviewerMiddle;
    t += kReviewerJsonLine;
    t += kReviewerTail;
    return t;
  }();
  return tmpl;
}

}  // namespace

std::string fill_template(std::string_view tmpl, std::span<const std::pair<std::string_view, std::string_view>> values,
                          bool python_braces) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (python_braces && (tmpl.compare(i, 2, "{{") == 0 || tmpl.compare(i, 2, "}}") == 0)) {
      out += tmpl[i];
      i += 2;
      continue;
    }
    if (tmpl[i] == '{') {
      bool matched = false;
      for (const auto& [name, value] : values) {
        if (tmpl.compare(i + 1, name.size(), name) == 0 && i + 1 + name.size() < tmpl.size() &&
            tmpl[i + 1 + name.size()] == '}') {
          out += value;
          i += name.size() + 2;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    out += tmpl[i++];
  }
  return out;
}

std::string_view reviewer_template() { return reviewer_single_template(); }
std::string_view proposer_template() { return kProposerTemplate; }
std::string_view revision_template() { return kRevisionTemplate; }
std::string_view judge_template() { return kJudgeTemplate; }

std::string render_reviewer_prompt(std::span<const RubricItem> items) {
  std::string out(kReviewerHead);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += '\n';
    const std::pair<std::string_view, std::string_view> values[] = {
        {"rubric_item", items[i].key},
        {"Rubric item description", items[i].question},
        {"Score 0 guideline", items[i].guideline_0},
        {"Score 5 guideline", items[i].guideline_5},
        {"Score 10 guideline", items[i].guideline_10},
    };
    out += fill_template(kReviewerCriterion, values);
  }
  out += kReviewerMiddle;
  for (const auto& item : items) {
    const std::pair<std::string_view, std::string_view> values[] = {{"rubric_item", item.key}};
    out += fill_template(kReviewerJsonLine, values);
  }
  out += kReviewerTail;
  return out;
}

std::string render_paper_message(const Paper& paper) {
  return fmt::format("Title: {}\n\n{}", paper.title, paper_text(paper));
}

std::string render_proposer_prompt(const std::string* parent_rubric_text, std::string_view critique) {
  std::string out(kProposerTemplate);
  if (parent_rubric_text != nullptr) {
    out += "\n\nCurrent rubric to refine:\n";
    out += fence(*parent_rubric_text, "python");
  }
  if (!critique.empty()) {
    out += "\n\nFeedback on the current rubric:\n";
    out += critique;
  }
  return out;
}

std::string render_revision_prompt(const RevisionPromptInput& input) {
  const std::string evaluation = input.rubric ? render_evaluation_block(*input.rubric) : std::string();
  const std::string guidelines = input.rubric ? render_guidelines_block(*input.rubric) : std::string();
  const std::pair<std::string_view, std::string_view> values[] = {
      {"EVALUATION_RUBRIC", evaluation},
      {"SCORING_GUIDELINES", guidelines},
      {"Paper text", input.paper_text},
  };
  std::string out = fill_template(kRevisionTemplate, values);
  if (!input.feedback.empty()) {
    out += "\n### **Context: Reviewer Feedback**\n";
    out += input.feedback;
    out += "\n\n---";
  }
  if (!input.failure_note.empty()) {
    out += "\n### **Previous Attempt Failed**\n";
    out += input.failure_note;
    out += "\n\n---";
  }
  out += '\n';
  out += kEditFormat;
  if (!input.protected_headings.empty()) {
    out += " These table sections are protected and must not be edited:";
    for (const auto& h : input.protected_headings) out += fmt::format("\n- {}", h.empty() ? "(untitled table)" : h);
  }
  if (input.attempt > 0) out += fmt::format("\n\nThis is revision attempt {} for this draft.", input.attempt);
  return out;
}

std::string render_judge_prompt(const JudgePromptInput& in) {
  const std::pair<std::string_view, std::string_view> values[] = {
      {"review_instruction_form", in.review_instruction_form},
      {"paper_a_id", in.paper_a_id},
      {"paper_a_text", in.paper_a_text},
      {"paper_a_reviews", in.paper_a_reviews},
      {"paper_b_id", in.paper_b_id},
      {"paper_b_text", in.paper_b_text},
      {"paper_b_reviews", in.paper_b_reviews},
  };
  return fill_template(kJudgeTemplate, values, /*python_braces=*/true);
}

PromptKind classify_prompt(const ChatRequest& request) {
  for (const auto& m : request.messages) {
    const std::string_view c = m.content;
    if (c.starts_with(kReviewerHead.substr(0, 40))) return PromptKind::Reviewer;
    if (c.starts_with(kProposerTemplate.substr(0, 40))) return PromptKind::Proposer;
    if (c.starts_with(kRevisionTemplate.substr(0, 34))) return PromptKind::Revision;
    if (c.starts_with(kJudgeTemplate.substr(0, 40))) return PromptKind::Judge;
  }
  return PromptKind::Unknown;
}

}  // namespace apres
