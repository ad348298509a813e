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

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "apres/fs_util.hpp"
#include "apres/prompts.hpp"
#include "apres/rng.hpp"
#include "apres/rubric.hpp"

using namespace apres;

namespace {

// Reference copies of the four prompt templates, kept apart from the library.
constexpr std::string_view kJudge = R"TPL(You are an expert reviewer comparing two research papers. You have access to the full text of both papers and their detailed reviews.
The reviews are generated by the following system prompt:
{review_instruction_form}

Below are the reviews of the two papers:

Paper A:
Title: {paper_a_id}
Text: {paper_a_text}
Reviews: {paper_a_reviews}

Paper B:
Title: {paper_b_id}
Text: {paper_b_text}
Reviews: {paper_b_reviews}

Based on the papers and their reviews, which paper is better overall? Consider all aspects including:
- Technical soundness and correctness
- Novelty and originality
- Significance and impact
- Clarity of presentation
- Quality of experiments and evaluation
- Overall contribution to the field

Respond in the following format:

THOUGHT:
<Your reasoning for the comparison>

DECISION:
```json
{{
    "confidence": 1-5 (1=very uncertain, 5=very confident),
    "reasoning": "Brief explanation of why one paper is better",
    "score_difference": 1-10 (how much better the winner is, 1=slightly better, 10=much better)
    "winner": "A" or "B",
}}
```)TPL";

constexpr std::string_view kReviewer = R"TPL(You are reviewing a paper for a top-tier, highly selective academic conference.
Please evaluate the following paper according to these criteria with their scoring guidelines:

**{rubric_item}**: {Rubric item description}.
  Score 0: {Score 0 guideline}
  Score 5: {Score 5 guideline}
  Score 10: {Score 10 guideline}

Given the highly selective nature of this top conference,
please apply rigorous standards in your evaluation.
Only exceptional work should receive scores of 8-10,
while work with significant flaws should receive lower scores.

Please provide your response in the following JSON format
wrapped in ```json ``` tags:
```json
{
  "{rubric_item}": {"score": <0-10>, "feedback": "<detailed feedback>"},
}
```)TPL";

constexpr std::string_view kProposer = R"TPL(You are an expert in research evaluation. 
Your task is to propose a set of evaluation rubrics designed 
to predict the future citation count of a research paper.

Your output must be two Python dictionaries: 
`EVALUATION_RUBRIC` and `SCORING_GUIDELINES`.

1.  `EVALUATION_RUBRIC`: Keys should be short, snake_case strings 
(e.g., `novelty`), and values should be a clear question defining the criterion.

2.  `SCORING_GUIDELINES`: Keys must match those in `EVALUATION_RUBRIC`. 
Values should be a nested dictionary using a 0-5-10 scoring scale 
(0=poor, 5=average, 10=exceptional) with a brief, clear description for each score.

The rubrics should focus on factors that make a paper influential and highly cited.

Example Format:
```python
EVALUATION_RUBRIC = {
    "clarity": "Is the paper's writing and structure exceptionally clear?",
}

SCORING_GUIDELINES = {
    "clarity": {
        0: "The paper is confusing or unintelligible.",
        5: "The paper is understandable but lacks precision.",
        10: "The paper is exceptionally clear and unambiguous."
    },
}
Please generate the complete EVALUATION_RUBRIC and SCORING_GUIDELINES dictionaries.)TPL";

constexpr std::string_view kRevision = R"TPL(You are an expert academic editor. 
Your goal is to rewrite the paper provided below to achieve a higher score based on 
the given evaluation rubrics.

**Instructions:**
1.  Work section-by-section (e.g., Abstract, Introduction, etc.).
2.  For each section, first briefly list the key weaknesses you are fixing by referencing 
the `rubric_item_key`.
3.  Then, provide the improved, rewritten version of that section.
4.  Focus only on improving the writing, framing, and structure. 
**Do not change the core data, findings, or results.**

---
### **Context: Evaluation Rubrics**
{EVALUATION_RUBRIC}
{SCORING_GUIDELINES}

---
### **Context: Original Paper**
{Paper text}

---)TPL";

RubricItem item(std::string key, std::string q = "Is it good?") {
  return RubricItem{std::move(key), std::move(q), "bad", "fine", "great"};
}

ChatRequest with_system(std::string system) {
  ChatRequest r;
  r.model = "m";
  r.messages = {{Role::System, std::move(system)}, {Role::User, "x"}};
  return r;
}

}  // namespace

TEST(Prompts, TemplatesAreVerbatim) {
  EXPECT_EQ(reviewer_template(), kReviewer);
  EXPECT_EQ(proposer_template(), kProposer);
  EXPECT_EQ(revision_template(), kRevision);
  EXPECT_EQ(judge_template(), kJudge);
}

TEST(Prompts, ProposerKeepsTrailingSpaces) {
  EXPECT_NE(proposer_template().find("You are an expert in research evaluation. \n"), std::string_view::npos);
  EXPECT_NE(revision_template().find("You are an expert academic editor. \n"), std::string_view::npos);
}

TEST(Prompts, SingleItemReviewerPromptFillsTheTemplate) {
  const RubricItem it = item("novelty", "How new is it");
  const std::pair<std::string_view, std::string_view> values[] = {
      {"rubric_item", it.key},           {"Rubric item description", it.question}, {"Score 0 guideline", it.guideline_0},
      {"Score 5 guideline", it.guideline_5}, {"Score 10 guideline", it.guideline_10}};
  const std::string expected = fill_template(kReviewer, values);
  const RubricItem items[] = {it};
  EXPECT_EQ(render_reviewer_prompt(items), expected);
  EXPECT_NE(expected.find("**novelty**: How new is it.\n  Score 0: bad\n  Score 5: fine\n  Score 10: great\n"),
            std::string::npos);
  EXPECT_NE(expected.find("  \"novelty\": {\"score\": <0-10>, \"feedback\": \"<detailed feedback>\"},\n}"),
            std::string::npos);
}

TEST(Prompts, MultiItemReviewerPromptListsEveryItem) {
  const RubricItem items[] = {item("a_one"), item("b_two"), item("c_three")};
  const std::string p = render_reviewer_prompt(items);
  std::size_t last = 0;
  for (const auto& it : items) {
    const auto at = p.find("**" + it.key + "**: ");
    ASSERT_NE(at, std::string::npos);
    EXPECT_GT(at, last);
    last = at;
    EXPECT_NE(p.find("  \"" + it.key + "\": {\"score\""), std::string::npos);
  }
  EXPECT_TRUE(p.ends_with("}\n```"));
}

TEST(Prompts, FillTemplateLeavesUnknownPlaceholders) {
  const std::pair<std::string_view, std::string_view> values[] = {{"x", "1"}};
  EXPECT_EQ(fill_template("{x} {y} {x", values), "1 {y} {x");
  EXPECT_EQ(fill_template("{{x}}", values), "{1}");
  EXPECT_EQ(fill_template("{{x}}", values, true), "{x}");
}

TEST(Prompts, ValuesAreNotRescanned) {
  const std::pair<std::string_view, std::string_view> values[] = {{"a", "{b}"}, {"b", "B"}};
  EXPECT_EQ(fill_template("{a}{b}", values), "{b}B");
}

TEST(Prompts, ProposerAppendsParentAndCritique) {
  EXPECT_EQ(render_proposer_prompt(nullptr, ""), kProposer);
  const std::string parent = "EVALUATION_RUBRIC = {}";
  const std::string p = render_proposer_prompt(&parent, "Too vague.");
  EXPECT_TRUE(p.starts_with(kProposer));
  EXPECT_EQ(p.substr(kProposer.size()),
            "\n\nCurrent rubric to refine:\n```python\nEVALUATION_RUBRIC = {}\n```\n\nFeedback on the current rubric:\n"
            "Too vague.");
}

TEST(Prompts, RevisionPromptSections) {
  Rubric r;
  r.items = {item("clarity")};
  RevisionPromptInput in;
  in.rubric = &r;
  in.paper_text = "Abstract\nBody.";
  in.protected_headings = {"Table 1: Results"};
  in.feedback = "Needs focus.";
  in.failure_note = "Search text not found.";
  in.attempt = 2;
  const std::string p = render_revision_prompt(in);
  const std::string evaluation = render_evaluation_block(r);
  const std::string guidelines = render_guidelines_block(r);
  const std::pair<std::string_view, std::string_view> values[] = {
      {"EVALUATION_RUBRIC", evaluation}, {"SCORING_GUIDELINES", guidelines}, {"Paper text", in.paper_text}};
  const std::string head = fill_template(kRevision, values);
  ASSERT_TRUE(p.starts_with(head));
  const std::string tail = p.substr(head.size());
  EXPECT_TRUE(tail.starts_with("\n### **Context: Reviewer Feedback**\nNeeds focus.\n\n---\n### **Previous Attempt Failed**\n"
                               "Search text not found.\n\n---\n### **Edit Format**\n"));
  EXPECT_NE(tail.find("<<<<<<< SEARCH\n"), std::string::npos);
  EXPECT_NE(tail.find("\n- Table 1: Results"), std::string::npos);
  EXPECT_TRUE(tail.ends_with("\n\nThis is revision attempt 2 for this draft."));
}

TEST(Prompts, JudgePromptCollapsesBraces) {
  JudgePromptInput in;
  in.review_instruction_form = "FORM";
  in.paper_a_id = "pa";
  in.paper_a_text = "text a {with braces}";
  in.paper_a_reviews = "{\"k\": 1}";
  in.paper_b_id = "pb";
  in.paper_b_text = "text b";
  in.paper_b_reviews = "rb";
  const std::string p = render_judge_prompt(in);
  EXPECT_NE(p.find("\nFORM\n"), std::string::npos);
  EXPECT_NE(p.find("Paper A:\nTitle: pa\nText: text a {with braces}\nReviews: {\"k\": 1}\n"), std::string::npos);
  EXPECT_NE(p.find("Paper B:\nTitle: pb\nText: text b\nReviews: rb\n"), std::string::npos);
  EXPECT_NE(p.find("```json\n{\n    \"confidence\""), std::string::npos);
  EXPECT_TRUE(p.ends_with("\n}\n```"));
  EXPECT_EQ(p.find("{{"), std::string::npos);
}

TEST(Prompts, ClassifyEveryKind) {
  const RubricItem items[] = {item("k")};
  EXPECT_EQ(classify_prompt(with_system(render_reviewer_prompt(items))), PromptKind::Reviewer);
  EXPECT_EQ(classify_prompt(with_system(render_proposer_prompt(nullptr, "c"))), PromptKind::Proposer);
  RevisionPromptInput rin;
  EXPECT_EQ(classify_prompt(with_system(render_revision_prompt(rin))), PromptKind::Revision);
  EXPECT_EQ(classify_prompt(with_system(render_judge_prompt({}))), PromptKind::Judge);
  EXPECT_EQ(classify_prompt(with_system("hello")), PromptKind::Unknown);
}

TEST(Prompts, ReviewerRequestInjectiveInItemAndPaper) {
  Rng rng(8);
  // Headings are single lines; bodies may span several.
  auto word = [&](bool multiline = false) {
    static const char* const words[] = {"alpha", "beta", "gamma", "delta", "x", "y y", "z\nz"};
    std::string s;
    const auto n = 1 + rng.uniform_index(3);
    for (std::uint64_t i = 0; i < n; ++i) s += words[rng.uniform_index(multiline ? 7 : 6)];
    return s;
  };
  std::map<std::string, std::string> seen;  // prompt hash -> input description
  for (int i = 0; i < 3000; ++i) {
    RubricItem it{"k" + std::to_string(rng.uniform_index(4)), word(), word(), word(), word()};
    Paper p;
    p.title = word();
    p.sections = {make_section(SectionKind::Text, word(), word(true))};
    const RubricItem items[] = {it};
    const std::string input = it.key + "\x1f" + it.question + "\x1f" + it.guideline_0 + "\x1f" + it.guideline_5 + "\x1f" +
                              it.guideline_10 + "\x1f" + p.title + "\x1f" + p.sections[0].heading + "\x1f" +
                              p.sections[0].body;
    const std::string hash = sha256_hex(render_reviewer_prompt(items) + "\x1e" + render_paper_message(p));
    auto [at, inserted] = seen.emplace(hash, input);
    if (!inserted) {
      ASSERT_EQ(at->second, input);
    }
  }
}
