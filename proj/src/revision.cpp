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

#include "apres/revision.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "apres/fs_util.hpp"
#include "apres/prompts.hpp"

namespace apres {

namespace {

constexpr std::string_view kSearchMarker = "<<<<<<< SEARCH";
constexpr std::string_view kDividerMarker = "=======";
constexpr std::string_view kReplaceMarker = ">>>>>>> REPLACE";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string join_lines(const std::vector<std::string_view>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += lines[i];
  }
  return out;
}

std::string heading_label(const Section& s, std::size_t index) {
  return s.heading.empty() ? fmt::format("section {}", index + 1) : s.heading;
}

Paper paper_from_artifact(const std::string& artifact) {
  return paper_from_json(nlohmann::ordered_json::parse(artifact));
}

std::string render_feedback(const Rubric& rubric, const ScoreVector& v) {
  std::string out;
  for (const auto& item : rubric.items) {
    const auto s = v.scores.find(item.key);
    if (s == v.scores.end()) continue;
    const auto f = v.feedback.find(item.key);
    if (!out.empty()) out += '\n';
    out += fmt::format("- {} (score {}/10): {}", item.key, s->second,
                       f == v.feedback.end() || f->second.empty() ? "no comment" : f->second);
  }
  return out;
}

}  // namespace

Document::Document(std::vector<Section> sections) : sections_(std::move(sections)) {
  full_text_ = render_sections(sections_, &layout_);
}

EditScript parse_edit_script(std::string_view text) {
  const std::string normalized = normalize_newlines(text);
  const auto lines = split_lines(normalized);
  EditScript script;
  enum class State { Outside, Search, Replace } state = State::Outside;
  std::vector<std::string_view> search, replace;
  for (const auto line : lines) {
    switch (state) {
      case State::Outside:
        if (line == kSearchMarker) {
          state = State::Search;
          search.clear();
          replace.clear();
        }
        break;
      case State::Search:
        if (line == kDividerMarker)
          state = State::Replace;
        else
          search.push_back(line);
        break;
      case State::Replace:
        if (line == kReplaceMarker) {
          const std::size_t index = script.blocks.size();
          EditBlock block{join_lines(search), join_lines(replace)};
          if (block.search.empty())
            throw RevisionError(RevisionErrc::EmptySearch, fmt::format("edit block {} has an empty search", index));
          if (block.search == block.replace)
            throw RevisionError(RevisionErrc::NoOpBlock, fmt::format("edit block {} changes nothing", index));
          script.blocks.push_back(std::move(block));
          if (script.blocks.size() > kMaxEditBlocks)
            throw RevisionError(RevisionErrc::TooManyBlocks,
                                fmt::format("edit script has more than {} blocks", kMaxEditBlocks));
          state = State::Outside;
        } else {
          replace.push_back(line);
        }
        break;
    }
  }
  if (state != State::Outside)
    throw RevisionError(RevisionErrc::UnterminatedBlock,
                        fmt::format("edit block {} is not terminated", script.blocks.size()));
  if (script.blocks.empty()) throw RevisionError(RevisionErrc::NoBlocks, "no search/replace blocks found");
  return script;
}

std::string render_edit_script(const EditScript& script) {
  std::string out;
  for (const auto& b : script.blocks)
    out += fmt::format("{}\n{}\n{}\n{}\n{}\n", kSearchMarker, b.search, kDividerMarker, b.replace, kReplaceMarker);
  return out;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

Document apply_edits(const Document& doc, const EditScript& script) {
  if (script.blocks.empty()) throw RevisionError(RevisionErrc::NoBlocks, "no search/replace blocks found");
  if (script.blocks.size() > kMaxEditBlocks)
    throw RevisionError(RevisionErrc::TooManyBlocks, fmt::format("edit script has more than {} blocks", kMaxEditBlocks));
  Document current = doc;
  for (std::size_t i = 0; i < script.blocks.size(); ++i) {
    const auto& block = script.blocks[i];
    if (block.search.empty())
      throw RevisionError(RevisionErrc::EmptySearch, fmt::format("edit block {} has an empty search", i));
    const std::string& text = current.full_text();
    const std::size_t count = count_occurrences(text, block.search);
    if (count == 0)
      throw RevisionError(RevisionErrc::SearchNotFound, fmt::format("edit block {}: search text not found", i));
    if (count > 1)
      throw RevisionError(RevisionErrc::AmbiguousMatch,
                          fmt::format("edit block {}: search text occurs {} times", i, count));
    const std::size_t begin = text.find(block.search);
    const std::size_t end = begin + block.search.size();

    const auto& sections = current.sections();
    const auto& layout = current.layout();
    for (std::size_t s = 0; s < sections.size(); ++s) {
      if (!sections[s].is_protected) continue;
      if (begin < layout[s].body_end && end > layout[s].block_start)
        throw RevisionError(RevisionErrc::ProtectedRegionEdit,
                            fmt::format("edit block {} touches protected section '{}'", i, heading_label(sections[s], s)));
    }
    std::optional<std::size_t> target;
    for (std::size_t s = 0; s < sections.size(); ++s)
      if (begin >= layout[s].body_start && end <= layout[s].body_end) target = s;
    if (!target)
      throw RevisionError(RevisionErrc::StructuralEdit,
                          fmt::format("edit block {} spans a heading or a section boundary", i));

    std::vector<Section> next = sections;
    Section& sec = next[*target];
    const std::size_t local = begin - layout[*target].body_start;
    sec.body = sec.body.substr(0, local) + normalize_newlines(block.replace) + sec.body.substr(local + block.search.size());
    if (sec.body.find_first_not_of(" \t\n") == std::string::npos)
      throw RevisionError(RevisionErrc::StructuralEdit,
                          fmt::format("edit block {} would empty section '{}'", i, heading_label(sec, *target)));
    current = Document(std::move(next));
  }
  return current;
}

double overall_score(const ScoreVector& v) {
  if (v.scores.empty()) throw RevisionError(RevisionErrc::Empty, "score vector is empty");
  double sum = 0;
  for (const auto& [_, s] : v.scores) sum += s;
  return sum / static_cast<double>(v.scores.size());
}

double improvement(double s_ori, double s_rev) { return s_rev - s_ori; }

Paper paper_with_document(const Paper& paper, const Document& doc) {
  Paper out = paper;
  out.sections = doc.sections();
  return out;
}

RevisionTask::RevisionTask(Paper paper, Rubric rubric, Gateway& gateway, RevisionOptions options)
    : paper_(std::move(paper)), rubric_(std::move(rubric)), gateway_(gateway), options_(std::move(options)) {
  rubric_.validate();
  for (std::size_t s = 0; s < paper_.sections.size(); ++s)
    if (paper_.sections[s].is_protected) protected_headings_.push_back(heading_label(paper_.sections[s], s));
}

std::string RevisionTask::fingerprint() const {
  return "revision:" + sha256_hex(paper_to_line(paper_) + "\n" + render_rubric_text(rubric_) + "\n" +
                                  gateway_.provider().id() + "\n" + gateway_.config().model);
}

std::optional<std::string> RevisionTask::baseline_artifact() { return paper_to_line(paper_); }

std::string RevisionTask::feedback_for(const Paper& draft) {
  try {
    return render_feedback(rubric_, score_paper(rubric_, draft, gateway_, options_.scoring));
  } catch (const RubricError& e) {
    if (e.code() == RubricErrc::GatewayFailure) throw;
    // Only reached for a draft with no scored ancestor, i.e. the original.
    throw RevisionError(RevisionErrc::RevisionFailed, fmt::format("paper {} could not be scored: {}", draft.id, e.what()));
  }
}

Proposal RevisionTask::revise(const Paper& draft, std::string_view feedback, std::string_view failure,
                              std::size_t attempt) {
  const Document doc(draft.sections);
  RevisionPromptInput input;
  input.rubric = &rubric_;
  input.paper_text = doc.full_text();
  input.protected_headings = protected_headings_;
  input.feedback = feedback;
  input.failure_note = failure;
  input.attempt = attempt;
  const auto req = gateway_.make_request({}, render_revision_prompt(input), gateway_.config().creative_temperature,
                                         options_.max_tokens);
  const std::string reply = gateway_.complete(req).text;
  try {
    const Document next = apply_edits(doc, parse_edit_script(reply));
    return {paper_to_line(paper_with_document(draft, next)), std::nullopt};
  } catch (const RevisionError& e) {
    return {paper_to_line(draft), fmt::format("{}\n\nRejected reply:\n{}", e.what(), reply)};
  }
}

Proposal RevisionTask::propose_root(std::size_t index) {
  return revise(paper_, feedback_for(paper_), {}, index + 1);
}

Proposal RevisionTask::propose_child(const Node& parent, Mode mode, const SearchTree& tree) {
  const Paper draft = paper_from_artifact(parent.artifact);
  // Feedback comes from the nearest evaluated ancestor, which for a buggy
  // node is the draft its failed script was aimed at.
  std::string feedback;
  for (const Node* n = &parent; n != nullptr; n = n->parent_id ? tree.find(*n->parent_id) : nullptr) {
    if (n->ok() && n->details.contains("feedback")) {
      feedback = n->details["feedback"].get<std::string>();
      break;
    }
  }
  if (feedback.empty()) feedback = feedback_for(draft);
  const std::size_t attempt = static_cast<std::size_t>(parent.children) + 1;
  if (mode == Mode::Debug) {
    const std::string note = fmt::format("{} It failed with:\n{}", kRepairNote, parent.bug_report.value_or(""));
    return revise(draft, feedback, note, attempt);
  }
  return revise(draft, feedback, {}, attempt);
}

Evaluation RevisionTask::evaluate(const std::string& artifact) {
  Evaluation ev;
  Paper draft;
  try {
    draft = paper_from_artifact(artifact);
  } catch (const std::exception& e) {
    ev.bug_report = fmt::format("draft record is unreadable: {}", e.what());
    return ev;
  }
  std::vector<const Section*> orig_tables, draft_tables;
  for (const auto& s : paper_.sections)
    if (s.is_protected) orig_tables.push_back(&s);
  for (const auto& s : draft.sections)
    if (s.is_protected) draft_tables.push_back(&s);
  bool tables_ok = orig_tables.size() == draft_tables.size();
  for (std::size_t i = 0; tables_ok && i < orig_tables.size(); ++i) tables_ok = *orig_tables[i] == *draft_tables[i];
  if (!tables_ok) {
    ev.bug_report = "protected table sections differ from the original";
    return ev;
  }
  ScoreVector v;
  try {
    v = score_paper(rubric_, draft, gateway_, options_.scoring);
  } catch (const RubricError& e) {
    if (e.code() == RubricErrc::GatewayFailure) throw;
    ev.bug_report = e.what();
    return ev;
  }
  const double s = overall_score(v);
  ev.metric = s;
  ev.details["score"] = s;
  ev.details["scores"] = score_vector_to_json(v)["scores"];
  ev.details["feedback"] = render_feedback(rubric_, v);
  ev.columns["score"] = fmt::format("{}", s);
  return ev;
}

RevisionState run_revision(const Paper& paper, const Rubric& rubric, const SearchConfig& config, Gateway& gateway,
                           const RevisionOptions& options) {
  RevisionTask task(paper, rubric, gateway, options);
  SearchResult result;
  try {
    if (options.resume && options.run_dir && journal_exists(*options.run_dir))
      result = resume_search(*options.run_dir, task, config);
    else
      result = run_search(task, config, options.run_dir);
  } catch (const SearchError& e) {
    if (e.code() == SearchErrc::NoValidNode)
      throw RevisionError(RevisionErrc::RevisionFailed, fmt::format("paper {} could not be scored", paper.id));
    throw;
  }
  const Node& baseline = result.tree.at(0);
  if (!baseline.ok())
    throw RevisionError(RevisionErrc::RevisionFailed,
                        fmt::format("paper {} could not be scored: {}", paper.id, baseline.bug_report.value_or("")));
  RevisionState state;
  state.paper_id = paper.id;
  state.s_ori = *baseline.metric;
  state.s_rev = *result.best.metric;
  state.delta_s = improvement(state.s_ori, state.s_rev);
  state.best_draft = Document(paper_from_artifact(result.best.artifact).sections);
  state.best_node_id = result.best.id;
  state.nodes = result.tree.size();
  state.stopped_early = result.stopped_early;
  return state;
}

}  // namespace apres
