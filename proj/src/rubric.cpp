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

#include "apres/rubric.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "apres/fs_util.hpp"
#include "apres/parallel.hpp"
#include "apres/prompts.hpp"
#include "apres/structured.hpp"

namespace apres {

namespace {

bool valid_key(std::string_view key) {
  if (key.empty() || key[0] < 'a' || key[0] > 'z') return false;
  return std::all_of(key.begin(), key.end(),
                     [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; });
}

[[noreturn]] void malformed(const std::string& reason) {
  throw RubricError(RubricErrc::MalformedProposal, "malformed proposal: " + reason);
}

// Offset just past `NAME =` where NAME starts a line (after indentation).
std::optional<std::size_t> find_assignment(std::string_view text, std::string_view name) {
  std::size_t line = 0;
  while (line <= text.size()) {
    std::size_t i = line;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (text.compare(i, name.size(), name) == 0) {
      std::size_t j = i + name.size();
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
      if (j < text.size() && text[j] == '=' && (j + 1 >= text.size() || text[j + 1] != '=')) return j + 1;
    }
    const auto nl = text.find('\n', line);
    if (nl == std::string_view::npos) break;
    line = nl + 1;
  }
  return std::nullopt;
}

const StructuredValue& dictionary(std::string_view text, std::string_view name, PrefixParse& holder) {
  const auto at = find_assignment(text, name);
  if (!at) malformed(fmt::format("no {} assignment", name));
  try {
    holder = parse_structured_prefix(text, *at);
  } catch (const StructuredError& e) {
    malformed(fmt::format("{} does not parse ({})", name, e.what()));
  }
  if (!holder.value.is_map()) malformed(fmt::format("{} is not a dictionary", name));
  return holder.value;
}

std::string level_text(const StructuredValue& levels, std::string_view key, std::string_view level) {
  for (const auto& [k, v] : levels.as_map()) {
    if (k != level) continue;
    if (!v.is_string()) malformed(fmt::format("guideline {}/{} is not a string", key, level));
    if (v.as_string().empty()) break;
    return v.as_string();
  }
  throw RubricError(RubricErrc::GuidelineMissing, fmt::format("guideline missing for {} at level {}", key, level));
}

std::string python_block(const Rubric& rubric, bool guidelines) {
  std::string out = guidelines ? "SCORING_GUIDELINES = {\n" : "EVALUATION_RUBRIC = {\n";
  for (std::size_t i = 0; i < rubric.items.size(); ++i) {
    const auto& it = rubric.items[i];
    const char* sep = i + 1 < rubric.items.size() ? "," : "";
    if (!guidelines) {
      out += fmt::format("    {}: {}{}\n", quote_string(it.key), quote_string(it.question), sep);
    } else {
      out += fmt::format("    {}: {{\n        0: {},\n        5: {},\n        10: {}\n    }}{}\n", quote_string(it.key),
                         quote_string(it.guideline_0), quote_string(it.guideline_5), quote_string(it.guideline_10),
                         sep);
    }
  }
  out += "}";
  return out;
}

struct ItemScore {
  double score = 0;
  std::string feedback;
};

enum class Reading { Ok, Missing, OutOfRange };

// Pulls {"<key>": {"score": s, "feedback": f}} out of a reviewer reply.
Reading read_score(std::string_view reply, std::string_view key, ItemScore& out, double& bad_value) {
  std::string body;
  try {
    body = extract_fenced_block(reply, "json");
  } catch (const GatewayError&) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return Reading::Missing;
    body = std::string(reply.substr(open, close - open + 1));
  }
  StructuredValue doc;
  try {
    doc = parse_structured(body);
  } catch (const StructuredError&) {
    return Reading::Missing;
  }
  if (!doc.is_map()) return Reading::Missing;
  const StructuredValue* entry = doc.find(key);
  if (entry == nullptr && doc.find("score") != nullptr) entry = &doc;
  if (entry == nullptr || !entry->is_map()) return Reading::Missing;
  const StructuredValue* score = entry->find("score");
  if (score == nullptr) return Reading::Missing;
  double value = 0;
  if (score->is_number()) {
    value = score->as_number();
  } else if (score->is_string()) {
    try {
      std::size_t used = 0;
      value = std::stod(score->as_string(), &used);
      if (used != score->as_string().size()) return Reading::Missing;
    } catch (const std::exception&) {
      return Reading::Missing;
    }
  } else {
    return Reading::Missing;
  }
  if (!std::isfinite(value)) return Reading::Missing;
  if (value < 0.0 || value > 10.0) {
    bad_value = value;
    return Reading::OutOfRange;
  }
  out.score = value;
  out.feedback.clear();
  if (const auto* fb = entry->find("feedback"); fb != nullptr && fb->is_string()) out.feedback = fb->as_string();
  return Reading::Ok;
}

std::string number_repr(double v) { return fmt::format("{}", v); }

}  // namespace

void RubricItem::validate() const {
  if (!valid_key(key)) throw RubricError(RubricErrc::InvalidItem, fmt::format("invalid rubric key '{}'", key));
  if (question.empty() || guideline_0.empty() || guideline_5.empty() || guideline_10.empty())
    throw RubricError(RubricErrc::InvalidItem, fmt::format("rubric item '{}' has an empty field", key));
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::Seed: return "seed";
    case Provenance::Proposed: return "proposed";
    case Provenance::Discovered: return "discovered";
  }
  return "proposed";
}

void Rubric::validate() const {
  if (items.empty()) throw RubricError(RubricErrc::EmptyRubric, "rubric has no items");
  if (items.size() > kMaxRubricItems)
    throw RubricError(RubricErrc::TooManyItems,
                      fmt::format("rubric has {} items, limit is {}", items.size(), kMaxRubricItems));
  std::set<std::string_view> seen;
  for (const auto& it : items) {
    it.validate();
    if (!seen.insert(it.key).second)
      throw RubricError(RubricErrc::DuplicateKey, fmt::format("duplicate rubric key '{}'", it.key));
  }
}

std::vector<std::string> Rubric::keys() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.key);
  return out;
}

std::string render_evaluation_block(const Rubric& rubric) { return python_block(rubric, false); }
std::string render_guidelines_block(const Rubric& rubric) { return python_block(rubric, true); }

std::string render_rubric_text(const Rubric& rubric) {
  return render_evaluation_block(rubric) + "\n\n" + render_guidelines_block(rubric) + "\n";
}

Rubric parse_rubric_text(std::string_view text, Provenance provenance) {
  std::string body(text);
  try {
    body = extract_fenced_block(text, "python");
  } catch (const GatewayError&) {
  }
  PrefixParse eval_holder, guide_holder;
  const auto& evaluation = dictionary(body, "EVALUATION_RUBRIC", eval_holder);
  const auto& guidelines = dictionary(body, "SCORING_GUIDELINES", guide_holder);

  Rubric rubric;
  rubric.provenance = provenance;
  std::set<std::string> keys;
  for (const auto& [key, question] : evaluation.as_map()) {
    if (!question.is_string()) malformed(fmt::format("question for '{}' is not a string", key));
    if (!keys.insert(key).second)
      throw RubricError(RubricErrc::DuplicateKey, fmt::format("duplicate rubric key '{}'", key));
    const StructuredValue* levels = guidelines.find(key);
    if (levels == nullptr)
      throw RubricError(RubricErrc::GuidelineMissing, fmt::format("guideline missing for {} at level 0", key));
    if (!levels->is_map()) malformed(fmt::format("guidelines for '{}' are not a dictionary", key));
    rubric.items.push_back({key, question.as_string(), level_text(*levels, key, "0"), level_text(*levels, key, "5"),
                            level_text(*levels, key, "10")});
  }
  for (const auto& [key, _] : guidelines.as_map())
    if (!keys.contains(key)) malformed(fmt::format("guidelines for unknown key '{}'", key));
  rubric.validate();
  return rubric;
}

nlohmann::ordered_json rubric_to_json(const Rubric& rubric) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& it : rubric.items)
    out.push_back({{"key", it.key}, {"question", it.question}, {"g0", it.guideline_0}, {"g5", it.guideline_5},
                   {"g10", it.guideline_10}});
  return out;
}

Rubric rubric_from_json(const nlohmann::ordered_json& j, Provenance provenance) {
  if (!j.is_array()) throw RubricError(RubricErrc::InvalidItem, "rubric export must be an array");
  Rubric rubric;
  rubric.provenance = provenance;
  for (const auto& e : j) {
    if (!e.is_object()) throw RubricError(RubricErrc::InvalidItem, "rubric entry must be an object");
    auto field = [&](const char* name) {
      const auto it = e.find(name);
      if (it == e.end() || !it->is_string())
        throw RubricError(RubricErrc::InvalidItem, fmt::format("rubric entry lacks string field '{}'", name));
      return it->get<std::string>();
    };
    rubric.items.push_back({field("key"), field("question"), field("g0"), field("g5"), field("g10")});
  }
  rubric.validate();
  return rubric;
}

Rubric load_rubric(const std::filesystem::path& path, Provenance provenance) {
  const auto text = read_file(path);
  if (!text) throw RubricError(RubricErrc::InvalidItem, fmt::format("cannot read rubric file {}", path.string()));
  const auto first = text->find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (*text)[first] == '[') {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(*text);
    } catch (const nlohmann::json::exception& e) {
      throw RubricError(RubricErrc::InvalidItem, fmt::format("rubric export {}: {}", path.string(), e.what()));
    }
    return rubric_from_json(j, provenance);
  }
  return parse_rubric_text(*text, provenance);
}

void save_rubric(const std::filesystem::path& path, const Rubric& rubric) {
  if (path.extension() == ".json")
    atomic_write(path, rubric_to_json(rubric).dump(2) + "\n");
  else
    atomic_write(path, render_rubric_text(rubric));
}

Rubric seed_rubric() {
  Rubric r;
  r.provenance = Provenance::Seed;
  r.items = {
      {"clarity", "Is the paper's writing and structure exceptionally clear?",
       "The paper is confusing or unintelligible.", "The paper is understandable but lacks precision.",
       "The paper is exceptionally clear and unambiguous."},
      {"novelty", "Does the paper introduce genuinely new ideas, methods, or findings?",
       "The work repeats known results with no new insight.",
       "The work offers incremental extensions of existing ideas.",
       "The work introduces a fundamentally new idea or direction."},
      {"significance", "Does the paper address an important problem whose solution would matter to many researchers?",
       "The problem is trivial or of interest to almost no one.",
       "The problem is relevant to a niche part of the community.",
       "The problem is central to the field and the results would be widely used."},
      {"technical_quality", "Are the methods sound and the experiments thorough and convincing?",
       "The methodology is flawed or the claims are unsupported.",
       "The methodology is reasonable but the evaluation has gaps.",
       "The methodology is rigorous and the evidence is comprehensive."},
  };
  return r;
}

ChatRequest proposal_request(const Rubric* parent, std::string_view critique, const Gateway& gateway,
                             const ProposerOptions& options) {
  std::optional<std::string> parent_text;
  if (parent != nullptr) parent_text = render_rubric_text(*parent);
  return gateway.make_request({}, render_proposer_prompt(parent_text ? &*parent_text : nullptr, critique),
                              gateway.config().creative_temperature, options.max_tokens);
}

Rubric propose_rubric(const Rubric* parent, std::string_view critique, Gateway& gateway,
                      const ProposerOptions& options) {
  const auto completion = gateway.complete(proposal_request(parent, critique, gateway, options));
  Rubric rubric = parse_rubric_text(completion.text, Provenance::Proposed);
  rubric.parent_id = options.parent_id;
  return rubric;
}

ScoreVector score_paper(const Rubric& rubric, const Paper& paper, Gateway& gateway, const ScoringOptions& options) {
  rubric.validate();
  const std::string text = render_paper_message(paper);
  if (paper.sections.empty() || paper_text(paper).find_first_not_of(" \t\r\n") == std::string::npos)
    throw RubricError(RubricErrc::EmptyPaper, fmt::format("paper {} has no text", paper.id));

  std::vector<ItemScore> results(rubric.items.size());
  parallel_for(rubric.items.size(), options.workers, [&](std::size_t i) {
    const auto& item = rubric.items[i];
    ChatRequest req = gateway.make_request(render_reviewer_prompt(std::span(&item, 1)), text, options.temperature,
                                           options.max_tokens);
    double bad = 0;
    Reading reading = Reading::Missing;
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string reply;
      try {
        reply = gateway.complete(req).text;
      } catch (const GatewayError& e) {
        throw RubricError(RubricErrc::GatewayFailure,
                          fmt::format("reviewer call for '{}' on {} failed: {}", item.key, paper.id, e.what()));
      }
      reading = read_score(reply, item.key, results[i], bad);
      if (reading == Reading::Ok) return;
      req.messages.push_back({Role::Assistant, reply});
      req.messages.push_back(
          {Role::User, reading == Reading::OutOfRange
                           ? fmt::format("The score for \"{}\" must be between 0 and 10; you gave {}. Reply again "
                                         "with the JSON block only.",
                                         item.key, number_repr(bad))
                           : fmt::format("Your reply did not contain a score for \"{}\". Reply again with the JSON "
                                         "block only, in the requested format.",
                                         item.key)});
    }
    if (reading == Reading::OutOfRange)
      throw RubricError(RubricErrc::ScoreOutOfRange,
                        fmt::format("score {} for '{}' on {} is outside [0, 10]", number_repr(bad), item.key, paper.id));
    throw RubricError(RubricErrc::MissingScore, fmt::format("no score for '{}' on {}", item.key, paper.id));
  });

  ScoreVector v;
  v.paper_id = paper.id;
  for (std::size_t i = 0; i < rubric.items.size(); ++i) {
    v.scores[rubric.items[i].key] = results[i].score;
    v.feedback[rubric.items[i].key] = std::move(results[i].feedback);
  }
  return v;
}

FeatureTable features(const Rubric& rubric, std::span<const ScoreVector> vectors) {
  FeatureTable table;
  table.matrix.column_keys = rubric.keys();
  table.matrix.values.resize(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(rubric.items.size()));
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    const auto& v = vectors[r];
    if (v.scores.size() != rubric.items.size())
      throw RubricError(RubricErrc::KeyMismatch, fmt::format("score keys for {} do not match the rubric", v.paper_id));
    for (std::size_t c = 0; c < rubric.items.size(); ++c) {
      const auto it = v.scores.find(rubric.items[c].key);
      if (it == v.scores.end())
        throw RubricError(RubricErrc::KeyMismatch,
                          fmt::format("{} has no score for '{}'", v.paper_id, rubric.items[c].key));
      table.matrix.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = it->second;
    }
    table.paper_ids.push_back(v.paper_id);
  }
  return table;
}

nlohmann::ordered_json score_vector_to_json(const ScoreVector& v) {
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  nlohmann::ordered_json feedback = nlohmann::ordered_json::object();
  for (const auto& [k, s] : v.scores) scores[k] = s;
  for (const auto& [k, f] : v.feedback) feedback[k] = f;
  return {{"paper_id", v.paper_id}, {"scores", scores}, {"feedback", feedback}};
}

ScoreVector score_vector_from_json(const nlohmann::ordered_json& j) {
  try {
    ScoreVector v;
    v.paper_id = j.at("paper_id").get<std::string>();
    for (const auto& [k, s] : j.at("scores").items()) {
      const double value = s.get<double>();
      if (!(value >= 0.0 && value <= 10.0))
        throw RubricError(RubricErrc::ScoreOutOfRange, fmt::format("stored score {} for '{}' out of range", value, k));
      v.scores[k] = value;
    }
    if (const auto fb = j.find("feedback"); fb != j.end())
      for (const auto& [k, f] : fb->items()) v.feedback[k] = f.get<std::string>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw RubricError(RubricErrc::KeyMismatch, fmt::format("malformed score vector: {}", e.what()));
  }
}

std::string render_reviews(const Rubric& rubric, const ScoreVector& v) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& item : rubric.items) {
    const auto s = v.scores.find(item.key);
    if (s == v.scores.end()) continue;
    const auto f = v.feedback.find(item.key);
    out[item.key] = {{"score", s->second}, {"feedback", f == v.feedback.end() ? std::string() : f->second}};
  }
  return out.dump(2);
}

}  // namespace apres
