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

#include "apres/stub_provider.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "apres/rubric.hpp"
#include "apres/structured.hpp"
#include "apres/synthetic.hpp"

namespace apres {

namespace {

const std::string& last_user(const ChatRequest& req) {
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it)
    if (it->role == Role::User) return it->content;
  return req.messages.back().content;
}

const std::string* system_message(const ChatRequest& req) {
  for (const auto& m : req.messages)
    if (m.role == Role::System) return &m.content;
  return nullptr;
}

std::string_view between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return {};
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  return text.substr(start, b == std::string_view::npos ? std::string_view::npos : b - start);
}

// Criterion keys from a rendered reviewer prompt ("**key**: ..." lines).
std::vector<std::string> reviewer_keys(std::string_view prompt) {
  std::vector<std::string> keys;
  std::size_t pos = 0;
  while ((pos = prompt.find("\n**", pos)) != std::string_view::npos) {
    const auto start = pos + 3;
    const auto end = prompt.find("**: ", start);
    const auto eol = prompt.find('\n', start);
    if (end != std::string_view::npos && end < eol) keys.emplace_back(prompt.substr(start, end - start));
    pos = start;
  }
  return keys;
}

// ---- reviewer

std::string review_reply(const ChatRequest& req, Rng& rng, const StubBehaviour& b) {
  const std::string* system = system_message(req);
  const std::vector<std::string> keys = reviewer_keys(system ? *system : req.messages.front().content);
  const std::string& paper = req.messages.size() > 1 ? req.messages[1].content : req.messages.front().content;
  const bool reask = req.messages.size() > 2;
  if (!reask && rng.uniform01() < b.reviewer_garble) return "I am unable to assess this submission right now.";
  std::string out = "```json\n{\n";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const std::size_t a = aspect_for_key(keys[i]);
    const double mean = stub_score_mean(paper, a);
    const double score = std::clamp(std::round(mean + b.reviewer_noise * rng.normal()), 0.0, 10.0);
    const auto marker = aspects()[a].marker;
    const auto found = count_word(paper, marker);
    const std::string feedback =
        score >= 9 ? fmt::format("The {} of the work is convincing throughout.", aspects()[a].name)
                   : fmt::format("Only {} passage(s) read as {}; the {} of the work needs stronger support.", found,
                                 marker, aspects()[a].name);
    out += fmt::format("  {}: {{\"score\": {}, \"feedback\": {}}}{}\n", quote_string(keys[i]), score,
                       quote_string(feedback), i + 1 < keys.size() ? "," : "");
  }
  out += "}\n```";
  return out;
}

// ---- proposer

constexpr std::string_view kSuffixes[] = {"depth", "evidence", "quality", "strength", "level", "breadth"};

RubricItem make_item(std::size_t a, std::string_view suffix) {
  std::string label(aspects()[a].name);
  std::replace(label.begin(), label.end(), '_', ' ');
  return {fmt::format("{}_{}", aspects()[a].name, suffix),
          fmt::format("How strong is the {} of the paper, judged by its {}?", label, suffix),
          fmt::format("The {} is absent or badly lacking.", label),
          fmt::format("The {} is adequate but unremarkable.", label),
          fmt::format("The {} is outstanding and clearly demonstrated.", label)};
}

bool add_random_item(Rubric& r, Rng& rng) {
  std::set<std::string> keys;
  for (const auto& it : r.items) keys.insert(it.key);
  for (int tries = 0; tries < 32; ++tries) {
    RubricItem item = make_item(rng.uniform_index(aspects().size()),
                                kSuffixes[rng.uniform_index(std::size(kSuffixes))]);
    if (keys.contains(item.key)) continue;
    r.items.push_back(std::move(item));
    return true;
  }
  return false;
}

std::string proposal_reply(const ChatRequest& req, Rng& rng, const StubBehaviour& b) {
  const std::string& prompt = last_user(req);
  const bool repair = prompt.find(kRepairNote) != std::string::npos;
  Rubric rubric;
  bool have_parent = false;
  const auto marker = prompt.find("Current rubric to refine:\n");
  if (marker != std::string::npos) {
    try {
      rubric = parse_rubric_text(std::string_view(prompt).substr(marker));
      have_parent = true;
    } catch (const Error&) {
    }
  }
  if (!have_parent) {
    const std::size_t n = 2 + rng.uniform_index(4);
    for (std::size_t i = 0; i < n; ++i) add_random_item(rubric, rng);
  } else {
    const double u = rng.uniform01();
    if (u < 0.45 && rubric.items.size() < 16) {
      add_random_item(rubric, rng);
    } else if (u < 0.75 && rubric.items.size() > 1) {
      rubric.items.erase(rubric.items.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(rubric.items.size())));
    } else {
      const auto at = rng.uniform_index(rubric.items.size());
      if (add_random_item(rubric, rng)) {
        std::swap(rubric.items[at], rubric.items.back());
        rubric.items.pop_back();
      }
    }
  }
  std::string text = render_rubric_text(rubric);
  if (!repair && rng.uniform01() < b.proposal_garble) {
    if (rng.uniform01() < 0.5) {
      // Drop one middle-level guideline.
      const auto pos = text.find("        5: ");
      const auto eol = text.find('\n', pos);
      if (pos != std::string::npos) text.erase(pos, eol - pos + 1);
    } else {
      text.resize(text.size() * 2 / 3);
    }
  }
  return fmt::format("Here is the proposed rubric.\n\n```python\n# Citation-oriented rubric\n{}```\n", text);
}

// ---- revision

struct Block {
  std::string heading;
  std::vector<std::string> lines;
};

std::string revision_reply(const ChatRequest& req, Rng& rng, const StubBehaviour& b) {
  const std::string& prompt = last_user(req);
  const bool repair = prompt.find(kRepairNote) != std::string::npos;
  const std::string_view view(prompt);
  const std::string_view paper = between(view, "### **Context: Original Paper**\n", "\n\n---\n### **");

  std::vector<std::size_t> wanted;
  if (const auto at = prompt.find("EVALUATION_RUBRIC = "); at != std::string::npos) {
    try {
      const auto parsed = parse_structured_prefix(view, at + 20);
      if (parsed.value.is_map())
        for (const auto& [key, _] : parsed.value.as_map()) wanted.push_back(aspect_for_key(key));
    } catch (const Error&) {
    }
  }
  if (wanted.empty()) wanted.push_back(0);

  std::set<std::string> protected_headings;
  {
    const auto at = prompt.find("must not be edited:");
    if (at != std::string::npos) {
      std::size_t pos = prompt.find('\n', at);
      while (pos != std::string::npos && prompt.compare(pos, 3, "\n- ") == 0) {
        const auto eol = prompt.find('\n', pos + 1);
        protected_headings.insert(prompt.substr(pos + 3, eol == std::string::npos ? std::string::npos : eol - pos - 3));
        pos = eol;
      }
    }
  }

  // Candidate lines: body lines of unprotected blocks that occur once.
  std::vector<std::string> editable, locked;
  std::size_t start = 0;
  while (start <= paper.size()) {
    auto end = paper.find("\n\n", start);
    if (end == std::string_view::npos) end = paper.size();
    const std::string_view block = paper.substr(start, end - start);
    const auto nl = block.find('\n');
    const std::string heading(block.substr(0, nl));
    std::size_t ls = nl == std::string_view::npos ? block.size() : nl + 1;
    const bool locked_block = protected_headings.contains(heading);
    while (ls < block.size()) {
      auto le = block.find('\n', ls);
      if (le == std::string_view::npos) le = block.size();
      const std::string line(block.substr(ls, le - ls));
      if (!line.empty() && paper.find(line) == paper.rfind(line))
        (locked_block ? locked : editable).push_back(line);
      ls = le + 1;
    }
    if (end == paper.size()) break;
    start = end + 2;
  }

  std::string out = "THOUGHT: strengthen the weakest rubric items with local edits.\n\n";
  if (editable.empty()) return out + "No safe edit was found.";
  const bool garble = !repair && rng.uniform01() < b.edit_garble;
  const std::size_t blocks = std::min<std::size_t>(editable.size(), 1 + rng.uniform_index(2));
  std::vector<std::size_t> order(editable.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  for (std::size_t k = 0; k < blocks; ++k) {
    std::string search = editable[order[k]];
    const std::size_t aspect = wanted[rng.uniform_index(wanted.size())];
    std::string replace = search + " " + marker_sentence(aspect, rng.next_u64());
    if (garble && k == 0) {
      if (!locked.empty() && rng.uniform01() < 0.5) {
        search = locked[rng.uniform_index(locked.size())];
        replace = search + " (revised)";
      } else {
        search += " [paraphrased]";
      }
    }
    out += fmt::format("<<<<<<< SEARCH\n{}\n=======\n{}\n>>>>>>> REPLACE\n", search, replace);
  }
  return out;
}

// ---- judge

std::optional<double> mean_review_score(std::string_view text, std::size_t at) {
  try {
    const auto parsed = parse_structured_prefix(text, at);
    if (!parsed.value.is_map() || parsed.value.as_map().empty()) return std::nullopt;
    double sum = 0;
    for (const auto& [_, entry] : parsed.value.as_map()) {
      const auto* s = entry.is_map() ? entry.find("score") : nullptr;
      if (s == nullptr || !s->is_number()) return std::nullopt;
      sum += s->as_number();
    }
    return sum / static_cast<double>(parsed.value.as_map().size());
  } catch (const Error&) {
    return std::nullopt;
  }
}

double text_quality(std::string_view text) {
  double sum = 0;
  for (std::size_t a = 0; a < aspects().size(); ++a) sum += stub_score_mean(text, a);
  return sum / static_cast<double>(aspects().size());
}

std::string judge_reply(const ChatRequest& req, Rng& rng, const StubBehaviour& b) {
  const std::string& prompt = last_user(req);
  const std::string_view view(prompt);
  const auto a_at = view.rfind("\nPaper A:\nTitle: ");
  const auto b_at = view.rfind("\nPaper B:\nTitle: ");
  auto side_score = [&](std::size_t from, std::size_t to) {
    const auto rev = view.rfind("\nReviews: ", to);
    if (rev != std::string_view::npos && rev > from)
      if (auto m = mean_review_score(view, rev + 10)) return *m;
    const auto text_at = view.find("\nText: ", from);
    return text_quality(view.substr(text_at, rev == std::string_view::npos ? to - text_at : rev - text_at));
  };
  double gap = 0;
  if (a_at != std::string_view::npos && b_at != std::string_view::npos && a_at < b_at) {
    const auto tail = view.find("\n\nBased on the papers", b_at);
    gap = side_score(a_at, b_at) - side_score(b_at, tail == std::string_view::npos ? view.size() : tail);
  }
  const double p_a = 1.0 / (1.0 + std::exp(-b.judge_sharpness * gap));
  const bool a_wins = rng.uniform01() < p_a;
  const double margin = std::abs(gap);
  const int confidence = 1 + static_cast<int>(std::min(4.0, std::floor(margin * 2.0)));
  const int difference = std::clamp(static_cast<int>(std::ceil(margin * 3.0)), 1, 10);
  return fmt::format(
      "THOUGHT:\nThe reviews differ by {:.2f} points on average.\n\nDECISION:\n```json\n{{\n"
      "    \"confidence\": {},\n    \"reasoning\": \"{}\",\n    \"score_difference\": {},\n"
      "    \"winner\": \"{}\"\n}}\n```",
      gap, confidence, a_wins ? "Paper A is stronger on the rubric." : "Paper B is stronger on the rubric.",
      difference, a_wins ? "A" : "B");
}

}  // namespace

void StubProvider::register_handler(PromptKind kind, Handler handler) { handlers_[kind] = std::move(handler); }

std::string StubProvider::id() const { return fmt::format("stub:{}", seed_); }

std::string StubProvider::send(const ChatRequest& request, const std::string&) {
  const std::string hash = request_hash(id(), request);
  Rng rng(mix64(seed_ ^ std::stoull(hash.substr(0, 16), nullptr, 16)));
  const auto it = handlers_.find(classify_prompt(request));
  if (it == handlers_.end()) return "This stub has no reply for the request.";
  return it->second(request, rng);
}

void install_reviewer_handler(StubProvider& stub, const StubBehaviour& behaviour) {
  stub.register_handler(PromptKind::Reviewer,
                        [behaviour](const ChatRequest& r, Rng& rng) { return review_reply(r, rng, behaviour); });
}

void install_proposer_handler(StubProvider& stub, const StubBehaviour& behaviour) {
  stub.register_handler(PromptKind::Proposer,
                        [behaviour](const ChatRequest& r, Rng& rng) { return proposal_reply(r, rng, behaviour); });
}

void install_revision_handler(StubProvider& stub, const StubBehaviour& behaviour) {
  stub.register_handler(PromptKind::Revision,
                        [behaviour](const ChatRequest& r, Rng& rng) { return revision_reply(r, rng, behaviour); });
}

void install_judge_handler(StubProvider& stub, const StubBehaviour& behaviour) {
  stub.register_handler(PromptKind::Judge,
                        [behaviour](const ChatRequest& r, Rng& rng) { return judge_reply(r, rng, behaviour); });
}

std::shared_ptr<StubProvider> make_default_stub(std::uint64_t seed, const StubBehaviour& behaviour) {
  auto stub = std::make_shared<StubProvider>(seed);
  install_reviewer_handler(*stub, behaviour);
  install_proposer_handler(*stub, behaviour);
  install_revision_handler(*stub, behaviour);
  install_judge_handler(*stub, behaviour);
  return stub;
}

}  // namespace apres
