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

#include "apres/corpus.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "apres/rng.hpp"

namespace apres {

using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(std::size_t line_no, const std::string& reason) {
  throw CorpusError(CorpusErrc::SchemaViolation, fmt::format("line {}: {}", line_no, reason));
}

const ordered_json& require(const ordered_json& record, const char* field, std::size_t line_no) {
  auto it = record.find(field);
  if (it == record.end()) schema_error(line_no, fmt::format("missing field '{}'", field));
  return *it;
}

std::string require_string(const ordered_json& record, const char* field, std::size_t line_no) {
  const auto& v = require(record, field, line_no);
  if (!v.is_string()) schema_error(line_no, fmt::format("field '{}' must be a string", field));
  return normalize_newlines(v.get_ref<const std::string&>());
}

SectionKind parse_kind(const std::string& s, std::size_t line_no) {
  if (s == "text") return SectionKind::Text;
  if (s == "table") return SectionKind::Table;
  if (s == "figure_caption") return SectionKind::FigureCaption;
  schema_error(line_no, fmt::format("unknown section kind '{}'", s));
}

Venue parse_venue(const std::string& s, std::size_t line_no) {
  if (s == "ICLR") return Venue::ICLR;
  if (s == "NeurIPS") return Venue::NeurIPS;
  schema_error(line_no, fmt::format("unknown venue '{}'", s));
}

Decision parse_decision(const std::string& s, std::size_t line_no) {
  if (s == "oral") return Decision::Oral;
  if (s == "spotlight") return Decision::Spotlight;
  if (s == "poster") return Decision::Poster;
  if (s == "reject") return Decision::Reject;
  if (s == "withdrawn") return Decision::Withdrawn;
  schema_error(line_no, fmt::format("unknown decision '{}'", s));
}

}  // namespace

std::string_view to_string(SectionKind kind) {
  switch (kind) {
    case SectionKind::Text: return "text";
    case SectionKind::Table: return "table";
    case SectionKind::FigureCaption: return "figure_caption";
  }
  return "text";
}

std::string_view to_string(Venue venue) { return venue == Venue::ICLR ? "ICLR" : "NeurIPS"; }

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::Oral: return "oral";
    case Decision::Spotlight: return "spotlight";
    case Decision::Poster: return "poster";
    case Decision::Reject: return "reject";
    case Decision::Withdrawn: return "withdrawn";
  }
  return "reject";
}

std::string_view to_string(Stratum stratum) {
  switch (stratum) {
    case Stratum::ClearAccept: return "clear-accept";
    case Stratum::Borderline: return "borderline";
    case Stratum::ClearReject: return "clear-reject";
  }
  return "borderline";
}

std::string_view to_string(SplitName split) {
  switch (split) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "validation";
    case SplitName::Test: return "test";
  }
  return "train";
}

std::string normalize_newlines(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out += '\n';
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      out += text[i];
    }
  }
  return out;
}

std::string render_sections(const std::vector<Section>& sections, std::vector<SectionLayout>* layout) {
  std::string out;
  if (layout) layout->clear();
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i > 0) out += "\n\n";
    SectionLayout l;
    l.block_start = out.size();
    if (!sections[i].heading.empty()) {
      out += sections[i].heading;
      out += '\n';
    }
    l.body_start = out.size();
    out += sections[i].body;
    l.body_end = out.size();
    if (layout) layout->push_back(l);
  }
  return out;
}

std::string paper_text(const Paper& paper) { return render_sections(paper.sections); }

Section make_section(SectionKind kind, std::string heading, std::string body) {
  return Section{kind, std::move(heading), std::move(body), kind == SectionKind::Table};
}

ordered_json paper_to_json(const Paper& paper) {
  ordered_json sections = ordered_json::array();
  for (const auto& s : paper.sections) {
    sections.push_back({{"kind", to_string(s.kind)}, {"heading", s.heading}, {"body", s.body}});
  }
  return ordered_json{{"id", paper.id},
                      {"venue", to_string(paper.venue)},
                      {"year", paper.year},
                      {"title", paper.title},
                      {"sections", std::move(sections)},
                      {"human_scores", paper.human_scores},
                      {"decision", to_string(paper.decision)},
                      {"citations_12mo", paper.citations_12mo}};
}

std::string paper_to_line(const Paper& paper) { return paper_to_json(paper).dump(); }

Paper paper_from_json(const ordered_json& record, std::size_t line_no) {
  if (!record.is_object()) schema_error(line_no, "record must be an object");
  Paper p;
  p.id = require_string(record, "id", line_no);
  if (p.id.empty()) schema_error(line_no, "empty id");
  p.venue = parse_venue(require_string(record, "venue", line_no), line_no);

  const auto& year = require(record, "year", line_no);
  if (!year.is_number_integer()) schema_error(line_no, "field 'year' must be an integer");
  p.year = year.get<int>();

  p.title = require_string(record, "title", line_no);

  const auto& sections = require(record, "sections", line_no);
  if (!sections.is_array()) schema_error(line_no, "field 'sections' must be an array");
  for (const auto& s : sections) {
    if (!s.is_object()) schema_error(line_no, "section must be an object");
    Section section = make_section(parse_kind(require_string(s, "kind", line_no), line_no),
                                   require_string(s, "heading", line_no),
                                   require_string(s, "body", line_no));
    if (section.body.empty()) schema_error(line_no, "section body must be non-empty");
    p.sections.push_back(std::move(section));
  }

  const auto& scores = require(record, "human_scores", line_no);
  if (!scores.is_array()) schema_error(line_no, "field 'human_scores' must be an array");
  for (const auto& s : scores) {
    if (!s.is_number()) schema_error(line_no, "human score must be a number");
    const double v = s.get<double>();
    if (!std::isfinite(v)) schema_error(line_no, "human score must be finite");
    p.human_scores.push_back(v);
  }

  p.decision = parse_decision(require_string(record, "decision", line_no), line_no);
  if (p.human_scores.empty() && p.decision != Decision::Withdrawn) {
    schema_error(line_no, "human_scores may be empty only for withdrawn papers");
  }

  const auto& cites = require(record, "citations_12mo", line_no);
  if (!cites.is_number_integer()) schema_error(line_no, "field 'citations_12mo' must be an integer");
  p.citations_12mo = cites.get<std::int64_t>();
  if (p.citations_12mo < 0) {
    throw CorpusError(CorpusErrc::NegativeCitations,
                      fmt::format("paper '{}' has negative citation count {}", p.id, p.citations_12mo));
  }
  return p;
}

Corpus::Corpus(std::vector<Paper> papers) : papers_(std::move(papers)) {
  for (std::size_t i = 0; i < papers_.size(); ++i) {
    if (!index_.emplace(papers_[i].id, i).second) {
      throw CorpusError(CorpusErrc::DuplicateId, fmt::format("duplicate id '{}'", papers_[i].id));
    }
  }
}

const Paper& Corpus::at(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw CorpusError(CorpusErrc::UnknownPaper, fmt::format("no paper with id '{}'", id));
  }
  return papers_[it->second];
}

bool Corpus::contains(std::string_view id) const { return index_.contains(std::string(id)); }

Corpus parse_corpus(std::istream& in) {
  std::vector<Paper> papers;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      schema_error(line_no, fmt::format("malformed record ({})", e.what()));
    }
    Paper p = paper_from_json(record, line_no);
    if (auto [it, inserted] = seen.emplace(p.id, line_no); !inserted) {
      throw CorpusError(CorpusErrc::DuplicateId,
                        fmt::format("duplicate id '{}' on lines {} and {}", p.id, it->second, line_no));
    }
    papers.push_back(std::move(p));
  }
  return Corpus(std::move(papers));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError(CorpusErrc::SchemaViolation, fmt::format("cannot open corpus file {}", path.string()));
  }
  return parse_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& p : corpus.papers()) out << paper_to_line(p) << '\n';
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  write_corpus(out, corpus);
}

double mean_human_score(const Paper& paper) {
  if (paper.human_scores.empty()) {
    throw CorpusError(CorpusErrc::NoScores, fmt::format("paper '{}' has no human scores", paper.id));
  }
  return std::accumulate(paper.human_scores.begin(), paper.human_scores.end(), 0.0) /
         static_cast<double>(paper.human_scores.size());
}

Stratum classify_stratum(const Paper& paper) {
  const double m = mean_human_score(paper);
  // Strict comparisons: a mean sitting exactly on a threshold is Borderline.
  const double accept_above = paper.venue == Venue::ICLR ? 6.0 : 5.0;
  const double reject_below = paper.venue == Venue::ICLR ? 4.0 : 3.0;
  if (m > accept_above) return Stratum::ClearAccept;
  if (m < reject_below) return Stratum::ClearReject;
  return Stratum::Borderline;
}

const std::vector<std::string>& CorpusSplit::ids(SplitName name) const {
  switch (name) {
    case SplitName::Train: return train;
    case SplitName::Validation: return validation;
    case SplitName::Test: return test;
  }
  return train;
}

CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw CorpusError(CorpusErrc::EmptyCorpus, "cannot split an empty corpus");
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& p : corpus.papers()) ids.push_back(p.id);

  Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
  }

  const std::size_t n = ids.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  CorpusSplit split;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                          ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return split;
}

}  // namespace apres
