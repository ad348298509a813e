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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "apres/error.hpp"

namespace apres {

enum class CorpusErrc {
  DuplicateId,
  SchemaViolation,
  NegativeCitations,
  NoScores,
  EmptyCorpus,
  UnknownPaper,
};
constexpr std::string_view module_name(CorpusErrc) { return "corpus"; }
using CorpusError = ModuleError<CorpusErrc>;

enum class SectionKind { Text, Table, FigureCaption };
enum class Venue { ICLR, NeurIPS };
enum class Decision { Oral, Spotlight, Poster, Reject, Withdrawn };
enum class Stratum { ClearAccept, Borderline, ClearReject };
enum class SplitName { Train, Validation, Test };

std::string_view to_string(SectionKind kind);
std::string_view to_string(Venue venue);
std::string_view to_string(Decision decision);
std::string_view to_string(Stratum stratum);
std::string_view to_string(SplitName split);

struct Section {
  SectionKind kind = SectionKind::Text;
  std::string heading;
  std::string body;
  // Set from kind at ingest and carried with the section from then on.
  bool is_protected = false;

  bool operator==(const Section&) const = default;
};

// Builds a section with the protection flag derived from its kind.
Section make_section(SectionKind kind, std::string heading, std::string body);

struct Paper {
  std::string id;
  Venue venue = Venue::ICLR;
  int year = 0;
  std::string title;
  std::vector<Section> sections;
  std::vector<double> human_scores;
  Decision decision = Decision::Reject;
  std::int64_t citations_12mo = 0;

  bool operator==(const Paper&) const = default;
};

// Record <-> object mapping used by the corpus file and by revision drafts.
nlohmann::ordered_json paper_to_json(const Paper& paper);
Paper paper_from_json(const nlohmann::ordered_json& record, std::size_t line_no = 0);
std::string paper_to_line(const Paper& paper);

// Validated, immutable collection in file order.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Paper> papers);

  const std::vector<Paper>& papers() const noexcept { return papers_; }
  std::size_t size() const noexcept { return papers_.size(); }
  bool empty() const noexcept { return papers_.empty(); }
  const Paper& at(std::string_view id) const;
  bool contains(std::string_view id) const;

 private:
  std::vector<Paper> papers_;
  std::unordered_map<std::string, std::size_t> index_;
};

Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

double mean_human_score(const Paper& paper);
Stratum classify_stratum(const Paper& paper);

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  const std::vector<std::string>& ids(SplitName name) const;
};

// Seeded Fisher-Yates shuffle, then floor(0.8 n) / floor(0.1 n) / remainder.
CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed);

std::string normalize_newlines(std::string_view text);

// Byte offsets of one section inside the rendered paper text.
struct SectionLayout {
  std::size_t block_start = 0;  // heading line (or body when the heading is empty)
  std::size_t body_start = 0;
  std::size_t body_end = 0;
};

// Sections rendered as "heading\nbody" blocks joined by blank lines. This is
// the text reviewers read and the text edit scripts are matched against.
std::string render_sections(const std::vector<Section>& sections, std::vector<SectionLayout>* layout = nullptr);
std::string paper_text(const Paper& paper);

}  // namespace apres
