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
#include <span>
#include <string_view>
#include <vector>

#include "apres/corpus.hpp"

namespace apres {

// A latent quality dimension of the synthetic world. Papers express it in
// their text through the marker word; the stub reviewer counts markers.
struct Aspect {
  std::string_view name;
  std::string_view marker;
  std::span<const std::string_view> cues;  // key fragments that select this aspect
  double citation_weight;                  // effect on log expected citations
};

std::span<const Aspect> aspects();

// Aspect a rubric key is taken to measure: the first aspect whose cue occurs
// in the key, otherwise a hash of the key.
std::size_t aspect_for_key(std::string_view key);

// Whole-word occurrences of `word` in `text`.
std::size_t count_word(std::string_view text, std::string_view word);

// Mean score the stub reviewer gives an item of aspect `a` on `text`.
double stub_score_mean(std::string_view text, std::size_t a);

// One sentence carrying the aspect's marker word; `variant` picks the wording.
std::string marker_sentence(std::size_t a, std::uint64_t variant);

struct SyntheticOptions {
  std::size_t papers = 200;
  std::uint64_t seed = 1;
  double base_log_mean = 1.5;
  double dispersion = 0.5;  // NB2 alpha of the citation draw
  double withdrawn_rate = 0.05;
};

struct SyntheticPaper {
  Paper paper;
  std::vector<double> latent;  // one value per aspect
  double citation_mean = 0;
};

std::vector<SyntheticPaper> synthetic_papers(const SyntheticOptions& options);
Corpus synthetic_corpus(const SyntheticOptions& options);

}  // namespace apres
