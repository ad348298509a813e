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

#include "apres/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "apres/rng.hpp"

namespace apres {

namespace {

constexpr std::string_view kNoveltyCues[] = {"novel", "origin", "new"};
constexpr std::string_view kClarityCues[] = {"clar", "writ", "read"};
constexpr std::string_view kRigorCues[] = {"rigor", "method", "sound", "technical", "experiment"};
constexpr std::string_view kSignificanceCues[] = {"signif", "impact", "relevan", "importan", "influen"};
constexpr std::string_view kReproCues[] = {"reproduc", "code", "open", "artifact"};
constexpr std::string_view kScopeCues[] = {"scope", "general", "breadth"};
constexpr std::string_view kContextCues[] = {"related", "literature", "context", "prior"};
constexpr std::string_view kPresentationCues[] = {"present", "figure", "visual", "structure"};

constexpr std::array<Aspect, 8> kAspects = {{
    {"novelty", "unprecedented", kNoveltyCues, 0.45},
    {"clarity", "lucid", kClarityCues, 0.15},
    {"rigor", "rigorous", kRigorCues, 0.25},
    {"significance", "consequential", kSignificanceCues, 0.40},
    {"reproducibility", "reproducible", kReproCues, 0.10},
    {"scope", "broad", kScopeCues, 0.0},
    {"related_work", "contextualized", kContextCues, 0.0},
    {"presentation", "polished", kPresentationCues, 0.0},
}};

constexpr std::string_view kMarkerForms[] = {
    "The treatment in this part is {}.",
    "We consider the resulting analysis {}.",
    "Reviewers of early drafts called this step {}.",
    "Each component was designed to be {}.",
    "The evidence we collect here is {}.",
};

constexpr std::string_view kTopics[] = {"graph learning", "sparse attention", "offline reinforcement learning",
                                        "protein folding", "neural compression", "causal discovery",
                                        "federated optimization", "speech synthesis", "program repair",
                                        "uncertainty estimation", "vision transformers", "time series forecasting"};
constexpr std::string_view kMethods[] = {"a contrastive objective", "a hierarchical prior", "low-rank adapters",
                                         "an implicit solver", "a mixture of experts", "a learned curriculum",
                                         "a diffusion sampler", "a message passing scheme"};
constexpr std::string_view kDatasets[] = {"ImageNet", "CIFAR-100", "WikiText", "QM9", "Atari", "LibriSpeech",
                                          "OGB", "MuJoCo"};
constexpr std::string_view kFiller[] = {
    "We describe the setting and the assumptions it relies on.",
    "The approach builds on standard components with a few changes.",
    "A small ablation isolates the effect of each design choice.",
    "We report means over five seeds.",
    "Hyperparameters follow common practice for this benchmark.",
    "Limitations are discussed at the end of the section.",
    "The notation follows the previous section.",
    "Training takes under a day on a single accelerator.",
};

template <typename T, std::size_t N>
std::string_view pick(const T (&list)[N], Rng& rng) {
  return list[rng.uniform_index(N)];
}

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

std::span<const Aspect> aspects() { return kAspects; }

std::size_t aspect_for_key(std::string_view key) {
  for (std::size_t a = 0; a < kAspects.size(); ++a)
    for (auto cue : kAspects[a].cues)
      if (key.find(cue) != std::string_view::npos) return a;
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : key) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return static_cast<std::size_t>(mix64(h) % kAspects.size());
}

std::size_t count_word(std::string_view text, std::string_view word) {
  if (word.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !is_word_char(text[pos - 1]);
    const auto end = pos + word.size();
    const bool right = end >= text.size() || !is_word_char(text[end]);
    n += left && right;
  }
  return n;
}

double stub_score_mean(std::string_view text, std::size_t a) {
  const double c = static_cast<double>(count_word(text, kAspects.at(a).marker));
  return std::min(10.0, 1.5 + 1.3 * c);
}

std::string marker_sentence(std::size_t a, std::uint64_t variant) {
  return fmt::format(fmt::runtime(kMarkerForms[variant % std::size(kMarkerForms)]), kAspects.at(a).marker);
}

std::vector<SyntheticPaper> synthetic_papers(const SyntheticOptions& options) {
  Rng rng(mix64(options.seed ^ 0x5e7a11dULL));
  std::vector<SyntheticPaper> out;
  out.reserve(options.papers);
  for (std::size_t i = 0; i < options.papers; ++i) {
    SyntheticPaper sp;
    Paper& p = sp.paper;
    p.id = fmt::format("syn-{:05d}", i);
    p.venue = rng.uniform01() < 0.5 ? Venue::ICLR : Venue::NeurIPS;
    p.year = 2021 + static_cast<int>(rng.uniform_index(4));
    const auto topic = pick(kTopics, rng);
    const auto method = pick(kMethods, rng);
    const auto dataset = pick(kDatasets, rng);
    p.title = fmt::format("{} with {} (study {})", topic, method, i);
    p.title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p.title[0])));

    double log_mean = options.base_log_mean;
    std::vector<std::size_t> counts(kAspects.size());
    for (std::size_t a = 0; a < kAspects.size(); ++a) {
      const double q = rng.normal();
      sp.latent.push_back(q);
      log_mean += kAspects[a].citation_weight * q;
      counts[a] = static_cast<std::size_t>(std::min<std::int64_t>(rng.poisson(std::exp(0.4 + 0.7 * q)), 8));
    }
    sp.citation_mean = std::exp(log_mean);
    p.citations_12mo = rng.negative_binomial(sp.citation_mean, options.dispersion);

    // Four text sections receive the marker sentences at random.
    std::array<std::vector<std::string>, 4> sentences;
    sentences[0].push_back(fmt::format("We study {} using {} on {}.", topic, method, dataset));
    sentences[1].push_back(fmt::format("Progress on {} has been limited by data and compute.", topic));
    sentences[2].push_back(fmt::format("Our model combines {} with a simple training loop.", method));
    sentences[3].push_back(fmt::format("We conclude with open questions about {}.", topic));
    for (auto& s : sentences)
      for (int k = 0; k < 2; ++k) s.emplace_back(pick(kFiller, rng));
    for (std::size_t a = 0; a < kAspects.size(); ++a)
      for (std::size_t c = 0; c < counts[a]; ++c)
        sentences[rng.uniform_index(4)].push_back(marker_sentence(a, rng.next_u64()));
    auto body = [&](std::size_t s) {
      auto& list = sentences[s];
      for (std::size_t k = list.size(); k > 2; --k) std::swap(list[k - 1], list[1 + rng.uniform_index(k - 1)]);
      std::string text;
      for (std::size_t k = 0; k < list.size(); ++k) {
        if (k > 0) text += (k % 3 == 0) ? '\n' : ' ';
        text += list[k];
      }
      return text;
    };
    p.sections.push_back(make_section(SectionKind::Text, "Abstract", body(0)));
    p.sections.push_back(make_section(SectionKind::Text, "Introduction", body(1)));
    p.sections.push_back(make_section(SectionKind::Text, "Method", body(2)));
    p.sections.push_back(make_section(
        SectionKind::Table, "Table 1: Main results",
        fmt::format("| Method | {} |\n|---|---|\n| Baseline | {:.1f} |\n| Ours | {:.1f} |", dataset,
                    50.0 + 20.0 * rng.uniform01(), 55.0 + 25.0 * rng.uniform01())));
    p.sections.push_back(make_section(SectionKind::FigureCaption, "Figure 1",
                                      fmt::format("Overview of the pipeline for {}.", topic)));
    p.sections.push_back(make_section(SectionKind::Text, "Conclusion", body(3)));

    if (rng.uniform01() < options.withdrawn_rate) {
      p.decision = Decision::Withdrawn;
    } else {
      const double centre = p.venue == Venue::ICLR ? 5.0 : 4.0;
      const double merit = 0.5 * sp.latent[0] + 0.5 * sp.latent[2] + 0.3 * sp.latent[1] + 0.3 * sp.latent[3];
      const double hi = p.venue == Venue::ICLR ? 10.0 : 9.0;
      double sum = 0;
      for (int r = 0; r < 3; ++r) {
        const double s = std::clamp(std::round(centre + 1.2 * merit + rng.normal()), 1.0, hi);
        p.human_scores.push_back(s);
        sum += s;
      }
      const double m = sum / 3.0;
      const double accept = p.venue == Venue::ICLR ? 5.5 : 4.5;
      if (m >= accept + 2.0)
        p.decision = Decision::Oral;
      else if (m >= accept + 1.0)
        p.decision = Decision::Spotlight;
      else if (m >= accept)
        p.decision = Decision::Poster;
      else
        p.decision = Decision::Reject;
    }
    out.push_back(std::move(sp));
  }
  return out;
}

Corpus synthetic_corpus(const SyntheticOptions& options) {
  std::vector<Paper> papers;
  for (auto& sp : synthetic_papers(options)) papers.push_back(std::move(sp.paper));
  return Corpus(std::move(papers));
}

}  // namespace apres
