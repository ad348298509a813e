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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apres/corpus.hpp"
#include "apres/error.hpp"
#include "apres/gateway.hpp"

namespace apres {

enum class RankingErrc {
  MalformedVerdict,
  RangeViolation,
  VolatilityNonConvergence,
  InvalidInput,
  Empty,
  IdSetMismatch,
  TooManyFailures,
};
constexpr std::string_view module_name(RankingErrc) { return "ranking"; }
using RankingError = ModuleError<RankingErrc>;

inline constexpr double kGlickoScale = 173.7178;
inline constexpr double kInitialRating = 1500.0;
inline constexpr double kMaxRd = 350.0;
inline constexpr double kInitialVolatility = 0.06;
inline constexpr double kDefaultTau = 0.5;

struct GlickoState {
  double rating = kInitialRating;
  double rd = kMaxRd;
  double volatility = kInitialVolatility;
  bool operator==(const GlickoState&) const = default;
};

enum class Outcome { Loss, Win };

struct GlickoOpponent {
  GlickoState state;
  Outcome outcome = Outcome::Win;
};

// One rating period against the listed opponents.
GlickoState glicko_update(const GlickoState& player, std::span<const GlickoOpponent> opponents,
                          double tau = kDefaultTau);

enum class Winner { A, B };

struct MatchResult {
  std::string a;
  std::string b;
  Winner winner = Winner::A;
  int confidence = 1;
  int score_difference = 1;
  std::string reasoning;
  bool operator==(const MatchResult&) const = default;
};

// Reads the fenced decision block of a judge reply.
MatchResult parse_verdict(std::string_view reply, std::string a, std::string b);

struct JudgeOptions {
  int max_tokens = 2048;
};

MatchResult judge_pair(const Paper& paper_a, const Paper& paper_b, std::string_view reviews_a,
                       std::string_view reviews_b, std::string_view review_instruction_form, Gateway& gateway,
                       const JudgeOptions& options = {});

struct TournamentOptions {
  std::size_t budget = 20000;
  std::uint64_t seed = 0;
  double tau = kDefaultTau;
  std::size_t window = 0;  // early-stop window in matches; 0 means the number of papers
  double stop_delta = 1.0;
  double max_skip_fraction = 0.05;
  std::size_t workers = 4;
  std::size_t batch = 64;  // pairs judged ahead of the rating writer
};

struct Rating {
  GlickoState state;
  std::size_t matches = 0;
};

struct TournamentResult {
  std::map<std::string, Rating> ratings;
  std::vector<MatchResult> matches;
  std::size_t attempted = 0;
  std::size_t skipped = 0;
  bool early_stopped = false;
};

// Judge of the pair (ids[a], ids[b]) with a shown first. May throw
// apres::Error to mark the match as skipped.
using PairJudge = std::function<MatchResult(std::size_t a, std::size_t b)>;

TournamentResult run_tournament(std::span<const std::string> ids, const PairJudge& judge,
                                const TournamentOptions& options);

// Tournament with the LLM judge; reviews[i] belongs to papers[i].
TournamentResult run_tournament(std::span<const Paper> papers, std::span<const std::string> reviews,
                                std::string_view review_instruction_form, Gateway& gateway,
                                const TournamentOptions& options, const JudgeOptions& judge_options = {});

enum class Verdict { Accept, Reject };
std::string_view to_string(Verdict v);

struct DecisionVector {
  std::map<std::string, Verdict> decisions;
  bool operator==(const DecisionVector&) const = default;
};

std::size_t accept_count(std::size_t n, double quantile);
DecisionVector threshold_decisions(const std::map<std::string, double>& ratings, double quantile);
double disagreement_rate(const DecisionVector& a, const DecisionVector& b);

struct LabeledRun {
  std::string label;
  std::uint64_t seed = 0;
  DecisionVector decisions;
};

// dr[i][j] is the mean disagreement over run pairs with labels i and j; the
// diagonal uses rerun pairs with the same label and is empty without them.
struct ConsistencyMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::optional<double>>> dr;
  // Rerun pairs that shared a seed; their agreement is determinism, not
  // consistency, and reports say so.
  std::vector<std::string> same_seed_reruns;
};

ConsistencyMatrix consistency_matrix(std::span<const LabeledRun> runs);

std::string consistency_csv(const ConsistencyMatrix& m);
std::string ratings_csv(const TournamentResult& result);
std::string decisions_csv(const DecisionVector& d);

}  // namespace apres
