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

#include "apres/ranking.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "apres/parallel.hpp"
#include "apres/prompts.hpp"
#include "apres/rng.hpp"
#include "apres/structured.hpp"

namespace apres {

namespace {

constexpr double kVolatilityEpsilon = 1e-6;
constexpr int kVolatilityMaxIterations = 100;

double g_of(double phi) { return 1.0 / std::sqrt(1.0 + 3.0 * phi * phi / (std::numbers::pi * std::numbers::pi)); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

int integer_field(const StructuredValue& verdict, std::string_view name, int lo, int hi) {
  const StructuredValue* v = verdict.find(name);
  if (v == nullptr) throw RankingError(RankingErrc::MalformedVerdict, fmt::format("verdict lacks \"{}\"", name));
  double x = 0;
  if (v->is_number()) {
    x = v->as_number();
  } else if (v->is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = trim(v->as_string());
      x = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw RankingError(RankingErrc::MalformedVerdict, fmt::format("\"{}\" is not a number", name));
    }
  } else {
    throw RankingError(RankingErrc::MalformedVerdict, fmt::format("\"{}\" is not a number", name));
  }
  if (x != std::floor(x) || x < lo || x > hi)
    throw RankingError(RankingErrc::RangeViolation,
                       fmt::format("\"{}\" = {} is not an integer in [{}, {}]", name, x, lo, hi));
  return static_cast<int>(x);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

GlickoState glicko_update(const GlickoState& player, std::span<const GlickoOpponent> opponents, double tau) {
  if (!(tau > 0)) throw RankingError(RankingErrc::InvalidInput, fmt::format("tau must be positive, got {}", tau));
  const double mu = (player.rating - kInitialRating) / kGlickoScale;
  const double phi = player.rd / kGlickoScale;
  const double sigma = player.volatility;
  if (opponents.empty()) {
    GlickoState out = player;
    out.rd = std::min(kMaxRd, kGlickoScale * std::sqrt(phi * phi + sigma * sigma));
    return out;
  }

  double v_inv = 0;
  double sum = 0;
  for (const auto& o : opponents) {
    const double mu_j = (o.state.rating - kInitialRating) / kGlickoScale;
    const double g = g_of(o.state.rd / kGlickoScale);
    const double e = 1.0 / (1.0 + std::exp(-g * (mu - mu_j)));
    const double s = o.outcome == Outcome::Win ? 1.0 : 0.0;
    v_inv += g * g * e * (1.0 - e);
    sum += g * (s - e);
  }
  const double v = 1.0 / v_inv;
  const double delta = v * sum;

  const double a = std::log(sigma * sigma);
  const double phi2 = phi * phi;
  auto f = [&](double x) {
    const double ex = std::exp(x);
    const double d = phi2 + v + ex;
    return ex * (delta * delta - phi2 - v - ex) / (2.0 * d * d) - (x - a) / (tau * tau);
  };
  double A = a;
  double B = 0;
  if (delta * delta > phi2 + v) {
    B = std::log(delta * delta - phi2 - v);
  } else {
    int k = 1;
    while (f(a - k * tau) < 0) {
      if (++k > kVolatilityMaxIterations)
        throw RankingError(RankingErrc::VolatilityNonConvergence, "volatility bracket not found");
    }
    B = a - k * tau;
  }
  double fA = f(A);
  double fB = f(B);
  int iterations = 0;
  while (std::abs(B - A) > kVolatilityEpsilon) {
    if (++iterations > kVolatilityMaxIterations)
      throw RankingError(RankingErrc::VolatilityNonConvergence,
                         fmt::format("volatility search did not converge in {} iterations", kVolatilityMaxIterations));
    const double C = A + (A - B) * fA / (fB - fA);
    const double fC = f(C);
    if (fC * fB <= 0) {
      A = B;
      fA = fB;
    } else {
      fA /= 2.0;
    }
    B = C;
    fB = fC;
  }
  const double sigma_new = std::exp(A / 2.0);
  const double phi_star = std::sqrt(phi2 + sigma_new * sigma_new);
  const double phi_new = 1.0 / std::sqrt(1.0 / (phi_star * phi_star) + 1.0 / v);
  const double mu_new = mu + phi_new * phi_new * sum;

  GlickoState out;
  out.rating = kGlickoScale * mu_new + kInitialRating;
  out.rd = std::min(kMaxRd, kGlickoScale * phi_new);
  out.volatility = sigma_new;
  return out;
}

MatchResult parse_verdict(std::string_view reply, std::string a, std::string b) {
  std::string body;
  try {
    body = extract_fenced_block(reply, "json");
  } catch (const GatewayError&) {
    const auto from = reply.find("DECISION:");
    const auto open = reply.find('{', from == std::string_view::npos ? 0 : from);
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
      throw RankingError(RankingErrc::MalformedVerdict, "reply has no decision block");
    body = std::string(reply.substr(open, close - open + 1));
  }
  StructuredValue verdict;
  try {
    verdict = parse_structured(body);
  } catch (const StructuredError& e) {
    throw RankingError(RankingErrc::MalformedVerdict, fmt::format("decision block does not parse: {}", e.what()));
  }
  if (!verdict.is_map()) throw RankingError(RankingErrc::MalformedVerdict, "decision block is not an object");

  MatchResult m;
  m.a = std::move(a);
  m.b = std::move(b);
  const StructuredValue* w = verdict.find("winner");
  if (w == nullptr || !w->is_string()) throw RankingError(RankingErrc::MalformedVerdict, "verdict lacks \"winner\"");
  std::string winner = trim(w->as_string());
  if (winner.starts_with("Paper ")) winner = trim(std::string_view(winner).substr(6));
  if (winner == "A" || winner == "a")
    m.winner = Winner::A;
  else if (winner == "B" || winner == "b")
    m.winner = Winner::B;
  else
    throw RankingError(RankingErrc::RangeViolation, fmt::format("winner \"{}\" is neither A nor B", winner));
  m.confidence = integer_field(verdict, "confidence", 1, 5);
  m.score_difference = integer_field(verdict, "score_difference", 1, 10);
  if (const auto* r = verdict.find("reasoning"); r != nullptr && r->is_string()) m.reasoning = r->as_string();
  return m;
}

MatchResult judge_pair(const Paper& paper_a, const Paper& paper_b, std::string_view reviews_a,
                       std::string_view reviews_b, std::string_view review_instruction_form, Gateway& gateway,
                       const JudgeOptions& options) {
  if (paper_a.id == paper_b.id)
    throw RankingError(RankingErrc::InvalidInput, fmt::format("paper {} cannot be judged against itself", paper_a.id));
  const std::string text_a = paper_text(paper_a);
  const std::string text_b = paper_text(paper_b);
  JudgePromptInput in;
  in.review_instruction_form = review_instruction_form;
  in.paper_a_id = paper_a.id;
  in.paper_a_text = text_a;
  in.paper_a_reviews = reviews_a;
  in.paper_b_id = paper_b.id;
  in.paper_b_text = text_b;
  in.paper_b_reviews = reviews_b;
  const auto req = gateway.make_request({}, render_judge_prompt(in), 0.0, options.max_tokens);
  return parse_verdict(gateway.complete(req).text, paper_a.id, paper_b.id);
}

TournamentResult run_tournament(std::span<const std::string> ids, const PairJudge& judge,
                                const TournamentOptions& options) {
  const std::size_t n = ids.size();
  if (n < 2) throw RankingError(RankingErrc::InvalidInput, "a tournament needs at least two papers");
  std::set<std::string_view> unique(ids.begin(), ids.end());
  if (unique.size() != n) throw RankingError(RankingErrc::InvalidInput, "paper ids must be unique");

  TournamentResult result;
  std::vector<Rating> ratings(n);
  Rng rng(options.seed);
  const std::size_t window = options.window == 0 ? n : options.window;
  const auto max_skips = static_cast<std::size_t>(std::floor(options.max_skip_fraction * static_cast<double>(options.budget)));
  std::deque<double> recent;
  std::pair<std::size_t, std::size_t> last{n, n};

  struct Pending {
    std::size_t a, b;
    std::optional<MatchResult> match;
    std::string error;
  };
  std::size_t issued = 0;
  bool stop = false;
  while (!stop && issued < options.budget) {
    // Pairs never depend on outcomes, so a batch can be judged concurrently.
    const std::size_t count = std::min(std::max<std::size_t>(options.batch, 1), options.budget - issued);
    std::vector<Pending> batch(count);
    for (auto& p : batch) {
      std::size_t i = 0, j = 0;
      do {
        i = rng.uniform_index(n);
        j = rng.uniform_index(n - 1);
        if (j >= i) ++j;
      } while (n > 2 && std::minmax(i, j) == std::minmax(last.first, last.second));
      last = {i, j};
      if (rng.uniform01() < 0.5) std::swap(i, j);
      p.a = i;
      p.b = j;
    }
    issued += count;
    parallel_for(count, options.workers, [&](std::size_t k) {
      try {
        batch[k].match = judge(batch[k].a, batch[k].b);
      } catch (const Error& e) {
        batch[k].error = e.what();
      }
    });
    for (auto& p : batch) {
      ++result.attempted;
      if (!p.match) {
        if (++result.skipped > max_skips)
          throw RankingError(RankingErrc::TooManyFailures,
                             fmt::format("{} judge failures exceed the cap of {} (last: {})", result.skipped,
                                         max_skips, p.error));
        continue;
      }
      const bool a_won = p.match->winner == Winner::A;
      const GlickoState sa = ratings[p.a].state;
      const GlickoState sb = ratings[p.b].state;
      const GlickoOpponent vs_b[] = {{sb, a_won ? Outcome::Win : Outcome::Loss}};
      const GlickoOpponent vs_a[] = {{sa, a_won ? Outcome::Loss : Outcome::Win}};
      ratings[p.a].state = glicko_update(sa, vs_b, options.tau);
      ratings[p.b].state = glicko_update(sb, vs_a, options.tau);
      ++ratings[p.a].matches;
      ++ratings[p.b].matches;
      result.matches.push_back(std::move(*p.match));
      recent.push_back(std::max(std::abs(ratings[p.a].state.rating - sa.rating),
                                std::abs(ratings[p.b].state.rating - sb.rating)));
      if (recent.size() > window) recent.pop_front();
      if (recent.size() == window && *std::max_element(recent.begin(), recent.end()) < options.stop_delta) {
        result.early_stopped = true;
        stop = true;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) result.ratings[ids[i]] = ratings[i];
  return result;
}

TournamentResult run_tournament(std::span<const Paper> papers, std::span<const std::string> reviews,
                                std::string_view review_instruction_form, Gateway& gateway,
                                const TournamentOptions& options, const JudgeOptions& judge_options) {
  if (papers.size() != reviews.size())
    throw RankingError(RankingErrc::InvalidInput, "every paper needs its reviews");
  for (std::size_t i = 0; i < papers.size(); ++i)
    if (reviews[i].empty())
      throw RankingError(RankingErrc::InvalidInput, fmt::format("paper {} has no reviews", papers[i].id));
  std::vector<std::string> ids;
  for (const auto& p : papers) ids.push_back(p.id);
  const PairJudge judge = [&](std::size_t a, std::size_t b) {
    return judge_pair(papers[a], papers[b], reviews[a], reviews[b], review_instruction_form, gateway, judge_options);
  };
  return run_tournament(ids, judge, options);
}

std::string_view to_string(Verdict v) { return v == Verdict::Accept ? "accept" : "reject"; }

std::size_t accept_count(std::size_t n, double quantile) {
  return static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(n) - 1e-9));
}

DecisionVector threshold_decisions(const std::map<std::string, double>& ratings, double quantile) {
  if (ratings.empty()) throw RankingError(RankingErrc::Empty, "no ratings to threshold");
  if (!(quantile > 0.0 && quantile < 1.0))
    throw RankingError(RankingErrc::InvalidInput, fmt::format("quantile must lie in (0, 1), got {}", quantile));
  std::vector<std::pair<std::string, double>> order(ratings.begin(), ratings.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  const std::size_t k = accept_count(order.size(), quantile);
  DecisionVector d;
  for (std::size_t i = 0; i < order.size(); ++i) d.decisions[order[i].first] = i < k ? Verdict::Accept : Verdict::Reject;
  return d;
}

double disagreement_rate(const DecisionVector& a, const DecisionVector& b) {
  if (a.decisions.size() != b.decisions.size())
    throw RankingError(RankingErrc::IdSetMismatch, "decision vectors cover different papers");
  if (a.decisions.empty()) throw RankingError(RankingErrc::Empty, "decision vectors are empty");
  std::size_t differ = 0;
  auto ib = b.decisions.begin();
  for (const auto& [id, v] : a.decisions) {
    if (ib->first != id) throw RankingError(RankingErrc::IdSetMismatch, fmt::format("paper {} is not in both", id));
    differ += ib->second != v;
    ++ib;
  }
  return static_cast<double>(differ) / static_cast<double>(a.decisions.size());
}

ConsistencyMatrix consistency_matrix(std::span<const LabeledRun> runs) {
  if (runs.empty()) throw RankingError(RankingErrc::Empty, "no runs to compare");
  ConsistencyMatrix m;
  std::vector<std::size_t> label_of(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto it = std::find(m.labels.begin(), m.labels.end(), runs[r].label);
    label_of[r] = static_cast<std::size_t>(it - m.labels.begin());
    if (it == m.labels.end()) m.labels.push_back(runs[r].label);
  }
  const std::size_t k = m.labels.size();
  std::vector<std::vector<double>> sum(k, std::vector<double>(k, 0.0));
  std::vector<std::vector<std::size_t>> pairs(k, std::vector<std::size_t>(k, 0));
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (std::size_t s = r + 1; s < runs.size(); ++s) {
      const std::size_t i = label_of[r], j = label_of[s];
      if (i == j && runs[r].seed == runs[s].seed)
        m.same_seed_reruns.push_back(fmt::format("{} (seed {})", runs[r].label, runs[r].seed));
      const double dr = disagreement_rate(runs[r].decisions, runs[s].decisions);
      sum[i][j] += dr;
      ++pairs[i][j];
      if (i != j) {
        sum[j][i] += dr;
        ++pairs[j][i];
      }
    }
  }
  m.dr.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (pairs[i][j] > 0) m.dr[i][j] = sum[i][j] / static_cast<double>(pairs[i][j]);
  return m;
}

std::string consistency_csv(const ConsistencyMatrix& m) {
  std::string out = "run";
  for (const auto& l : m.labels) out += "," + csv_field(l);
  out += '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out += csv_field(m.labels[i]);
    for (std::size_t j = 0; j < m.labels.size(); ++j)
      out += m.dr[i][j] ? fmt::format(",{:.6f}", *m.dr[i][j]) : std::string(",NA");
    out += '\n';
  }
  return out;
}

std::string ratings_csv(const TournamentResult& result) {
  std::string out = "paper_id,rating,rd,volatility,matches_played\n";
  for (const auto& [id, r] : result.ratings)
    out += fmt::format("{},{:.6f},{:.6f},{:.8f},{}\n", csv_field(id), r.state.rating, r.state.rd, r.state.volatility,
                       r.matches);
  return out;
}

std::string decisions_csv(const DecisionVector& d) {
  std::string out = "paper_id,decision\n";
  for (const auto& [id, v] : d.decisions) out += fmt::format("{},{}\n", csv_field(id), to_string(v));
  return out;
}

}  // namespace apres
