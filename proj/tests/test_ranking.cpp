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

#include <algorithm>
#include <cmath>

#include "apres/ranking.hpp"
#include "apres/rng.hpp"
#include "apres/rubric.hpp"
#include "apres/prompts.hpp"
#include "apres/stub_provider.hpp"
#include "apres/synthetic.hpp"

using namespace apres;

namespace {

// Step-by-step Glicko-2 written from the published procedure, with plain
// bisection for the volatility in place of the Illinois iteration.
GlickoState oracle_update(const GlickoState& p, const std::vector<GlickoOpponent>& opp, double tau) {
  const double s = 173.7178;
  const double mu = (p.rating - 1500) / s, phi = p.rd / s, sigma = p.volatility;
  double v_inv = 0, d = 0;
  for (const auto& o : opp) {
    const double phij = o.state.rd / s, muj = (o.state.rating - 1500) / s;
    const double g = 1 / std::sqrt(1 + 3 * phij * phij / (M_PI * M_PI));
    const double e = 1 / (1 + std::exp(-g * (mu - muj)));
    v_inv += g * g * e * (1 - e);
    d += g * ((o.outcome == Outcome::Win ? 1.0 : 0.0) - e);
  }
  const double v = 1 / v_inv, delta = v * d;
  const double a = std::log(sigma * sigma);
  auto f = [&](double x) {
    const double ex = std::exp(x), t = phi * phi + v + ex;
    return ex * (delta * delta - phi * phi - v - ex) / (2 * t * t) - (x - a) / (tau * tau);
  };
  // f is decreasing; bracket the root and halve.
  double lo = a - 1, hi = a + 1;
  while (f(lo) < 0) lo -= 1;
  while (f(hi) > 0) hi += 1;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  const double sigma2 = std::exp(0.25 * (lo + hi));
  const double phi_star = std::sqrt(phi * phi + sigma2 * sigma2);
  const double phi2 = 1 / std::sqrt(1 / (phi_star * phi_star) + 1 / v);
  const double mu2 = mu + phi2 * phi2 * d;
  return {1500 + s * mu2, s * phi2, sigma2};
}

const std::vector<GlickoOpponent> kWorked = {{{1400, 30, 0.06}, Outcome::Win},
                                            {{1550, 100, 0.06}, Outcome::Loss},
                                            {{1700, 300, 0.06}, Outcome::Loss}};

template <typename Fn>
RankingErrc error_of(Fn&& fn) {
  try {
    fn();
  } catch (const RankingError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no RankingError thrown";
  return RankingErrc::Empty;
}

MatchResult forced(std::string a, std::string b, Winner w) { return MatchResult{std::move(a), std::move(b), w, 3, 2, ""}; }

DecisionVector decisions(std::initializer_list<std::pair<const char*, Verdict>> list) {
  DecisionVector d;
  for (const auto& [id, v] : list) d.decisions[id] = v;
  return d;
}

}  // namespace

TEST(Glicko, WorkedExample) {
  const GlickoState out = glicko_update({1500, 200, 0.06}, kWorked, 0.5);
  EXPECT_NEAR(out.rating, 1464.05, 0.01);
  EXPECT_NEAR(out.rd, 151.52, 0.01);
  EXPECT_NEAR(out.volatility, 0.05999, 1e-4);
}

TEST(Glicko, MatchesBisectionOracle) {
  const GlickoState oracle = oracle_update({1500, 200, 0.06}, kWorked, 0.5);
  EXPECT_NEAR(oracle.rating, 1464.05, 0.01);
  EXPECT_NEAR(oracle.rd, 151.52, 0.01);
  EXPECT_NEAR(oracle.volatility, 0.05999, 1e-4);

  Rng rng(31);
  for (int t = 0; t < 2000; ++t) {
    const GlickoState p{1200 + 600 * rng.uniform01(), 30 + 320 * rng.uniform01(), 0.02 + 0.1 * rng.uniform01()};
    std::vector<GlickoOpponent> opp(1 + rng.uniform_index(4));
    for (auto& o : opp)
      o = {{1200 + 600 * rng.uniform01(), 30 + 320 * rng.uniform01(), 0.06},
           rng.uniform01() < 0.5 ? Outcome::Win : Outcome::Loss};
    const double tau = 0.3 + 0.9 * rng.uniform01();
    const GlickoState got = glicko_update(p, opp, tau);
    const GlickoState want = oracle_update(p, opp, tau);
    ASSERT_NEAR(got.rating, want.rating, 1e-3);
    ASSERT_NEAR(got.rd, want.rd, 1e-3);
    ASSERT_NEAR(got.volatility, want.volatility, 1e-6);
  }
}

TEST(Glicko, NoGamesOnlyWidensRd) {
  const GlickoState p{1620, 80, 0.06};
  const GlickoState out = glicko_update(p, {});
  EXPECT_EQ(out.rating, 1620);
  EXPECT_EQ(out.volatility, 0.06);
  EXPECT_NEAR(out.rd, std::sqrt(80.0 * 80 + 0.06 * 0.06 * kGlickoScale * kGlickoScale), 1e-9);
  EXPECT_EQ(glicko_update(GlickoState{1500, 349.9, 0.06}, {}).rd, 350.0);
}

TEST(Glicko, SymmetricSingleMatch) {
  const GlickoState s{1500, 200, 0.06};
  const GlickoOpponent beat[] = {{s, Outcome::Win}};
  const GlickoOpponent lost[] = {{s, Outcome::Loss}};
  const GlickoState w = glicko_update(s, beat);
  const GlickoState l = glicko_update(s, lost);
  EXPECT_GT(w.rating, 1500);
  EXPECT_LT(l.rating, 1500);
  EXPECT_NEAR(w.rating - 1500, 1500 - l.rating, 1e-9);
  EXPECT_NEAR(w.rd, l.rd, 1e-12);
}

TEST(Glicko, InvalidTau) {
  EXPECT_EQ(error_of([] { glicko_update({}, kWorked, 0.0); }), RankingErrc::InvalidInput);
}

TEST(Glicko, RdStaysInBoundsOverManyUpdates) {
  Rng rng(2);
  std::vector<GlickoState> pool(20);
  for (int t = 0; t < 100000; ++t) {
    const auto i = rng.uniform_index(pool.size());
    std::vector<GlickoOpponent> opp;
    const auto k = rng.uniform_index(3);
    for (std::uint64_t m = 0; m < k; ++m)
      opp.push_back({pool[rng.uniform_index(pool.size())], rng.uniform01() < 0.5 ? Outcome::Win : Outcome::Loss});
    pool[i] = glicko_update(pool[i], opp);
    ASSERT_GT(pool[i].rd, 0.0);
    ASSERT_LE(pool[i].rd, 350.0);
    ASSERT_GT(pool[i].volatility, 0.0);
    ASSERT_TRUE(std::isfinite(pool[i].rating));
  }
}

TEST(Verdict, ParsesFencedBlock) {
  const MatchResult m = parse_verdict(
      "Both are fine.\n```json\n{\"winner\": \"A\", \"confidence\": 4, \"score_difference\": 3, \"reasoning\": \"A is clearer\"}\n```",
      "p1", "p2");
  EXPECT_EQ(m, (MatchResult{"p1", "p2", Winner::A, 4, 3, "A is clearer"}));
}

TEST(Verdict, Errors) {
  EXPECT_EQ(error_of([] { parse_verdict("```json\n{\"confidence\": 4, \"score_difference\": 3}\n```", "a", "b"); }),
            RankingErrc::MalformedVerdict);
  EXPECT_EQ(error_of([] {
              parse_verdict("```json\n{\"winner\": \"A\", \"confidence\": 6, \"score_difference\": 3}\n```", "a", "b");
            }),
            RankingErrc::RangeViolation);
  EXPECT_EQ(error_of([] {
              parse_verdict("```json\n{\"winner\": \"C\", \"confidence\": 2, \"score_difference\": 3}\n```", "a", "b");
            }),
            RankingErrc::RangeViolation);
  EXPECT_EQ(error_of([] { parse_verdict("I cannot decide.", "a", "b"); }), RankingErrc::MalformedVerdict);
}

TEST(Tournament, ZeroBudgetLeavesInitialStates) {
  const std::vector<std::string> ids = {"a", "b", "c"};
  int calls = 0;
  const auto r = run_tournament(ids, [&](std::size_t, std::size_t) -> MatchResult { ++calls; return {}; },
                                TournamentOptions{.budget = 0});
  EXPECT_EQ(calls, 0);
  for (const auto& id : ids) EXPECT_EQ(r.ratings.at(id).state, GlickoState{});
}

TEST(Tournament, TwoPapersOneMatch) {
  const std::vector<std::string> ids = {"first", "second"};
  const auto judge = [&](std::size_t a, std::size_t b) {
    return forced(ids[a], ids[b], a == 0 ? Winner::A : Winner::B);
  };
  const auto r = run_tournament(ids, judge, TournamentOptions{.budget = 1});
  EXPECT_EQ(r.matches.size(), 1u);
  EXPECT_GT(r.ratings.at("first").state.rating, r.ratings.at("second").state.rating);
}

TEST(Tournament, FixedOrderIsRecovered) {
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) ids.push_back("p" + std::to_string(i));
  // Lower index always wins.
  const auto judge = [&](std::size_t a, std::size_t b) { return forced(ids[a], ids[b], a < b ? Winner::A : Winner::B); };
  const auto r = run_tournament(ids, judge, TournamentOptions{.budget = 2000, .seed = 9});
  for (std::size_t i = 0; i + 1 < ids.size(); ++i)
    EXPECT_GT(r.ratings.at(ids[i]).state.rating, r.ratings.at(ids[i + 1]).state.rating) << i;
}

TEST(Tournament, NoImmediateRepeatAndBothOrders) {
  const std::vector<std::string> ids = {"a", "b", "c", "d"};
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  const auto judge = [&](std::size_t a, std::size_t b) { return forced(ids[a], ids[b], Winner::A); };
  const auto r = run_tournament(ids, judge, TournamentOptions{.budget = 500, .seed = 3, .stop_delta = 0});
  ASSERT_EQ(r.matches.size(), 500u);
  std::size_t swapped = 0;
  for (std::size_t m = 0; m < r.matches.size(); ++m) {
    ASSERT_NE(r.matches[m].a, r.matches[m].b);
    swapped += r.matches[m].a > r.matches[m].b;
    if (m > 0) {
      const auto prev = std::minmax(r.matches[m - 1].a, r.matches[m - 1].b);
      ASSERT_NE(std::minmax(r.matches[m].a, r.matches[m].b), prev);
    }
  }
  EXPECT_GT(swapped, 150u);
  EXPECT_LT(swapped, 350u);
}

TEST(Tournament, SkippedMatchesAreCapped) {
  const std::vector<std::string> ids = {"a", "b", "c"};
  std::atomic<int> calls{0};
  const auto flaky = [&](std::size_t a, std::size_t b) {
    if (++calls % 50 == 0) throw RankingError(RankingErrc::MalformedVerdict, "bad");
    return forced(ids[a], ids[b], Winner::A);
  };
  const auto r = run_tournament(ids, flaky, TournamentOptions{.budget = 400, .stop_delta = 0, .workers = 1});
  EXPECT_EQ(r.skipped, 8u);
  EXPECT_EQ(r.matches.size(), 392u);
  const auto broken = [&](std::size_t, std::size_t) -> MatchResult {
    throw RankingError(RankingErrc::MalformedVerdict, "bad");
  };
  EXPECT_EQ(error_of([&] { run_tournament(ids, broken, TournamentOptions{.budget = 100}); }),
            RankingErrc::TooManyFailures);
}

TEST(Tournament, InvalidInputs) {
  const auto judge = [](std::size_t, std::size_t) { return MatchResult{}; };
  const std::vector<std::string> one = {"a"};
  const std::vector<std::string> dup = {"a", "a"};
  EXPECT_EQ(error_of([&] { run_tournament(one, judge, {}); }), RankingErrc::InvalidInput);
  EXPECT_EQ(error_of([&] { run_tournament(dup, judge, {}); }), RankingErrc::InvalidInput);
}

TEST(Tournament, StubJudgeIsByteReproducible) {
  const Corpus corpus = synthetic_corpus({.papers = 12, .seed = 4, .withdrawn_rate = 0});
  Rubric rubric;
  rubric.items = {{"novelty", "How new is it", "old", "some", "new"},
                  {"clarity", "How clear is it", "murky", "ok", "lucid"}};
  auto once = [&] {
    Gateway g(ProviderConfig{}, make_default_stub(5));
    std::vector<Paper> papers(corpus.papers().begin(), corpus.papers().end());
    std::vector<std::string> reviews;
    for (const auto& p : papers) reviews.push_back(render_reviews(rubric, score_paper(rubric, p, g)));
    const auto r = run_tournament(papers, reviews, render_reviewer_prompt(rubric.items), g,
                                  TournamentOptions{.budget = 300, .seed = 8});
    return ratings_csv(r);
  };
  const std::string first = once();
  EXPECT_EQ(first, once());
  EXPECT_NE(first.find("paper_id,rating,rd,volatility,matches_played\n"), std::string::npos);
}

TEST(Decisions, AcceptCountIsCeiling) {
  for (std::size_t n = 1; n <= 1000; ++n) {
    std::map<std::string, double> ratings;
    for (std::size_t i = 0; i < n; ++i) ratings[std::to_string(i)] = static_cast<double>(i % 7);
    const auto d = threshold_decisions(ratings, 0.25);
    const auto accepted = std::count_if(d.decisions.begin(), d.decisions.end(),
                                        [](const auto& kv) { return kv.second == Verdict::Accept; });
    // Integer ceiling of n/4, computed without floating point.
    ASSERT_EQ(static_cast<std::size_t>(accepted), (n + 3) / 4) << n;
    ASSERT_EQ(d.decisions.size(), n);
  }
}

TEST(Decisions, Examples) {
  std::map<std::string, double> eight, five;
  for (int i = 0; i < 8; ++i) eight["p" + std::to_string(i)] = 1500 + i;
  for (int i = 0; i < 5; ++i) five["p" + std::to_string(i)] = 1500 + i;
  const auto d8 = threshold_decisions(eight, 0.25);
  EXPECT_EQ(d8.decisions.at("p7"), Verdict::Accept);
  EXPECT_EQ(d8.decisions.at("p6"), Verdict::Accept);
  EXPECT_EQ(d8.decisions.at("p5"), Verdict::Reject);
  const auto d5 = threshold_decisions(five, 0.25);
  EXPECT_EQ(d5.decisions.at("p4"), Verdict::Accept);
  EXPECT_EQ(d5.decisions.at("p3"), Verdict::Accept);
  EXPECT_EQ(d5.decisions.at("p2"), Verdict::Reject);
}

TEST(Decisions, TiesGoToSmallestIds) {
  const std::map<std::string, double> flat = {{"d", 1500}, {"b", 1500}, {"a", 1500}, {"c", 1500}, {"e", 1500}};
  const auto d = threshold_decisions(flat, 0.25);
  EXPECT_EQ(d, decisions({{"a", Verdict::Accept},
                          {"b", Verdict::Accept},
                          {"c", Verdict::Reject},
                          {"d", Verdict::Reject},
                          {"e", Verdict::Reject}}));
}

TEST(Decisions, Errors) {
  EXPECT_EQ(error_of([] { threshold_decisions({}, 0.25); }), RankingErrc::Empty);
  EXPECT_EQ(error_of([] { threshold_decisions({{"a", 1.0}}, 1.0); }), RankingErrc::InvalidInput);
  EXPECT_EQ(error_of([] { threshold_decisions({{"a", 1.0}}, 0.0); }), RankingErrc::InvalidInput);
}

TEST(Disagreement, Examples) {
  const auto a = decisions({{"1", Verdict::Accept}, {"2", Verdict::Reject}, {"3", Verdict::Reject}, {"4", Verdict::Reject}});
  const auto b = decisions({{"1", Verdict::Accept}, {"2", Verdict::Accept}, {"3", Verdict::Reject}, {"4", Verdict::Reject}});
  const auto c = decisions({{"1", Verdict::Reject}, {"2", Verdict::Accept}, {"3", Verdict::Accept}, {"4", Verdict::Accept}});
  EXPECT_EQ(disagreement_rate(a, a), 0.0);
  EXPECT_EQ(disagreement_rate(a, b), 0.25);
  EXPECT_EQ(disagreement_rate(a, c), 1.0);
}

TEST(Disagreement, IdSetMismatch) {
  const auto a = decisions({{"1", Verdict::Accept}, {"2", Verdict::Reject}});
  const auto b = decisions({{"1", Verdict::Accept}, {"3", Verdict::Reject}});
  const auto c = decisions({{"1", Verdict::Accept}});
  EXPECT_EQ(error_of([&] { disagreement_rate(a, b); }), RankingErrc::IdSetMismatch);
  EXPECT_EQ(error_of([&] { disagreement_rate(a, c); }), RankingErrc::IdSetMismatch);
  EXPECT_EQ(error_of([] { disagreement_rate({}, {}); }), RankingErrc::Empty);
}

TEST(Disagreement, IsAPseudometric) {
  Rng rng(12);
  auto random_vector = [&](std::size_t n) {
    DecisionVector d;
    for (std::size_t i = 0; i < n; ++i)
      d.decisions[std::to_string(i)] = rng.uniform01() < 0.3 ? Verdict::Accept : Verdict::Reject;
    return d;
  };
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 1 + rng.uniform_index(40);
    const auto x = random_vector(n), y = random_vector(n), z = random_vector(n);
    ASSERT_EQ(disagreement_rate(x, x), 0.0);
    ASSERT_EQ(disagreement_rate(x, y), disagreement_rate(y, x));
    ASSERT_LE(disagreement_rate(x, z), disagreement_rate(x, y) + disagreement_rate(y, z) + 1e-12);
  }
}

TEST(Consistency, MatrixAndCsv) {
  const auto a = decisions({{"1", Verdict::Accept}, {"2", Verdict::Reject}, {"3", Verdict::Reject}, {"4", Verdict::Reject}});
  const auto b = decisions({{"1", Verdict::Accept}, {"2", Verdict::Accept}, {"3", Verdict::Reject}, {"4", Verdict::Reject}});
  const std::vector<LabeledRun> runs = {{"m1", 1, a}, {"m1", 2, b}, {"m2", 1, a}};
  const ConsistencyMatrix m = consistency_matrix(runs);
  ASSERT_EQ(m.labels, (std::vector<std::string>{"m1", "m2"}));
  EXPECT_EQ(*m.dr[0][0], 0.25);
  EXPECT_FALSE(m.dr[1][1].has_value());
  EXPECT_EQ(*m.dr[0][1], 0.125);
  EXPECT_EQ(m.dr[0][1], m.dr[1][0]);
  EXPECT_TRUE(m.same_seed_reruns.empty());
  EXPECT_EQ(consistency_csv(m), "run,m1,m2\nm1,0.250000,0.125000\nm2,0.125000,NA\n");
}

TEST(Consistency, SameSeedRerunsAreFlaggedAndAgree) {
  const std::vector<std::string> ids = {"a", "b", "c", "d", "e", "f", "g", "h"};
  std::vector<int> strength = {3, 1, 4, 1, 5, 9, 2, 6};
  const auto judge = [&](std::size_t a, std::size_t b) {
    return forced(ids[a], ids[b], strength[a] >= strength[b] ? Winner::A : Winner::B);
  };
  auto run = [&] {
    const auto r = run_tournament(ids, judge, TournamentOptions{.budget = 200, .seed = 4});
    std::map<std::string, double> ratings;
    for (const auto& [id, rating] : r.ratings) ratings[id] = rating.state.rating;
    return threshold_decisions(ratings, 0.25);
  };
  const std::vector<LabeledRun> runs = {{"stub", 4, run()}, {"stub", 4, run()}};
  const ConsistencyMatrix m = consistency_matrix(runs);
  EXPECT_EQ(*m.dr[0][0], 0.0);
  EXPECT_EQ(m.same_seed_reruns.size(), 1u);
  EXPECT_EQ(error_of([] { consistency_matrix({}); }), RankingErrc::Empty);
}
