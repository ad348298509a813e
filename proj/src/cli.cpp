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

#include "apres/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "apres/config.hpp"
#include "apres/corpus.hpp"
#include "apres/fs_util.hpp"
#include "apres/parallel.hpp"
#include "apres/prompts.hpp"
#include "apres/ranking.hpp"
#include "apres/revision.hpp"
#include "apres/rubric.hpp"
#include "apres/rubric_search.hpp"
#include "apres/synthetic.hpp"

namespace apres {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

enum class CliErrc { Usage, RunDirBusy, MissingInput };
constexpr std::string_view module_name(CliErrc) { return "cli"; }
using CliError = ModuleError<CliErrc>;

// Flag spelling of a config key; the common ones get short names.
std::string flag_for(std::string_view key) {
  static const std::map<std::string_view, std::string_view> named = {
      {"provider.name", "--provider"},       {"provider.model", "--model"},
      {"search.seed", "--seed"},             {"search.max_iterations", "--max-iterations"},
      {"search.tournament_budget", "--budget"}, {"paths.run_dir", "--run-dir"},
      {"paths.corpus", "--corpus"},          {"paths.rubric", "--rubric"},
  };
  if (const auto it = named.find(key); it != named.end()) return std::string(it->second);
  std::string name(key.substr(key.find('.') + 1));
  std::replace(name.begin(), name.end(), '_', '-');
  return "--" + name;
}

struct Common {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  bool stub = false;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_file, "key = value configuration file");
  for (const auto& key : config_keys()) {
    const std::string flag = flag_for(key);
    cmd->add_option_function<std::string>(
        flag, [&common, key](const std::string& v) { common.overrides[key] = v; }, "overrides " + key);
  }
  cmd->add_flag("--stub", common.stub, "use the offline stub provider");
}

RunConfig resolve_config(const Common& common) {
  RunConfig config;
  if (!common.config_file.empty()) apply_config_file(config, common.config_file);
  if (!config.run_dir)
    if (const char* env = std::getenv("APRES_RUN_DIR"); env != nullptr && *env != '\0') config.run_dir = fs::path(env);
  for (const auto& [key, value] : common.overrides) set_config_value(config, key, value);
  if (common.stub) config.provider.name = "stub";
  config.validate();
  return config;
}

// Holds the run-directory lock and verifies the resolved-config echo.
class RunDir {
 public:
  explicit RunDir(const RunConfig& config) : path_(require(config)) {
    fs::create_directories(path_);
    try {
      lock_.emplace(path_ / ".lock");
    } catch (const std::exception&) {
      throw CliError(CliErrc::RunDirBusy,
                     fmt::format("run directory {} is locked by another command (remove {} if stale)",
                                 path_.string(), (path_ / ".lock").string()));
    }
    RunConfig echo = config;
    const auto previous = read_file(path_ / "config.resolved");
    if (previous) {
      RunConfig before;
      apply_config_text(before, render_as_sections(*previous), "config.resolved");
      for (const auto& key : config_keys()) {
        if (is_per_command_key(key)) continue;
        // A path left unset by this command is simply not needed by it.
        if (key.starts_with("paths.") && get_config_value(config, key).empty()) {
          if (const auto v = get_config_value(before, key); !v.empty()) set_config_value(echo, key, v);
          continue;
        }
        if (get_config_value(before, key) != get_config_value(config, key))
          throw ConfigError(ConfigErrc::ResolvedMismatch,
                            fmt::format("{} was '{}' for earlier commands in {}, now '{}'", key,
                                        get_config_value(before, key), path_.string(), get_config_value(config, key)));
      }
    }
    const std::string resolved = resolved_config_text(echo);
    if (!previous || *previous != resolved) atomic_write(path_ / "config.resolved", resolved);
  }

  const fs::path& path() const { return path_; }

 private:
  static fs::path require(const RunConfig& config) {
    if (!config.run_dir)
      throw CliError(CliErrc::MissingInput, "a run directory is required (--run-dir or APRES_RUN_DIR)");
    return *config.run_dir;
  }

  // "section.key = value" lines back into the sectioned file form.
  static std::string render_as_sections(const std::string& flat) {
    std::string out;
    std::string current;
    std::size_t start = 0;
    while (start < flat.size()) {
      auto end = flat.find('\n', start);
      if (end == std::string::npos) end = flat.size();
      const std::string line = flat.substr(start, end - start);
      start = end + 1;
      const auto dot = line.find('.');
      if (dot == std::string::npos) continue;
      const std::string section = line.substr(0, dot);
      if (section != current) {
        out += "[" + section + "]\n";
        current = section;
      }
      out += line.substr(dot + 1) + "\n";
    }
    return out;
  }

  fs::path path_;
  std::optional<LockFile> lock_;
};

Corpus require_corpus(const RunConfig& config) {
  if (!config.corpus_path) throw CliError(CliErrc::MissingInput, "a corpus file is required (--corpus)");
  if (!fs::exists(*config.corpus_path))
    throw CliError(CliErrc::MissingInput, fmt::format("corpus file {} does not exist", config.corpus_path->string()));
  return load_corpus(*config.corpus_path);
}

Rubric require_rubric(const RunConfig& config, const fs::path& run_dir) {
  if (config.rubric_path) {
    if (!fs::exists(*config.rubric_path))
      throw CliError(CliErrc::MissingInput, fmt::format("rubric file {} does not exist", config.rubric_path->string()));
    return load_rubric(*config.rubric_path);
  }
  const fs::path best = run_dir / "best_rubric.txt";
  if (fs::exists(best)) return load_rubric(best);
  throw CliError(CliErrc::MissingInput, "no rubric: pass --rubric or run rubric-search in this run directory first");
}

Gateway make_gateway(const RunConfig& config, const fs::path& run_dir) {
  return Gateway(config.provider, make_provider(config.provider), run_dir);
}

std::vector<std::string> split_ids(const CorpusSplit& split, std::string_view which) {
  if (which == "all") {
    std::vector<std::string> ids;
    for (auto n : {SplitName::Train, SplitName::Validation, SplitName::Test})
      ids.insert(ids.end(), split.ids(n).begin(), split.ids(n).end());
    return ids;
  }
  for (auto n : {SplitName::Train, SplitName::Validation, SplitName::Test})
    if (to_string(n) == which) return split.ids(n);
  throw CliError(CliErrc::Usage, fmt::format("unknown split '{}'", which));
}

std::string split_json(const CorpusSplit& split, std::uint64_t seed) {
  ojson j = {{"seed", seed}};
  for (auto n : {SplitName::Train, SplitName::Validation, SplitName::Test}) j[std::string(to_string(n))] = split.ids(n);
  return j.dump(2) + "\n";
}

CorpusSplit split_from_json(const ojson& j) {
  CorpusSplit split;
  split.train = j.at("train").get<std::vector<std::string>>();
  split.validation = j.at("validation").get<std::vector<std::string>>();
  split.test = j.at("test").get<std::vector<std::string>>();
  return split;
}

// The split is fixed by the first command that needs it; later seeds do not reshuffle it.
CorpusSplit run_split(const RunConfig& config, const fs::path& run_dir, const Corpus& corpus) {
  if (const auto text = read_file(run_dir / "split.json")) {
    const CorpusSplit split = split_from_json(ojson::parse(*text));
    for (auto n : {SplitName::Train, SplitName::Validation, SplitName::Test})
      for (const auto& id : split.ids(n))
        if (!corpus.contains(id))
          throw CliError(CliErrc::MissingInput, fmt::format("split.json names paper {} which is not in the corpus", id));
    return split;
  }
  const CorpusSplit split = split_corpus(corpus, config.search.seed);
  atomic_write(run_dir / "split.json", split_json(split, config.search.seed));
  return split;
}

bool human_accept(Decision d) { return d == Decision::Oral || d == Decision::Spotlight || d == Decision::Poster; }

std::string fmt_num(double v) { return fmt::format("{:.4f}", v); }

// ---- commands

int cmd_synth(const RunConfig& config, std::size_t papers, const std::string& out_path, std::ostream& out) {
  SyntheticOptions opts;
  opts.papers = papers;
  opts.seed = config.search.seed;
  const Corpus corpus = synthetic_corpus(opts);
  save_corpus(out_path, corpus);
  out << fmt::format("wrote {} synthetic papers to {}\n", corpus.size(), out_path);
  return kExitOk;
}

int cmd_ingest(const RunConfig& config, std::ostream& out) {
  const Corpus corpus = require_corpus(config);
  std::map<std::string, std::size_t> strata, venues, decisions;
  double citations = 0;
  for (const auto& p : corpus.papers()) {
    citations += static_cast<double>(p.citations_12mo);
    ++venues[std::string(to_string(p.venue))];
    ++decisions[std::string(to_string(p.decision))];
    if (!p.human_scores.empty()) ++strata[std::string(to_string(classify_stratum(p)))];
  }
  const double mean = corpus.empty() ? 0.0 : citations / static_cast<double>(corpus.size());
  ojson summary = {{"papers", corpus.size()}, {"mean_citations", mean}, {"venues", venues},
                   {"decisions", decisions},  {"strata", strata}};
  out << fmt::format("papers: {}\nmean citations (12 months): {:.4f}\n", corpus.size(), mean);
  for (const auto& [k, v] : strata) out << fmt::format("stratum {}: {}\n", k, v);
  if (config.run_dir) {
    RunDir dir(config);
    atomic_write(dir.path() / "corpus_summary.json", summary.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_split(const RunConfig& config, std::ostream& out) {
  RunDir dir(config);
  const Corpus corpus = require_corpus(config);
  const CorpusSplit split = run_split(config, dir.path(), corpus);
  out << fmt::format("train {} / validation {} / test {}\n", split.train.size(), split.validation.size(),
                     split.test.size());
  return kExitOk;
}

int cmd_rubric_search(const RunConfig& config, std::ostream& out) {
  RunDir dir(config);
  const Corpus corpus = require_corpus(config);
  const CorpusSplit split = run_split(config, dir.path(), corpus);
  Gateway gateway = make_gateway(config, dir.path());
  RubricSearchOptions opts;
  opts.lambda_grid = config.lambda_grid;
  opts.paper_workers = config.workers;
  opts.run_dir = dir.path() / "rubric_search";
  opts.resume = true;
  const RubricSearchResult r = run_rubric_search(corpus, split, config.search, gateway, opts);
  save_rubric(dir.path() / "best_rubric.txt", r.best);
  save_rubric(dir.path() / "best_rubric.json", r.best);
  const ojson summary = {{"best_node", r.best_node_id},
                         {"items", r.best.items.size()},
                         {"lambda", r.lambda},
                         {"validation_mae", r.validation_mae},
                         {"test_mae", r.test_mae},
                         {"baseline_validation_mae", r.baseline_validation_mae},
                         {"baseline_test_mae", r.baseline_test_mae},
                         {"nodes", r.nodes},
                         {"stopped_early", r.stopped_early}};
  atomic_write(dir.path() / "rubric_search.json", summary.dump(2) + "\n");
  out << fmt::format("best node {} ({} items): validation MAE {} (constant {}), test MAE {} (constant {})\n",
                     r.best_node_id, r.best.items.size(), fmt_num(r.validation_mae),
                     fmt_num(r.baseline_validation_mae), fmt_num(r.test_mae), fmt_num(r.baseline_test_mae));
  return kExitOk;
}

std::vector<ScoreVector> score_all(const std::vector<const Paper*>& papers, const Rubric& rubric, Gateway& gateway,
                                   std::size_t workers) {
  std::vector<ScoreVector> vectors(papers.size());
  parallel_for(papers.size(), workers, [&](std::size_t i) {
    vectors[i] = score_paper(rubric, *papers[i], gateway, ScoringOptions{.workers = 1});
  });
  return vectors;
}

int cmd_score(const RunConfig& config, const std::string& which, std::ostream& out) {
  RunDir dir(config);
  const Corpus corpus = require_corpus(config);
  const Rubric rubric = require_rubric(config, dir.path());
  const CorpusSplit split = run_split(config, dir.path(), corpus);
  Gateway gateway = make_gateway(config, dir.path());
  std::vector<const Paper*> papers;
  for (const auto& id : split_ids(split, which)) papers.push_back(&corpus.at(id));
  const auto vectors = score_all(papers, rubric, gateway, config.workers);
  std::string lines;
  double total = 0;
  for (const auto& v : vectors) {
    lines += score_vector_to_json(v).dump() + "\n";
    total += overall_score(v);
  }
  atomic_write(dir.path() / "scores" / (which + ".jsonl"), lines);
  out << fmt::format("scored {} papers of split '{}': mean overall score {}\n", vectors.size(), which,
                     fmt_num(vectors.empty() ? 0.0 : total / static_cast<double>(vectors.size())));
  return kExitOk;
}

int cmd_revise(const RunConfig& config, const std::string& which, const std::string& stratum, std::size_t limit,
               const std::vector<std::string>& only, std::ostream& out, std::ostream& err) {
  static const std::set<std::string> strata = {"clear-accept", "borderline", "clear-reject", "all"};
  if (!strata.contains(stratum)) throw CliError(CliErrc::Usage, fmt::format("unknown stratum '{}'", stratum));
  RunDir dir(config);
  const Corpus corpus = require_corpus(config);
  const Rubric rubric = require_rubric(config, dir.path());
  const CorpusSplit split = run_split(config, dir.path(), corpus);
  Gateway gateway = make_gateway(config, dir.path());

  std::vector<const Paper*> papers;
  if (!only.empty()) {
    for (const auto& id : only) papers.push_back(&corpus.at(id));
  } else {
    for (const auto& id : split_ids(split, which)) {
      const Paper& p = corpus.at(id);
      if (stratum != "all" && (p.human_scores.empty() || to_string(classify_stratum(p)) != stratum)) continue;
      papers.push_back(&p);
      if (limit > 0 && papers.size() == limit) break;
    }
  }

  std::string summary = "paper_id,stratum,s_ori,s_rev,delta_s,best_node,status\n";
  bool failed = false;
  for (const Paper* p : papers) {
    const std::string stratum_name = p->human_scores.empty() ? "none" : std::string(to_string(classify_stratum(*p)));
    const fs::path paper_dir = dir.path() / "revise" / p->id;
    RevisionOptions opts;
    opts.scoring.workers = config.workers;
    opts.run_dir = paper_dir;
    opts.resume = true;
    try {
      const RevisionState s = run_revision(*p, rubric, config.revision_search(), gateway, opts);
      atomic_write(paper_dir / "best_draft.jsonl", paper_to_line(paper_with_document(*p, s.best_draft)) + "\n");
      const ojson result = {{"paper_id", s.paper_id}, {"stratum", stratum_name}, {"s_ori", s.s_ori},
                            {"s_rev", s.s_rev},       {"delta_s", s.delta_s},  {"best_node", s.best_node_id},
                            {"nodes", s.nodes}};
      atomic_write(paper_dir / "result.json", result.dump(2) + "\n");
      summary += fmt::format("{},{},{},{},{},{},ok\n", s.paper_id, stratum_name, s.s_ori, s.s_rev, s.delta_s,
                             s.best_node_id);
      out << fmt::format("{}: S {} -> {} (delta {})\n", s.paper_id, fmt_num(s.s_ori), fmt_num(s.s_rev),
                         fmt_num(s.delta_s));
    } catch (const RevisionError& e) {
      failed = true;
      summary += fmt::format("{},{},,,,,failed\n", p->id, stratum_name);
      err << e.what() << "\n";
    }
  }
  atomic_write(dir.path() / "revise" / "summary.csv", summary);
  return failed ? kExitDomain : kExitOk;
}

int cmd_rank(const RunConfig& config, const std::string& which, std::string label, std::ostream& out) {
  RunDir dir(config);
  const Corpus corpus = require_corpus(config);
  const Rubric rubric = require_rubric(config, dir.path());
  const CorpusSplit split = run_split(config, dir.path(), corpus);
  Gateway gateway = make_gateway(config, dir.path());
  if (label.empty()) label = config.provider.model;

  std::vector<Paper> papers;
  std::vector<const Paper*> ptrs;
  for (const auto& id : split_ids(split, which)) papers.push_back(corpus.at(id));
  for (const auto& p : papers) ptrs.push_back(&p);
  const auto vectors = score_all(ptrs, rubric, gateway, config.workers);
  std::vector<std::string> reviews;
  for (const auto& v : vectors) reviews.push_back(render_reviews(rubric, v));
  const std::string form = render_reviewer_prompt(rubric.items);

  TournamentOptions opts;
  opts.budget = config.tournament_budget;
  opts.seed = config.search.seed;
  opts.workers = config.workers;
  const TournamentResult result = run_tournament(papers, reviews, form, gateway, opts);

  std::map<std::string, double> ratings;
  for (const auto& [id, r] : result.ratings) ratings[id] = r.state.rating;
  const DecisionVector decisions = threshold_decisions(ratings, config.quantile);

  std::size_t compared = 0, disagree = 0;
  for (const auto& p : papers) {
    if (p.decision == Decision::Withdrawn) continue;
    ++compared;
    disagree += (decisions.decisions.at(p.id) == Verdict::Accept) != human_accept(p.decision);
  }
  const fs::path run = dir.path() / "rank" / fmt::format("{}-s{}", label, config.search.seed);
  atomic_write(run / "ratings.csv", ratings_csv(result));
  atomic_write(run / "decisions.csv", decisions_csv(decisions));
  std::string matches;
  for (const auto& m : result.matches)
    matches += ojson({{"a", m.a},
                      {"b", m.b},
                      {"winner", m.winner == Winner::A ? "A" : "B"},
                      {"confidence", m.confidence},
                      {"score_difference", m.score_difference},
                      {"reasoning", m.reasoning}})
                   .dump() +
               "\n";
  atomic_write(run / "matches.jsonl", matches);
  const ojson meta = {{"label", label},
                      {"seed", config.search.seed},
                      {"split", which},
                      {"budget", config.tournament_budget},
                      {"attempted", result.attempted},
                      {"skipped", result.skipped},
                      {"early_stopped", result.early_stopped},
                      {"quantile", config.quantile},
                      {"papers", papers.size()},
                      {"human_compared", compared},
                      {"human_disagreement",
                       compared ? static_cast<double>(disagree) / static_cast<double>(compared) : 0.0}};
  atomic_write(run / "run.json", meta.dump(2) + "\n");
  out << fmt::format("{} matches over {} papers ({} skipped); disagreement with committee decisions {}\n",
                     result.matches.size(), papers.size(), result.skipped,
                     compared ? fmt_num(static_cast<double>(disagree) / static_cast<double>(compared)) : "n/a");
  return kExitOk;
}

std::vector<LabeledRun> load_rank_runs(const fs::path& run_dir) {
  std::vector<LabeledRun> runs;
  const fs::path root = run_dir / "rank";
  if (!fs::exists(root)) return runs;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "run.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    const ojson meta = ojson::parse(*read_file(d / "run.json"));
    LabeledRun run;
    run.label = meta.at("label").get<std::string>();
    run.seed = meta.at("seed").get<std::uint64_t>();
    std::ifstream in(d / "decisions.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.rfind(',');
      if (comma == std::string::npos) continue;
      run.decisions.decisions[line.substr(0, comma)] =
          line.substr(comma + 1) == "accept" ? Verdict::Accept : Verdict::Reject;
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

int cmd_consistency(const RunConfig& config, const std::vector<std::string>& others, std::ostream& out) {
  RunDir dir(config);
  auto runs = load_rank_runs(dir.path());
  for (const auto& other : others) {
    if (!fs::exists(fs::path(other) / "rank"))
      throw CliError(CliErrc::MissingInput, fmt::format("{} holds no rank runs", other));
    for (auto& run : load_rank_runs(other)) runs.push_back(std::move(run));
  }
  if (runs.empty()) throw CliError(CliErrc::MissingInput, "no rank runs in this run directory");
  const ConsistencyMatrix m = consistency_matrix(runs);
  const std::string csv = consistency_csv(m);
  atomic_write(dir.path() / "consistency.csv", csv);
  out << csv;
  for (const auto& s : m.same_seed_reruns)
    out << fmt::format("note: reruns of {} share a seed, so their agreement measures determinism only\n", s);
  return kExitOk;
}

int cmd_report(const RunConfig& config, std::ostream& out) {
  RunDir dir(config);
  std::string md = "# Run report\n\n";

  if (const auto s = read_file(dir.path() / "rubric_search.json")) {
    const ojson j = ojson::parse(*s);
    md += "## Rubric search\n\n";
    md += fmt::format("- best node: {} ({} items, lambda {})\n", j["best_node"].get<std::string>(),
                      j["items"].get<std::size_t>(), j["lambda"].get<double>());
    md += fmt::format("- validation MAE: {} (constant predictor {})\n", fmt_num(j["validation_mae"].get<double>()),
                      fmt_num(j["baseline_validation_mae"].get<double>()));
    md += fmt::format("- test MAE: {} (constant predictor {})\n\n", fmt_num(j["test_mae"].get<double>()),
                      fmt_num(j["baseline_test_mae"].get<double>()));
    if (const auto csv = read_file(dir.path() / "rubric_search" / "metrics.csv")) {
      md += "Best validation MAE by iteration:\n\n| iteration | best validation MAE |\n|---|---|\n";
      std::size_t start = csv->find('\n') + 1;
      std::string last;
      while (start < csv->size()) {
        auto end = csv->find('\n', start);
        const std::string line = csv->substr(start, end - start);
        start = end + 1;
        std::vector<std::string> cells;
        std::size_t a = 0;
        while (true) {
          const auto c = line.find(',', a);
          cells.push_back(line.substr(a, c == std::string::npos ? std::string::npos : c - a));
          if (c == std::string::npos) break;
          a = c + 1;
        }
        if (cells.size() > 6 && !cells[6].empty() && cells[6] != last) {
          last = cells[6];
          md += fmt::format("| {} | {} |\n", cells[0], fmt_num(-std::stod(cells[6])));
        }
      }
      md += "\n";
    }
  }

  if (const auto csv = read_file(dir.path() / "revise" / "summary.csv")) {
    std::map<std::string, std::vector<double>> by_stratum;
    std::size_t start = csv->find('\n') + 1;
    while (start < csv->size()) {
      auto end = csv->find('\n', start);
      const std::string line = csv->substr(start, end - start);
      start = end + 1;
      std::vector<std::string> cells;
      std::size_t a = 0;
      while (true) {
        const auto c = line.find(',', a);
        cells.push_back(line.substr(a, c == std::string::npos ? std::string::npos : c - a));
        if (c == std::string::npos) break;
        a = c + 1;
      }
      if (cells.size() >= 7 && cells[6] == "ok") by_stratum[cells[1]].push_back(std::stod(cells[4]));
    }
    md += "## Revision\n\n| stratum | papers | mean delta S | improved |\n|---|---|---|---|\n";
    for (const auto& [stratum, deltas] : by_stratum) {
      double sum = 0;
      std::size_t improved = 0;
      for (double d : deltas) {
        sum += d;
        improved += d > 0;
      }
      md += fmt::format("| {} | {} | {} | {} |\n", stratum, deltas.size(),
                        fmt_num(sum / static_cast<double>(deltas.size())), improved);
    }
    md += "\n";
  }

  const auto runs = load_rank_runs(dir.path());
  if (!runs.empty()) {
    md += "## Ranking\n\n| run | seed | matches | disagreement with committee |\n|---|---|---|---|\n";
    for (const auto& e : fs::directory_iterator(dir.path() / "rank")) {
      if (!fs::exists(e.path() / "run.json")) continue;
    }
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(dir.path() / "rank"))
      if (fs::exists(e.path() / "run.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      const ojson j = ojson::parse(*read_file(d / "run.json"));
      md += fmt::format("| {} | {} | {} | {} |\n", j["label"].get<std::string>(), j["seed"].get<std::uint64_t>(),
                        j["attempted"].get<std::size_t>() - j["skipped"].get<std::size_t>(),
                        fmt_num(j["human_disagreement"].get<double>()));
    }
    md += "\nReference disagreement between human committees: 0.23 and 0.259.\n\n";
    const ConsistencyMatrix m = consistency_matrix(runs);
    md += "## Consistency (disagreement rate)\n\n| run |";
    for (const auto& l : m.labels) md += " " + l + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < m.labels.size(); ++i) md += "---|";
    md += "\n";
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      md += "| " + m.labels[i] + " |";
      for (std::size_t j = 0; j < m.labels.size(); ++j) md += m.dr[i][j] ? " " + fmt_num(*m.dr[i][j]) + " |" : " NA |";
      md += "\n";
    }
    md += "\nDiagonal entries compare reruns of the same configuration; they need distinct seeds to measure "
          "consistency rather than determinism.\n";
    for (const auto& s : m.same_seed_reruns) md += fmt::format("- reruns of {} share a seed\n", s);
  }
  atomic_write(dir.path() / "report.md", md);
  out << md;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"apres: rubric search, guided revision and pairwise ranking of research papers"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  std::size_t synth_papers = 200;
  std::string synth_out;
  synth->add_option("--papers", synth_papers, "number of papers")->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out, "output corpus file")->required();

  auto* ingest = app.add_subcommand("ingest", "validate a corpus and summarize it");
  auto* split = app.add_subcommand("split", "write the train/validation/test assignment");
  auto* rubric_search = app.add_subcommand("rubric-search", "search for a citation-predictive rubric");
  auto* score = app.add_subcommand("score", "score a split with a rubric");
  std::string score_split = "test";
  score->add_option("--split", score_split, "train, validation, test or all");
  auto* revise = app.add_subcommand("revise", "revise papers against a rubric");
  std::string revise_split = "test", stratum = "all";
  std::size_t limit = 0;
  std::vector<std::string> only;
  revise->add_option("--split", revise_split, "train, validation, test or all");
  revise->add_option("--stratum", stratum, "clear-accept, borderline, clear-reject or all");
  revise->add_option("--limit", limit, "revise at most this many papers (0 = no limit)");
  revise->add_option("--paper", only, "revise only these paper ids");
  auto* rank = app.add_subcommand("rank", "run a judged tournament and threshold decisions");
  std::string rank_split = "test", label;
  rank->add_option("--split", rank_split, "train, validation, test or all");
  rank->add_option("--label", label, "run label (defaults to the model name)");
  auto* consistency = app.add_subcommand("consistency", "disagreement matrix across rank runs");
  std::vector<std::string> others;
  consistency->add_option("--from", others, "further run directories whose rank runs are included");
  auto* report = app.add_subcommand("report", "aggregate the run directory into report.md");

  for (auto* cmd : {synth, ingest, split, rubric_search, score, revise, rank, consistency, report})
    add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const RunConfig config = resolve_config(common);
    if (synth->parsed()) return cmd_synth(config, synth_papers, synth_out, out);
    if (ingest->parsed()) return cmd_ingest(config, out);
    if (split->parsed()) return cmd_split(config, out);
    if (rubric_search->parsed()) return cmd_rubric_search(config, out);
    if (score->parsed()) return cmd_score(config, score_split, out);
    if (revise->parsed()) return cmd_revise(config, revise_split, stratum, limit, only, out, err);
    if (rank->parsed()) return cmd_rank(config, rank_split, label, out);
    if (consistency->parsed()) return cmd_consistency(config, others, out);
    if (report->parsed()) return cmd_report(config, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ConfigErrc::ResolvedMismatch || e.code() == ConfigErrc::MissingPath ? kExitDomain : kExitUsage;
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == CliErrc::Usage ? kExitUsage : kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace apres
