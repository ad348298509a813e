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

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "apres/cli.hpp"
#include "apres/fs_util.hpp"
#include "test_support.hpp"

using apres::testing::TempDir;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "apres");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = apres::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string file(const std::filesystem::path& p) { return apres::read_file(p).value_or("<missing>"); }

// Corpus plus a finished short rubric search in one run directory.
struct Workspace {
  TempDir dir;
  std::string corpus = (dir / "corpus.jsonl").string();
  std::string run = (dir / "run").string();
  std::string seed = "1";

  Workspace() {
    const CliRun s = cli({"synth", "--papers", "20", "--out", corpus, "--seed", "3"});
    EXPECT_EQ(s.code, 0) << s.err;
  }

  std::vector<std::string> common() const {
    return {"--stub", "--corpus", corpus, "--run-dir", run, "--seed", seed, "--workers", "2"};
  }

  CliRun command(const std::string& name, std::vector<std::string> extra = {}) const {
    std::vector<std::string> args{name};
    for (const auto& a : common()) args.push_back(a);
    for (auto& a : extra) args.push_back(std::move(a));
    return cli(args);
  }
};

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  const CliRun r = cli({"rubric-search", "--no-such-flag"});
  EXPECT_EQ(r.code, apres::kExitUsage);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(cli({}).code, apres::kExitUsage); }

TEST(Cli, HelpSucceeds) {
  const CliRun r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("rubric-search"), std::string::npos);
}

TEST(Cli, MissingCorpusIsDomainError) {
  TempDir d;
  const CliRun r = cli({"ingest", "--corpus", (d / "absent.jsonl").string(), "--run-dir", (d / "run").string()});
  EXPECT_EQ(r.code, apres::kExitDomain) << r.err;
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = APRES_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " rubric-search --bogus >/dev/null 2>&1").c_str())), 2);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " --help >/dev/null 2>&1").c_str())), 0);
}

TEST(Cli, RubricSearchWritesJournalAndRubric) {
  Workspace w;
  const CliRun r = w.command("rubric-search", {"--max-iterations", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tree = nlohmann::json::parse(file(std::filesystem::path(w.run) / "rubric_search" / "tree.json"));
  EXPECT_TRUE(tree.contains("best_id"));
  EXPECT_FALSE(tree.at("best_id").is_null());
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(w.run) / "rubric_search" / "metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(w.run) / "best_rubric.txt"));
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(w.run) / "config.resolved"));

  // A second identical invocation resumes a finished journal and changes nothing.
  const std::string before = file(std::filesystem::path(w.run) / "rubric_search" / "tree.json");
  const std::string metrics = file(std::filesystem::path(w.run) / "rubric_search" / "metrics.csv");
  const std::string resolved = file(std::filesystem::path(w.run) / "config.resolved");
  ASSERT_EQ(w.command("rubric-search", {"--max-iterations", "8"}).code, 0);
  EXPECT_EQ(file(std::filesystem::path(w.run) / "rubric_search" / "tree.json"), before);
  EXPECT_EQ(file(std::filesystem::path(w.run) / "rubric_search" / "metrics.csv"), metrics);
  EXPECT_EQ(file(std::filesystem::path(w.run) / "config.resolved"), resolved);
}

TEST(Cli, ResolvedConfigMismatchIsDomainError) {
  Workspace w;
  ASSERT_EQ(w.command("split").code, 0);
  const CliRun r = w.command("split", {"--p-debug", "0.25"});
  EXPECT_EQ(r.code, apres::kExitDomain);
  EXPECT_NE(r.err.find("config"), std::string::npos) << r.err;
}

TEST(Cli, FullStubPipeline) {
  Workspace w;
  const std::filesystem::path run(w.run);
  ASSERT_EQ(w.command("rubric-search", {"--max-iterations", "6"}).code, 0);
  const CliRun score = w.command("score", {"--split", "all"});
  ASSERT_EQ(score.code, 0) << score.err;
  EXPECT_TRUE(std::filesystem::exists(run / "scores" / "all.jsonl"));
  const CliRun revise = w.command("revise", {"--split", "all", "--limit", "2", "--revision-iterations", "5"});
  ASSERT_EQ(revise.code, 0) << revise.err;
  EXPECT_EQ(file(run / "revise" / "summary.csv").rfind("paper_id,stratum,s_ori,s_rev,delta_s,best_node,status\n", 0), 0u);
  const CliRun rank = w.command("rank", {"--split", "all", "--budget", "100", "--label", "stub"});
  ASSERT_EQ(rank.code, 0) << rank.err;
  EXPECT_TRUE(std::filesystem::exists(run / "rank" / "stub-s1" / "ratings.csv"));
  EXPECT_TRUE(std::filesystem::exists(run / "rank" / "stub-s1" / "decisions.csv"));
  w.seed = "2";
  ASSERT_EQ(w.command("rank", {"--split", "all", "--budget", "100", "--label", "stub"}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(run / "rank" / "stub-s2" / "ratings.csv"));
  const CliRun cons = w.command("consistency");
  ASSERT_EQ(cons.code, 0) << cons.err;
  EXPECT_EQ(file(run / "consistency.csv").rfind("run,stub\n", 0), 0u);
  const CliRun report = w.command("report");
  ASSERT_EQ(report.code, 0) << report.err;
  const std::string md = file(run / "report.md");
  EXPECT_NE(md.find("0.23"), std::string::npos);
}

TEST(Cli, SameSeedRunsAcrossDirectoriesAgreeExactly) {
  Workspace a;
  Workspace b;
  // Same corpus for both directories.
  const std::string corpus = a.corpus;
  b.corpus = corpus;
  for (const Workspace* w : {&a, &b}) {
    ASSERT_EQ(w->command("rubric-search", {"--max-iterations", "6"}).code, 0);
    const CliRun r = w->command("rank", {"--split", "all", "--budget", "80", "--label", "stub"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const CliRun cons = a.command("consistency", {"--from", b.run});
  ASSERT_EQ(cons.code, 0) << cons.err;
  EXPECT_EQ(file(std::filesystem::path(a.run) / "consistency.csv"), "run,stub\nstub,0.000000\n");
  EXPECT_EQ(file(std::filesystem::path(a.run) / "rank" / "stub-s1" / "ratings.csv"),
            file(std::filesystem::path(b.run) / "rank" / "stub-s1" / "ratings.csv"));
}
