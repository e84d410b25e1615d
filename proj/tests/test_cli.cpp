#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string err;
};

RunResult run(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(SSSOM_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = sssom::read_file(err);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string synth_args(const fs::path& out) {
  return "synth --rows 12 --cols 12 --posts-per-cell 20 --persons 5 --points 30 --seed 3 --out " + q(out);
}

}  // namespace

TEST(Cli, FullPipelineSucceedsAndWritesConfig) {
  fixtures::TempDir dir("cli_pipeline");
  const fs::path syn = dir / "synth", part = dir / "part", ev = dir / "eval", geo = dir / "geo", ex = dir / "exp",
                 grid = dir / "grid", base = dir / "base";

  ASSERT_EQ(run(synth_args(syn), dir.path()).exit_code, 0);
  for (const char* f : {"posts.tsv", "field.csv", "truth_assignment.csv", "truth_clusters.csv", "boundaries.geojson",
                        "traces.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(syn / f)) << f;
  }

  auto r = run("grid --posts " + q(syn / "posts.tsv") + " --precision 3 --monthly --out " + q(grid), dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(sssom::read_file(grid / "field.csv"), sssom::read_file(syn / "field.csv"));

  r = run("partition --field " + q(syn / "field.csv") + " --tau 3 --cycles 20 --seed 1 --out " + q(part), dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run("partition --method polygon --field " + q(syn / "field.csv") + " --boundary " + q(syn / "boundaries.geojson") +
              " --out " + q(base),
          dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;

  r = run("evaluate --field " + q(syn / "field.csv") + " --cycles 10 --folds 2 --fractions 0.1,0.25 --metric both --truth " +
              q(syn / "truth_assignment.csv") + " --baseline " + q(base / "assignment.csv") + " --out " + q(ev),
          dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(ev / "report.csv"));

  r = run("export-geo --partition " + q(part / "assignment.csv") + " --field " + q(syn / "field.csv") + " --out " +
              q(geo),
          dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_FALSE(sssom::load_boundaries(geo / "partition.geojson").empty());

  r = run("exposure --traces " + q(syn / "traces.csv") + " --field " + q(syn / "field.csv") + " --part-a " +
              q(syn / "truth_assignment.csv") + " --part-b " + q(part / "assignment.csv") + " --out " + q(ex),
          dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(ex / "exposure.csv"));

  for (const fs::path& out : {syn, grid, part, base, ev, geo, ex}) {
    ASSERT_TRUE(fs::exists(out / "config.json")) << out;
    const json cfg = json::parse(sssom::read_file(out / "config.json"));
    EXPECT_TRUE(cfg.contains("command"));
    EXPECT_TRUE(cfg["options"].is_object());
  }
  const json cfg = json::parse(sssom::read_file(part / "config.json"));
  EXPECT_EQ(cfg["options"]["tau"], 3);
  EXPECT_EQ(cfg["options"]["cycles"], 20);
  EXPECT_EQ(cfg["options"]["eta0"], 0.1);
  const json grid_cfg = json::parse(sssom::read_file(grid / "config.json"));
  EXPECT_EQ(grid_cfg["options"]["monthly"], true);
  EXPECT_EQ(grid_cfg["options"]["lenient"], false);
}

TEST(Cli, RerunsAreByteIdentical) {
  fixtures::TempDir dir("cli_rerun");
  ASSERT_EQ(run(synth_args(dir / "a"), dir.path()).exit_code, 0);
  ASSERT_EQ(run(synth_args(dir / "b"), dir.path()).exit_code, 0);
  for (const char* f : {"posts.tsv", "field.csv", "traces.csv"}) {
    EXPECT_EQ(sssom::read_file(dir / "a" / f), sssom::read_file(dir / "b" / f)) << f;
  }
  const std::string args = " --tau 3 --cycles 15 --seed 4 --field " + q(dir / "a" / "field.csv");
  ASSERT_EQ(run("partition" + args + " --out " + q(dir / "p1"), dir.path()).exit_code, 0);
  ASSERT_EQ(run("partition" + args + " --out " + q(dir / "p2"), dir.path()).exit_code, 0);
  EXPECT_EQ(sssom::read_file(dir / "p1" / "assignment.csv"), sssom::read_file(dir / "p2" / "assignment.csv"));
  EXPECT_EQ(sssom::read_file(dir / "p1" / "clusters.csv"), sssom::read_file(dir / "p2" / "clusters.csv"));
}

TEST(Cli, MissingInputNamesThePath) {
  fixtures::TempDir dir("cli_missing");
  const fs::path missing = dir / "nope.csv";
  const auto r = run("partition --field " + q(missing) + " --out " + q(dir / "out"), dir.path());
  EXPECT_EQ(r.exit_code, 3);
  const json err = json::parse(r.err);
  EXPECT_EQ(err["error"], "missing_input");
  EXPECT_EQ(err["exit"], 3);
  EXPECT_NE(err["message"].get<std::string>().find(missing.string()), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out" / "assignment.csv"));
}

TEST(Cli, UsageErrorsExitWithTwo) {
  fixtures::TempDir dir("cli_usage");
  ASSERT_EQ(run(synth_args(dir / "s"), dir.path()).exit_code, 0);
  auto r = run("grid --posts " + q(dir / "s" / "posts.tsv") + " --precision 9 --out " + q(dir / "g"), dir.path());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(json::parse(r.err)["exit"], 2);
  EXPECT_EQ(run("partition --field " + q(dir / "s" / "field.csv") + " --winner-rule bogus --out " + q(dir / "p"),
                dir.path())
                .exit_code,
            2);
  EXPECT_EQ(run("no-such-command", dir.path()).exit_code, 2);
}

TEST(Cli, MalformedInputExitsWithFour) {
  fixtures::TempDir dir("cli_malformed");
  sssom::write_file_atomic(dir / "field.csv", "lat_q,lon_q,d,total,positive\n1,2,x,4,1\n");
  const auto r = run("partition --field " + q(dir / "field.csv") + " --out " + q(dir / "out"), dir.path());
  EXPECT_EQ(r.exit_code, 4);
  EXPECT_EQ(json::parse(r.err)["error"], "malformed_input");
}
