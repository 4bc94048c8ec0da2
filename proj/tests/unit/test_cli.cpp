#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result sae_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = sae::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path small_config(const fs::path& dir) {
  const auto path = dir / "small.cfg";
  std::ofstream(path) << "rows = 3\ncols = 4\ngroup_breaks = 2\nbase_logit = -2\n"
                         "clusters_per_region = 6\nhouseholds_per_cluster = 15\n"
                         "weight_dispersion = 2\nchains = 2\niterations = 1200\nburn_in = 600\n";
  return path;
}

const std::vector<std::string> kArtifacts = {
    "records.csv",          "boundaries.geojson",  "truth.csv",
    "direct.csv",           "graph.txt",           "posterior.csv",
    "fig1_sample_size.svg", "fig2_prevalence.svg", "fig3_country_zoom.svg",
    "fig4_5_comparison.svg"};

}  // namespace

TEST(Cli, PipelineWritesEveryArtifactWithMetadata) {
  const auto dir = sae::testing::scratch_dir("cli_pipeline");
  const auto cfg = small_config(dir);
  auto r = sae_run({"pipeline", "--config", cfg.string(), "--seed", "7", "--out", (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& f : kArtifacts) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    const std::string tag = f.ends_with(".geojson") ? "\"seed\": 7" : "seed=7 config=";
    EXPECT_NE(slurp(dir / "a" / f).find(tag), std::string::npos) << f;
  }
  EXPECT_NE(slurp(dir / "a" / "boundaries.geojson").find("\"config_hash\""), std::string::npos);
}

TEST(Cli, PipelineIsByteDeterministic) {
  const auto dir = sae::testing::scratch_dir("cli_determinism");
  const auto cfg = small_config(dir);
  for (const char* sub : {"a", "b"})
    ASSERT_EQ(sae_run({"pipeline", "--config", cfg.string(), "--seed", "11", "--out", (dir / sub).string()}).code, 0);
  for (const auto& f : kArtifacts) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Cli, PipelineEqualsSubcommandSequence) {
  const auto dir = sae::testing::scratch_dir("cli_equivalence");
  const auto cfg = small_config(dir);
  const std::vector<std::string> global{"--config", cfg.string(), "--seed", "3"};
  auto with = [&](std::string sub, const fs::path& out) {
    std::vector<std::string> a{std::move(sub)};
    a.insert(a.end(), global.begin(), global.end());
    a.push_back("--out");
    a.push_back(out.string());
    return a;
  };
  ASSERT_EQ(sae_run(with("pipeline", dir / "pipe")).code, 0);
  for (const char* sub : {"simulate", "direct", "adjacency", "smooth", "render", "compare"})
    ASSERT_EQ(sae_run(with(sub, dir / "steps")).code, 0) << sub;
  for (const auto& f : kArtifacts) EXPECT_EQ(slurp(dir / "pipe" / f), slurp(dir / "steps" / f)) << f;
}

TEST(Cli, GlobalFlagsAcceptedBeforeSubcommand) {
  const auto dir = sae::testing::scratch_dir("cli_global");
  auto r = sae_run({"--out", dir.string(), "--seed", "5", "simulate"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "records.csv").find("seed=5 config=none"), std::string::npos);
}

TEST(Cli, StrictNonConvergenceExitsThreeAndKeepsPosterior) {
  const auto dir = sae::testing::scratch_dir("cli_strict");
  ASSERT_EQ(sae_run({"simulate", "--out", dir.string(), "--seed", "2"}).code, 0);
  ASSERT_EQ(sae_run({"direct", "--out", dir.string()}).code, 0);
  ASSERT_EQ(sae_run({"adjacency", "--out", dir.string()}).code, 0);
  auto r = sae_run({"smooth", "--out", dir.string(), "--chains", "2", "--iterations", "1000",
                    "--burn-in", "500", "--strict", "--trace"});
  EXPECT_EQ(r.code, 3) << r.out << r.err;
  const auto post = slurp(dir / "posterior.csv");
  EXPECT_NE(post.find("# converged=no"), std::string::npos);
  EXPECT_NE(post.find("# not-converged"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "trace.csv"));

  auto lax = sae_run({"smooth", "--out", dir.string(), "--chains", "2", "--iterations", "1000",
                      "--burn-in", "500"});
  EXPECT_EQ(lax.code, 0);
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = sae::testing::scratch_dir("cli_usage");
  EXPECT_EQ(sae_run({}).code, 2);
  EXPECT_EQ(sae_run({"simulate", "--bogus"}).code, 2);
  EXPECT_EQ(sae_run({"frobnicate"}).code, 2);
  EXPECT_EQ(sae_run({"direct", "--records", (dir / "missing.csv").string()}).code, 2);
  EXPECT_EQ(sae_run({"smooth", "--out", (dir / "empty").string()}).code, 2);
  EXPECT_EQ(sae_run({"adjacency", "--style", "Q"}).code, 2);

  std::ofstream(dir / "bad.cfg") << "rows = 2\nunknown_key = 1\n";
  EXPECT_EQ(sae_run({"simulate", "--config", (dir / "bad.cfg").string(), "--out", dir.string()}).code, 2);
  EXPECT_EQ(sae_run({"--help"}).code, 0);
}

TEST(Cli, ValidationErrorInInputExitsTwo) {
  const auto dir = sae::testing::scratch_dir("cli_invalid");
  ASSERT_EQ(sae_run({"simulate", "--out", dir.string()}).code, 0);
  std::ofstream(dir / "records.csv") << "region_id,cluster_id,weight,outcome\nR_0_0,c1,0,1\n";
  auto r = sae_run({"direct", "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("row 1"), std::string::npos);
}
