#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "kwmhn/cli.hpp"
#include "kwmhn/io.hpp"

using namespace kwmhn;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path tmp(const std::string& name) {
  const fs::path p = fs::path(KWMHN_TEST_TMP) / "cli" / name;
  fs::create_directories(p.parent_path());
  return p;
}

}  // namespace

TEST(Cli, PresetsAndUsage) {
  auto r = invoke({"presets", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["memory"].size(), 5u);
  EXPECT_EQ(j["attention"].size(), 4u);
  EXPECT_EQ(invoke({"presets"}).code, 0);
  EXPECT_EQ(invoke({}).code, cli::kUsage);
  r = invoke({"run-memory", "--bogus"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_EQ(json::parse(r.err)["error"], "usage");
}

TEST(Cli, ConfigErrors) {
  auto r = invoke({"run-memory", "--preset", "hopfield", "--out-dir", tmp("bad").string()});
  EXPECT_EQ(r.code, cli::kConfig);
  EXPECT_EQ(json::parse(r.err)["error"], "config");
  EXPECT_EQ(invoke({"run-attention", "--variant", "lstm"}).code, cli::kConfig);
  EXPECT_EQ(invoke({"--isa", "sparc", "presets"}).code, cli::kConfig);
}

TEST(Cli, GenData) {
  const fs::path p = tmp("tree.txt");
  auto r = invoke({"gen-data", "--kind", "tgcrp", "--b", "5", "--num-data", "50", "--out",
                p.string(), "--similarity"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(p));
  EXPECT_TRUE(fs::exists(p.string() + ".edges"));
  const json m = json::parse(read_file(p.string() + ".manifest.json"));
  EXPECT_EQ(m["outputs"].size(), 2u);
  const fs::path c = tmp("case.csv");
  r = invoke({"gen-data", "--kind", "case", "--L", "4", "--C", "3", "--num-data", "2", "--out",
           c.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_csv(read_file(c)).rows.size(), 8u);
}

TEST(Cli, RunMemoryReproducible) {
  std::vector<json> outs;
  for (const char* name : {"m1", "m2"}) {
    const fs::path d = tmp(name);
    auto r = invoke({"run-memory", "--preset", "mhn", "--compare", "kw-f01", "--runs", "4",
                  "--seq-len", "300", "--test-window", "100", "--dprime-samples", "2",
                  "--out-dir", d.string(), "--jobs", name[1] == '1' ? "1" : "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(d / "mhn_c1.csv"));
    EXPECT_TRUE(fs::exists(d / "kw-f01_c0.5.csv"));
    outs.push_back(json::parse(read_file(d / "manifest.json"))["outputs"]);
  }
  EXPECT_EQ(outs[0], outs[1]);
}

TEST(Cli, RunAttention) {
  const fs::path d = tmp("att");
  auto r = invoke({"run-attention", "--variant", "qk-align", "--proj", "on", "--runs", "2",
                "--iterations", "10", "--batch", "8", "--snapshot-every", "5", "--out-dir",
                d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "run00_trace.csv"));
  EXPECT_TRUE(fs::exists(d / "run01_aux.csv"));
  const json s = json::parse(read_file(d / "summary.json"));
  EXPECT_EQ(s["runs"].size(), 2u);
}

TEST(Cli, AnalyzeTheoryRoundTrip) {
  const fs::path t = tmp("theory.csv");
  auto r = invoke({"analyze", "--emit-theory", t.string(), "--cue", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"analyze", "--fit-decay", t.string(), "--cue", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["delta"]["C"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(j["delta"]["beta"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(j["delta"]["baseline"].get<double>(), 0.0, 1e-12);
  r = invoke({"analyze", "--segments", t.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"analyze", "--significance", t.string(), t.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["significance"]["a_higher_ages"], 0);
}

TEST(Cli, AnalyzeBadInputs) {
  const fs::path empty = tmp("empty.csv");
  write_file(empty, "age,rd_mean\n");
  auto r = invoke({"analyze", "--fit-decay", empty.string()});
  EXPECT_EQ(r.code, cli::kRuntime);
  EXPECT_EQ(json::parse(r.err)["error"], "insufficient_data");
  const fs::path nocol = tmp("nocol.csv");
  write_file(nocol, "age,other\n1,2\n");
  r = invoke({"analyze", "--fit-decay", nocol.string()});
  EXPECT_EQ(r.code, cli::kConfig);
  EXPECT_EQ(json::parse(r.err)["error"], "schema");
  EXPECT_EQ(invoke({"analyze"}).code, cli::kConfig);
}

TEST(Cli, TomlConfigFile) {
  const fs::path cfg = tmp("run.toml");
  const fs::path d = tmp("toml");
  write_file(cfg, "[run-memory]\npreset = \"mhn\"\nruns = 2\nseq-len = 200\ntest-window = 50\n"
                  "out-dir = \"" + d.string() + "\"\n");
  auto r = invoke({"--config", cfg.string(), "run-memory", "--cue", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(read_file(d / "manifest.json"));
  EXPECT_EQ(m["config"]["runs"], 2);
  EXPECT_EQ(m["config"]["seq_len"], 200);
  EXPECT_TRUE(fs::exists(d / "mhn_c1.csv"));
}
