#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "gtnet/kv_file.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome cli(const std::string& args) {
  const std::string cmd = std::string(GTNET_CLI) + " " + args + " 2>&1";
  Outcome r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  static fs::path dir() { return fs::temp_directory_path() / "gtnet_cli"; }
  static std::string at(const std::string& name) { return (dir() / name).string(); }

  static void SetUpTestSuite() {
    fs::remove_all(dir());
    fs::create_directories(dir());
  }
  static void TearDownTestSuite() { fs::remove_all(dir()); }

  static void pipeline(const std::string& tag) {
    ASSERT_EQ(cli("design --out " + at(tag + "/engine.txt")).code, 0);
    ASSERT_EQ(cli("gen-mc --cfg " + at(tag + "/engine.txt") + " --n 60 --seed 3 --out " + at(tag + "/mc")).code, 0);
    const Outcome p = cli("pretrain --model-out " + at(tag + "/run") + " --data " + at(tag + "/mc") +
                        " --width 8 --epochs 3 --batch 16 --physics-warmup 1 --physics-ramp 1");
    ASSERT_EQ(p.code, 0) << p.out;
    const Outcome e = cli("eval --models hybrid:" + at(tag + "/run") + " --data " + at(tag + "/mc") +
                        " --target T6 --report " + at(tag + "/report"));
    ASSERT_EQ(e.code, 0) << e.out;
  }
};

}  // namespace

TEST_F(Cli, HelpListsSubcommands) {
  const Outcome r = cli("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"design", "gen-mc", "gen-fd", "pretrain", "train-fd", "train-tnn", "solve-w", "eval"}) {
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  }
}

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(cli("pretrain --bogus").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("gen-mc --n 10").code, 1);
}

TEST_F(Cli, BadInputExitCodes) {
  EXPECT_EQ(cli("design --spec " + at("nope.txt") + " --out " + at("x.txt")).code, 1);
  gtnet::write_text_file(dir() / "broken.txt", "format gtnet-engine\nversion 99\n");
  EXPECT_EQ(cli("gen-mc --cfg " + at("broken.txt") + " --n 5 --out " + at("m")).code, 3);
}

TEST_F(Cli, SmokePipelineAndDeterminism) {
  pipeline("a");
  pipeline("b");
  EXPECT_TRUE(fs::exists(dir() / "a/report/stats.txt"));
  EXPECT_TRUE(fs::exists(dir() / "a/run/model/manifest.txt"));
  EXPECT_TRUE(fs::exists(dir() / "a/run/run_manifest.json"));
  for (const char* f : {"engine.txt", "mc/train.txt", "mc/test.txt", "run/history.txt", "run/model/hpc.net",
                        "report/stats.txt", "report/errors_hybrid.txt"}) {
    ASSERT_TRUE(fs::exists(dir() / "a" / f)) << f;
    EXPECT_EQ(gtnet::read_text_file(dir() / "a" / f), gtnet::read_text_file(dir() / "b" / f)) << f;
  }
  // MC data has no reference predictions recorded
  const Outcome r = cli("eval --models reference --data " + at("a/mc") + " --report " + at("a/r2"));
  EXPECT_EQ(r.code, 3) << r.out;
}

TEST_F(Cli, FlightPipeline) {
  ASSERT_EQ(cli("design --out " + at("f/engine.txt")).code, 0);
  ASSERT_EQ(cli("gen-mc --cfg " + at("f/engine.txt") + " --n 60 --seed 3 --out " + at("f/mc")).code, 0);
  ASSERT_EQ(cli("pretrain --model-out " + at("f/run") + " --data " + at("f/mc") +
                " --width 8 --epochs 2 --batch 16 --physics-warmup 0 --physics-ramp 0")
                .code,
            0);
  const Outcome g = cli("gen-fd --cfg " + at("f/engine.txt") + " --duration 400 --train-ratio 0.5 --seed 2 --out " +
                        at("f/fd"));
  ASSERT_EQ(g.code, 0) << g.out;
  for (const char* f : {"train.txt", "test.txt", "engine.txt", "mission.txt", "noise.txt", "degradation.txt"}) {
    EXPECT_TRUE(fs::exists(dir() / "f/fd" / f)) << f;
  }
  const Outcome t = cli("train-fd --model " + at("f/run") + " --data " + at("f/fd") + " --epochs 2 --batch 8");
  ASSERT_EQ(t.code, 0) << t.out;
  EXPECT_TRUE(fs::exists(dir() / "f/run-fd/model/manifest.txt"));
  ASSERT_EQ(cli("train-tnn --data " + at("f/fd") + " --model-out " + at("f/tnn") +
                " --layers 3 --width 8 --epochs 2 --batch 8")
                .code,
            0);
  const Outcome s = cli("solve-w --model " + at("f/run-fd") + " --data " + at("f/fd") + " --out " + at("f/w.txt"));
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_TRUE(fs::exists(dir() / "f/w.txt.manifest.json"));
  const Outcome e = cli("eval --models hybrid:" + at("f/run-fd") + ",hybrid-w:" + at("f/run-fd") + ",reference,tnn:" +
                        at("f/tnn") + " --data " + at("f/fd") + " --report " + at("f/report"));
  ASSERT_EQ(e.code, 0) << e.out;
  for (const char* name : {"hybrid", "hybrid_w", "reference", "tnn"}) {
    EXPECT_TRUE(fs::exists(dir() / "f/report" / (std::string("errors_") + name + ".txt"))) << name;
  }
}
