#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "rainsr/checkpoint.hpp"
#include "rainsr/cli.hpp"
#include "rainsr/image_io.hpp"
#include "support.hpp"

using namespace rainsr;
using rainsr::testing::random_image;
using rainsr::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_tiny_config(const fs::path& path, const fs::path& data) {
  std::ofstream f(path);
  f << "seed = 1\n"
    << "[data]\nroot = " << data.generic_string() << "\nsunny = 3\nrainy = 3\nreal_lr = 3\neval = 2\nscene_size = 32\n"
    << "[translator]\nsteps = 2\nbatch_size = 1\npatch_size = 16\nbase_channels = 4\nresidual_blocks = 1\n"
    << "disc_channels = 4\n"
    << "[dsn]\nsteps = 2\nbatch_size = 1\npatch_size = 32\nbase_channels = 4\ndisc_channels = 4\n"
    << "[srn]\nsteps = 2\nbatch_size = 1\npatch_size = 32\nbase_channels = 4\nresidual_blocks = 1\ndisc_channels = 4\n";
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  const Outcome missing = cli({"infer", "-i", "x.png"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("--output"), std::string::npos);
  EXPECT_EQ(cli({"train", "gan", "--out", "x"}).code, 1);
  EXPECT_EQ(cli({"print-config", "--profile", "huge"}).code, 1);
}

TEST(Cli, HelpExitsZero) {
  const Outcome h = cli({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("train"), std::string::npos);
  EXPECT_EQ(cli({"train", "--help"}).code, 0);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  TempDir dir("cli");
  const Outcome o = cli({"infer", "-i", (dir / "missing.png").string(), "-o", (dir / "o.png").string(), "-k",
                         (dir / "none.ckpt").string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("rainsr: error:"), std::string::npos);
  // dsn before translator is a sequencing error.
  write_tiny_config(dir / "c.cfg", dir / "data");
  EXPECT_EQ(cli({"synth-data", "--out", (dir / "data").string(), "-c", (dir / "c.cfg").string()}).code, 0);
  const Outcome seq = cli({"train", "dsn", "--out", (dir / "run").string(), "-c", (dir / "c.cfg").string()});
  EXPECT_EQ(seq.code, 2);
  EXPECT_NE(seq.err.find("translator"), std::string::npos);
}

TEST(Cli, PrintConfigShowsFingerprint) {
  const Outcome o = cli({"print-config", "--profile", "paper"});
  // The paper profile needs a data root; without one this is a config error.
  if (std::getenv("RAINSR_DATA_ROOT") == nullptr) {
    EXPECT_EQ(o.code, 2);
  }
  const Outcome d = cli({"print-config"});
  EXPECT_EQ(d.code, 0);
  EXPECT_NE(d.out.find("translator.steps = 300"), std::string::npos);
  EXPECT_NE(d.out.find("# fingerprint "), std::string::npos);
}

TEST(Cli, InferQuadruplesAndCrops) {
  TempDir dir("cli");
  SrnSettings s;
  s.srn = NetworkSpec::srn(4, 1);
  s.discriminator = NetworkSpec::patch_disc(4);
  save_checkpoint(to_checkpoint(SrnState::create(s, 0), "x"), dir / "srn.ckpt");
  write_png(dir / "a.png", random_image(16, 16, 1));
  write_png(dir / "b.png", random_image(18, 21, 2));
  for (const auto& [name, h, w] : {std::tuple{"a", 64, 64}, std::tuple{"b", 64, 80}}) {
    const fs::path out = dir / (std::string(name) + "_sr.png");
    const Outcome o = cli({"infer", "-i", (dir / (std::string(name) + ".png")).string(), "-o", out.string(), "-k",
                           (dir / "srn.ckpt").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const Image img = read_png(out);
    EXPECT_EQ(img.height, h);
    EXPECT_EQ(img.width, w);
  }
}

TEST(Cli, GradCheckPasses) {
  const Outcome o = cli({"grad-check"});
  EXPECT_EQ(o.code, 0) << o.out;
  for (const char* f : {"translator_gen", "patch_disc", "dsn", "srn"}) EXPECT_NE(o.out.find(f), std::string::npos);
  EXPECT_EQ(o.out.find("FAIL"), std::string::npos);
}

TEST(Cli, TrainEvaluateBakeEndToEnd) {
  TempDir dir("cli");
  write_tiny_config(dir / "c.cfg", dir / "data");
  const std::string cfg = (dir / "c.cfg").string();
  const std::string run = (dir / "run").string();
  ASSERT_EQ(cli({"synth-data", "--out", (dir / "data").string(), "-c", cfg}).code, 0);
  EXPECT_EQ(cli({"train", "all", "--out", run, "-c", cfg, "--stop-after", "1"}).code, 1);
  const Outcome t = cli({"train", "all", "--out", run, "-c", cfg, "-q"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("srn: step 2/2"), std::string::npos) << t.out;
  const Outcome e = cli({"evaluate", "-r", run, "-o", (dir / "eval").string(), "-c", cfg});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("images 2"), std::string::npos);
  EXPECT_EQ(cli({"evaluate", "-r", run, "-o", (dir / "eval").string(), "-c", cfg, "--baseline", "nodir"}).code, 1);
  ASSERT_EQ(cli({"bake-pairs", "-r", run, "-o", (dir / "pairs").string(), "-n", "2", "-c", cfg}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "pairs" / "pair_0001_hr.png"));

  // Stop and resume one stage through the CLI.
  const std::string run2 = (dir / "run2").string();
  ASSERT_EQ(cli({"train", "translator", "--out", run2, "-c", cfg, "--stop-after", "1", "-q"}).code, 0);
  fs::copy_file(dir / "run2" / "translator.ckpt", dir / "resume.ckpt");
  ASSERT_EQ(cli({"train", "translator", "--out", run2, "-c", cfg, "--resume", (dir / "resume.ckpt").string(), "-q"}).code,
            0);
  EXPECT_EQ(load_checkpoint(dir / "run2" / "translator.ckpt"), load_checkpoint(dir / "run" / "translator.ckpt"));
}
