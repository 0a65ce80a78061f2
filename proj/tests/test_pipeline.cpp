#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "rainsr/error.hpp"
#include "rainsr/pipeline.hpp"
#include "rainsr/text_format.hpp"
#include "support.hpp"

using namespace rainsr;
using rainsr::testing::TempDir;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(const fs::path& data_root) {
  TrainConfig c = TrainConfig::defaults(Profile::desk);
  c.data.root = data_root;
  c.data.micro = {4, 4, 4, 2, 32};
  c.translator.steps = 6;
  c.translator.batch_size = 2;
  c.translator.patch_size = 16;
  c.translator.base_channels = 4;
  c.translator.residual_blocks = 1;
  c.translator.disc_channels = 4;
  c.translator.buffer_capacity = 3;
  c.dsn.steps = 4;
  c.dsn.batch_size = 2;
  c.dsn.patch_size = 32;
  c.dsn.base_channels = 4;
  c.dsn.disc_channels = 4;
  c.srn.steps = 4;
  c.srn.batch_size = 2;
  c.srn.patch_size = 32;
  c.srn.base_channels = 4;
  c.srn.residual_blocks = 1;
  c.srn.disc_channels = 4;
  return c;
}

// Shared tiny dataset for the whole suite.
class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("pipe");
    make_micro_dataset(dir_->path() / "data", 3, tiny_config("").data.micro);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  TrainConfig config() const { return tiny_config(dir_->path() / "data"); }
  fs::path data_root() const { return dir_->path() / "data"; }

  static TempDir* dir_;
};

TempDir* PipelineTest::dir_ = nullptr;

std::string slurp(const fs::path& p) { return read_text_file(p); }

std::vector<std::uint8_t> bytes_of(const fs::path& p) {
  const std::string s = slurp(p);
  return {s.begin(), s.end()};
}

int count_lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  int n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

}  // namespace

TEST(StageSeed, SplittingRule) {
  EXPECT_EQ(stage_seed(5, Stage::dsn, SeedPurpose::pairs), derive_seed(5, 256 * 2 + 3));
  std::set<std::uint64_t> seen;
  for (Stage s : {Stage::translator, Stage::dsn, Stage::srn}) {
    for (SeedPurpose p : {SeedPurpose::init, SeedPurpose::stream_a, SeedPurpose::stream_b, SeedPurpose::pairs}) {
      EXPECT_TRUE(seen.insert(stage_seed(0, s, p)).second);
    }
  }
  EXPECT_EQ(stage_from_string("srn"), Stage::srn);
  EXPECT_THROW(stage_from_string("gan"), ConfigError);
}

TEST(RunManifest, RecordKeepsPipelineOrder) {
  RunManifest m;
  m.record({Stage::translator, "a", "t.ckpt", "t.csv", 1.5, 10});
  m.record({Stage::dsn, "a", "d.ckpt", "d.csv", 2.0, 5});
  m.record({Stage::srn, "a", "s.ckpt", "s.csv", 3.0, 5});
  m.record({Stage::dsn, "b", "d2.ckpt", "d2.csv", 2.5, 6});
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[1].stage, Stage::dsn);
  EXPECT_EQ(m.records[1].config_fingerprint, "b");
  const RunManifest back = RunManifest::parse(m.to_text(), "m");
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[1].checkpoint, "d2.ckpt");
  EXPECT_EQ(back.records[1].steps, 6u);
  EXPECT_EQ(back.to_text(), m.to_text());
  EXPECT_TRUE(RunManifest::load("/nonexistent/manifest").records.empty());
}

TEST(DirectoryLock, ExclusiveAndReleased) {
  TempDir dir("lock");
  {
    DirectoryLock a(dir.path());
    EXPECT_THROW(DirectoryLock b(dir.path()), StateError);
  }
  EXPECT_NO_THROW(DirectoryLock c(dir.path()));
}

TEST_F(PipelineTest, TrainingDataAndTotals) {
  TrainConfig c = config();
  const TrainingData d = load_training_data(c, true);
  EXPECT_EQ(d.sunny.size(), 4u);
  EXPECT_EQ(d.real_lr.size(), 4u);
  EXPECT_EQ(stage_total_steps(c, Stage::translator, d), 6u);
  c.translator.epochs = 2;
  c.translator.batch_size = 3;
  EXPECT_EQ(stage_total_steps(c, Stage::translator, d), 4u);
  EXPECT_EQ(stage_total_steps(c, Stage::srn, d), 4u);
  c.data.expected_sunny = 5;
  EXPECT_THROW(load_training_data(c, false), IngestError);
}

TEST_F(PipelineTest, StagesRequirePredecessors) {
  TempDir run("run");
  EXPECT_THROW(run_stage(config(), Stage::dsn, run.path()), SequencingError);
  EXPECT_THROW(run_stage(config(), Stage::srn, run.path()), SequencingError);
  EXPECT_THROW(evaluate_run(config(), run.path(), run / "eval"), SequencingError);
}

TEST_F(PipelineTest, LockedDirectoryIsRefused) {
  TempDir run("run");
  DirectoryLock held(run.path());
  EXPECT_THROW(run_stage(config(), Stage::translator, run.path()), StateError);
}

TEST_F(PipelineTest, FullRunWritesLogsManifestAndReport) {
  TempDir run("run");
  std::ostringstream progress;
  RunOptions opts;
  opts.progress = &progress;
  opts.progress_every = 2;
  const StageResult t = run_stage(config(), Stage::translator, run.path(), opts);
  EXPECT_EQ(t.losses.size(), 6u);
  EXPECT_EQ(t.checkpoint.step, 6u);
  EXPECT_EQ(t.checkpoint.config_fingerprint, config().fingerprint());
  run_stage(config(), Stage::dsn, run.path());
  run_stage(config(), Stage::srn, run.path());
  EXPECT_FALSE(progress.str().empty());
  EXPECT_FALSE(fs::exists(run.path() / ".rainsr.lock"));

  const RunPaths paths{run.path()};
  const auto header = [&](Stage s) {
    std::istringstream in(slurp(paths.loss_log(s)));
    std::string h;
    std::getline(in, h);
    return h;
  };
  EXPECT_EQ(header(Stage::translator), "step,loss_g_adv,loss_cycle,loss_id,loss_d_rainy,loss_d_sunny");
  EXPECT_EQ(header(Stage::dsn), "step,loss_content,loss_g_adv,loss_d_lr");
  EXPECT_EQ(header(Stage::srn), "step,loss_pix,loss_g_adv,loss_d_hr,mean_weight");
  EXPECT_EQ(count_lines(paths.loss_log(Stage::translator)), 7);
  EXPECT_EQ(count_lines(paths.loss_log(Stage::srn)), 5);

  const RunManifest m = RunManifest::load(paths.manifest());
  ASSERT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.records[2].stage, Stage::srn);
  EXPECT_EQ(m.records[0].steps, 6u);

  const MetricsReport r = evaluate_run(config(), run.path(), run / "eval");
  EXPECT_EQ(r.rows.size(), 2u);
  EXPECT_TRUE(fs::exists(run / "eval" / "report.csv"));

  bake_pairs(config(), run.path(), 3, run / "pairs");
  EXPECT_TRUE(fs::exists(run / "pairs" / "pair_0002_lr.png"));
  EXPECT_TRUE(fs::exists(run / "pairs" / "pair_0002_hr.png"));

  // Re-running an earlier stage invalidates later manifest entries.
  run_stage(config(), Stage::dsn, run.path());
  EXPECT_EQ(RunManifest::load(paths.manifest()).records.size(), 2u);
}

TEST_F(PipelineTest, ResumeIsBitExact) {
  TempDir straight("straight");
  TempDir split("split");
  RunOptions snap;
  snap.snapshots = {3};
  run_stage(config(), Stage::translator, straight.path(), snap);

  RunOptions first;
  first.stop_after = 3;
  const StageResult partial = run_stage(config(), Stage::translator, split.path(), first);
  EXPECT_EQ(partial.checkpoint.step, 3u);
  const RunPaths a{straight.path()};
  const RunPaths b{split.path()};
  EXPECT_EQ(bytes_of(a.snapshot(Stage::translator, 3)), bytes_of(b.checkpoint(Stage::translator)));

  RunOptions rest;
  rest.resume = split / "resume.ckpt";
  fs::copy_file(b.checkpoint(Stage::translator), *rest.resume);
  run_stage(config(), Stage::translator, split.path(), rest);
  EXPECT_EQ(bytes_of(a.checkpoint(Stage::translator)), bytes_of(b.checkpoint(Stage::translator)));
  EXPECT_EQ(slurp(a.loss_log(Stage::translator)), slurp(b.loss_log(Stage::translator)));

  // Same for a later stage.
  run_stage(config(), Stage::dsn, straight.path());
  RunOptions dsn_first;
  dsn_first.stop_after = 2;
  run_stage(config(), Stage::dsn, split.path(), dsn_first);
  RunOptions dsn_rest;
  dsn_rest.resume = split / "dsn_resume.ckpt";
  fs::copy_file(b.checkpoint(Stage::dsn), *dsn_rest.resume);
  run_stage(config(), Stage::dsn, split.path(), dsn_rest);
  EXPECT_EQ(bytes_of(a.checkpoint(Stage::dsn)), bytes_of(b.checkpoint(Stage::dsn)));
}

TEST_F(PipelineTest, ResumeUnderDifferentConfigIsRefused) {
  TempDir run("run");
  RunOptions first;
  first.stop_after = 2;
  run_stage(config(), Stage::translator, run.path(), first);
  TrainConfig changed = config();
  changed.translator.lambda_id = 1.0;
  RunOptions rest;
  rest.resume = run / "r.ckpt";
  fs::copy_file(RunPaths{run.path()}.checkpoint(Stage::translator), *rest.resume);
  EXPECT_THROW(run_stage(changed, Stage::translator, run.path(), rest), VersionError);
}

TEST_F(PipelineTest, TwoRunsFromSameSeedAreIdentical) {
  TempDir a("a");
  TempDir b("b");
  for (Stage s : {Stage::translator, Stage::dsn, Stage::srn}) {
    run_stage(config(), s, a.path());
    run_stage(config(), s, b.path());
    EXPECT_EQ(bytes_of(RunPaths{a.path()}.checkpoint(s)), bytes_of(RunPaths{b.path()}.checkpoint(s))) << to_string(s);
  }
  TrainConfig other = config();
  other.seed = 1;
  TempDir c("c");
  run_stage(other, Stage::translator, c.path());
  EXPECT_NE(bytes_of(RunPaths{a.path()}.checkpoint(Stage::translator)),
            bytes_of(RunPaths{c.path()}.checkpoint(Stage::translator)));
}
