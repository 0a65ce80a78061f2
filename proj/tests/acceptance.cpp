// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance --work DIR [--only 1,2,...]
//
// Criteria 4, 5 and 7 share the two full desk runs; 6 reuses the translator
// of the first run.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "rainsr/checkpoint.hpp"
#include "rainsr/config.hpp"
#include "rainsr/error.hpp"
#include "rainsr/evaluation.hpp"
#include "rainsr/image_io.hpp"
#include "rainsr/pipeline.hpp"
#include "rainsr/srn.hpp"
#include "rainsr/text_format.hpp"

using namespace rainsr;
namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point wall = std::chrono::steady_clock::now();
  std::clock_t cpu = std::clock();

  double wall_s() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall).count(); }
  double cpu_s() const { return static_cast<double>(std::clock() - cpu) / CLOCKS_PER_SEC; }
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

Image random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  const std::string s = read_text_file(p);
  return {s.begin(), s.end()};
}

// Column `name` of a loss CSV, indexed by row (row 0 = step 1).
std::vector<double> loss_column(const fs::path& csv, const std::string& name) {
  std::istringstream in(read_text_file(csv));
  std::string line;
  std::getline(in, line);
  int col = -1;
  {
    std::istringstream h(line);
    std::string cell;
    for (int i = 0; std::getline(h, cell, ','); ++i) {
      if (cell == name) col = i;
    }
  }
  if (col < 0) throw Error(csv.string() + " has no column " + name);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::istringstream r(line);
    std::string cell;
    for (int i = 0; std::getline(r, cell, ','); ++i) {
      if (i == col) out.push_back(std::stod(cell));
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += v[i];
  return acc / static_cast<double>(to - from);
}

// Ratio of the last-10-step mean to the step-1..10 mean.
double final_to_initial(const std::vector<double>& v) {
  if (v.size() < 20) throw Error("loss log too short");
  return mean_of(v, v.size() - 10, v.size()) / mean_of(v, 0, 10);
}

class Acceptance {
 public:
  Acceptance(fs::path work, std::set<int> only) : work_(std::move(work)), only_(std::move(only)) {}

  int run() {
    fs::create_directories(work_);
    check(1, [&] { return scale_contract(); });
    check(2, [&] { return gradient_correctness(); });
    check(3, [&] { return metric_oracles(); });
    if (wanted(4) || wanted(5) || wanted(6) || wanted(7)) prepare_desk_runs();
    check(4, [&] { return determinism(); });
    check(5, [&] { return translator_signal(); });
    check(6, [&] { return regression_convergence(); });
    check(7, [&] { return end_to_end(); });
    check(8, [&] { return composition_oracle(); });
    check(9, [&] { return paper_profile(); });
    std::cout << (failures_ == 0 ? "ALL PASS" : std::to_string(failures_) + " FAILED") << "\n";
    return failures_ == 0 ? 0 : 1;
  }

 private:
  bool wanted(int n) const { return only_.empty() || only_.count(n); }

  void check(int n, const std::function<Verdict()>& fn) {
    if (!wanted(n)) return;
    Timer t;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failures_;
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "  ["
              << fmt(t.wall_s(), 3) << " s]" << std::endl;
  }

  TrainConfig desk_config() const {
    TrainConfig c = TrainConfig::defaults(Profile::desk);
    c.seed = 0;
    c.data.root = work_ / "data";
    return c;
  }

  // 1. super_resolve output is exactly 4x for 50 random valid LR sizes.
  Verdict scale_contract() {
    Timer t;
    const TrainConfig c = desk_config();
    const SrnState st = SrnState::create(c.srn_settings(), 0);
    Rng rng(2024);
    int ok = 0;
    for (int i = 0; i < 50; ++i) {
      const int h = kMinSuperResolveInput + static_cast<int>(rng.below(41));
      const int w = kMinSuperResolveInput + static_cast<int>(rng.below(41));
      const Image out = super_resolve(st, random_image(h, w, 100 + i));
      if (out.height == 4 * h && out.width == 4 * w) ++ok;
    }
    const double secs = t.wall_s();
    return {ok == 50 && secs < 30.0, std::to_string(ok) + "/50 sizes exact, " + fmt(secs, 3) + " s (< 30 s)"};
  }

  // 2. Finite-difference gradient check of every family in 64-bit.
  Verdict gradient_correctness() {
    Timer t;
    double worst = 0.0;
    std::string detail;
    for (Family f : {Family::translator_gen, Family::patch_disc, Family::dsn, Family::srn}) {
      const GradCheckResult r = grad_check(minimal_spec(f), 0);
      worst = std::max(worst, r.max_rel_error);
      detail += to_string(f) + "=" + fmt(r.max_rel_error, 3) + " ";
    }
    const double secs = t.wall_s();
    return {worst <= 1e-4 && secs < 120.0, detail + "(<= 1e-4), " + fmt(secs, 3) + " s (< 120 s)"};
  }

  // 3. psnr/ssim against brute-force references.
  Verdict metric_oracles() {
    Timer t;
    double dp = 0.0, ds = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      const Image a = random_image(32, 32, 500 + i);
      Image b = random_image(32, 32, 600 + i);
      for (std::size_t k = 0; k < b.size(); ++k) b.data[k] = 0.6f * a.data[k] + 0.4f * b.data[k];
      dp = std::max(dp, std::abs(psnr(a, b) - rainsr::testing::oracle_psnr(a, b)));
      ds = std::max(ds, std::abs(ssim(a, b) - rainsr::testing::oracle_ssim(a, b)));
    }
    const Image a = random_image(32, 32, 1);
    const bool caps = psnr(a, a) == 100.0 && std::abs(ssim(a, a) - 1.0) < 1e-12;
    const double secs = t.wall_s();
    return {dp <= 1e-6 && ds <= 1e-6 && caps && secs < 30.0,
            "max |psnr - ref| " + fmt(dp, 3) + ", max |ssim - ref| " + fmt(ds, 3) + " (<= 1e-6), identity caps " +
                (caps ? "ok" : "wrong")};
  }

  // Run A: straight desk run with a step-150 translator snapshot.
  // Run B: translator stopped at 100, resumed to the end (snapshot at 150), then dsn and srn.
  void prepare_desk_runs() {
    const TrainConfig c = desk_config();
    if (!fs::exists(work_ / "data" / "manifest.txt")) {
      fs::remove_all(work_ / "data");
      make_micro_dataset(work_ / "data", c.seed, c.data.micro, c.data.rain);
    }
    fs::remove_all(work_ / "run_a");
    fs::remove_all(work_ / "run_b");

    std::cout << "desk run A ..." << std::endl;
    Timer ta;
    RunOptions snap;
    snap.snapshots = {150};
    Timer tt;
    run_stage(c, Stage::translator, work_ / "run_a", snap);
    translator_cpu_ = tt.cpu_s();
    run_stage(c, Stage::dsn, work_ / "run_a");
    run_stage(c, Stage::srn, work_ / "run_a");
    run_a_cpu_ = ta.cpu_s();
    std::cout << "desk run A: " << fmt(run_a_cpu_, 4) << " s CPU (translator " << fmt(translator_cpu_, 4) << " s)"
              << std::endl;

    if (!wanted(4)) return;
    std::cout << "desk run B (interrupted at step 100) ..." << std::endl;
    Timer tb;
    RunOptions first;
    first.stop_after = 100;
    run_stage(c, Stage::translator, work_ / "run_b", first);
    fs::copy_file(work_ / "run_b" / "translator.ckpt", work_ / "run_b" / "translator_step100.ckpt",
                  fs::copy_options::overwrite_existing);
    RunOptions rest;
    rest.resume = work_ / "run_b" / "translator_step100.ckpt";
    rest.snapshots = {150};
    run_stage(c, Stage::translator, work_ / "run_b", rest);
    run_stage(c, Stage::dsn, work_ / "run_b");
    run_stage(c, Stage::srn, work_ / "run_b");
    run_b_cpu_ = tb.cpu_s();
    std::cout << "desk run B: " << fmt(run_b_cpu_, 4) << " s CPU" << std::endl;
  }

  // 4. Byte-identical runs, bit-exact checkpoint round trip, resume equivalence.
  Verdict determinism() {
    const RunPaths a{work_ / "run_a"};
    const RunPaths b{work_ / "run_b"};
    bool finals = true;
    for (Stage s : {Stage::translator, Stage::dsn, Stage::srn}) {
      finals = finals && file_bytes(a.checkpoint(s)) == file_bytes(b.checkpoint(s));
    }
    const bool resume =
        file_bytes(a.snapshot(Stage::translator, 150)) == file_bytes(b.snapshot(Stage::translator, 150));

    // Round trip: reload, re-save, reload again; probe outputs must agree bit for bit.
    const Checkpoint loaded = load_checkpoint(a.checkpoint(Stage::srn));
    const fs::path copy = work_ / "roundtrip_srn.ckpt";
    save_checkpoint(loaded, copy);
    const Checkpoint reloaded = load_checkpoint(copy);
    Tensor<float> probe({4, 3, 16, 16});
    Rng rng(77);
    for (auto& v : probe.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const auto y1 = network_from_checkpoint(loaded, "srn")(probe);
    const auto y2 = network_from_checkpoint(reloaded, "srn")(probe);
    const auto y3 = srn_from_checkpoint(reloaded, desk_config().srn_settings()).srn(probe);
    const bool roundtrip = y1 == y2 && y1 == y3 && file_bytes(copy) == file_bytes(a.checkpoint(Stage::srn));

    const bool fast = run_b_cpu_ < 2.0 * run_a_cpu_;
    return {finals && resume && roundtrip && fast,
            std::string("final checkpoints ") + (finals ? "identical" : "DIFFER") + ", resume(100)+50 vs straight 150 " +
                (resume ? "identical" : "DIFFER") + ", probe round trip " + (roundtrip ? "bit-exact" : "MISMATCH") +
                ", second run " + fmt(run_b_cpu_, 4) + " s CPU (< 2 x " + fmt(run_a_cpu_, 4) + " s)"};
  }

  // 5. Translator cycle loss falls to <= 0.5 of its step-1..10 average.
  Verdict translator_signal() {
    const auto cyc = loss_column(RunPaths{work_ / "run_a"}.loss_log(Stage::translator), "loss_cycle");
    const double ratio = final_to_initial(cyc);
    return {ratio <= 0.5 && translator_cpu_ <= 480.0,
            "cycle loss last-10 mean / first-10 mean = " + fmt(ratio) + " (<= 0.5) over " +
                std::to_string(cyc.size()) + " steps, " + fmt(translator_cpu_, 4) + " s CPU (<= 480 s)"};
  }

  // 6. With adversarial terms off, dsn and srn regression losses fall to <= 0.6.
  Verdict regression_convergence() {
    TrainConfig c = desk_config();
    c.dsn.lambda_adv = 0.0;
    c.srn.lambda_adv = 0.0;
    const fs::path dir = work_ / "run_regression";
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::copy_file(work_ / "run_a" / "translator.ckpt", dir / "translator.ckpt");
    Timer t;
    run_stage(c, Stage::dsn, dir);
    run_stage(c, Stage::srn, dir);
    const double cpu = t.cpu_s();
    const double rd = final_to_initial(loss_column(RunPaths{dir}.loss_log(Stage::dsn), "loss_content"));
    const double rs = final_to_initial(loss_column(RunPaths{dir}.loss_log(Stage::srn), "loss_pix"));
    return {rd <= 0.6 && rs <= 0.6 && cpu <= 480.0,
            "dsn content ratio " + fmt(rd) + ", srn pixel ratio " + fmt(rs) + " (<= 0.6), " + fmt(cpu, 4) +
                " s CPU (<= 480 s)"};
  }

  // 7. Median PSNR / SSIM gain of the trained pipeline over bicubic.
  Verdict end_to_end() {
    const MetricsReport r = evaluate_run(desk_config(), work_ / "run_a", work_ / "eval_a");
    const double dp = r.median_psnr_gain();
    const double ds = r.median_ssim_gain();
    const double total_cpu = run_a_cpu_;
    return {dp >= 0.3 && ds >= 0.005 && total_cpu <= 1200.0,
            "median psnr gain " + fmt(dp) + " dB (>= 0.3), median ssim gain " + fmt(ds) + " (>= 0.005) over " +
                std::to_string(r.rows.size()) + " images, training " + fmt(total_cpu, 4) + " s CPU (<= 1200 s)"};
  }

  // 8. Identity translator + bicubic DSN reproduce plain bicubic pseudo-pairs.
  Verdict composition_oracle() {
    const TrainConfig c = desk_config();
    if (!fs::exists(work_ / "data" / "manifest.txt")) make_micro_dataset(work_ / "data", c.seed, c.data.micro, c.data.rain);
    const TrainingData data = load_training_data(c, false);
    const ImageFn identity = [](const Image& x) { return x; };
    const ImageFn bicubic = [](const Image& x) { return resize_bicubic(x, Scale{1, 4}); };
    const auto pairs = make_pseudo_pairs(identity, bicubic, data.sunny, c.srn.patch_size, 32, 5);
    double worst = 0.0;
    for (const PseudoPair& p : pairs) {
      // Reference: crop the recorded source directly and reduce it.
      worst = std::max(worst, max_abs_diff(p.lr_rainy, resize_bicubic(p.hr_clean, Scale{1, 4})));
    }
    return {worst <= 1e-6, "max |pair lr - bicubic(hr)| = " + fmt(worst, 3) + " over 32 pairs (<= 1e-6)"};
  }

  // 9. The paper profile materializes its schedule and ingestion expectations.
  Verdict paper_profile() {
    const fs::path root = work_ / "bdd_fixture";
    if (!fs::exists(root / "rainy_hr") || !fs::exists(root / "sunny_hr")) {
      fs::remove_all(root);
      fs::create_directories(root / "rainy_hr");
      fs::create_directories(root / "sunny_hr");
      for (int i = 0; i < 306; ++i) write_png(root / "rainy_hr" / ("r" + std::to_string(i) + ".png"), random_image(8, 8, i));
      for (int i = 0; i < 344; ++i) write_png(root / "sunny_hr" / ("s" + std::to_string(i) + ".png"), random_image(8, 8, 1000 + i));
    }
    const TrainConfig c = parse_config("profile = paper\n[data]\nroot = " + root.generic_string() + "\n", "paper");
    const TrainingData d = load_training_data(c, false);
    bool rejects = false;
    TrainConfig wrong = c;
    wrong.data.expected_rainy = 305;
    try {
      load_training_data(wrong, false);
    } catch (const IngestError&) {
      rejects = true;
    }
    const bool ok = c.translator.epochs == 3750 && c.scale == 4 && c.data.expected_rainy == 306 &&
                    c.data.expected_sunny == 344 && d.rainy.size() == 306 && d.sunny.size() == 344 && rejects;
    return {ok, "epochs " + std::to_string(c.translator.epochs) + ", scale " + std::to_string(c.scale) + ", ingested " +
                    std::to_string(d.rainy.size()) + " rainy / " + std::to_string(d.sunny.size()) +
                    " sunny, count mismatch " + (rejects ? "rejected" : "ACCEPTED")};
  }

  fs::path work_;
  std::set<int> only_;
  int failures_ = 0;
  double run_a_cpu_ = 0.0;
  double run_b_cpu_ = 0.0;
  double translator_cpu_ = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory for datasets and runs");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  try {
    return Acceptance(work, std::set<int>(only.begin(), only.end())).run();
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 2;
  }
}
