#include "rainsr/cli.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <optional>

#include "rainsr/config.hpp"
#include "rainsr/datasets.hpp"
#include "rainsr/error.hpp"
#include "rainsr/image_io.hpp"
#include "rainsr/pipeline.hpp"
#include "rainsr/text_format.hpp"

namespace rainsr {

namespace fs = std::filesystem;

namespace {

struct ConfigSource {
  std::string path;
  std::string profile;

  TrainConfig load() const {
    if (!path.empty()) return load_config(path);
    return parse_config("profile = " + (profile.empty() ? std::string("desk") : profile), "<--profile>");
  }
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("-c,--config", src.path, "Config file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--profile", src.profile, "Profile defaults when no config file is given")
      ->check(CLI::IsMember({"desk", "paper"}));
}

int grad_check_all(std::ostream& out, std::uint64_t seed) {
  bool ok = true;
  for (Family f : {Family::translator_gen, Family::patch_disc, Family::dsn, Family::srn}) {
    const NetworkSpec spec = minimal_spec(f);
    const GradCheckResult r = grad_check(spec, seed);
    const bool pass = r.max_rel_error <= 1e-4;
    ok = ok && pass;
    out << std::left << std::setw(16) << to_string(f) << " max_rel_error=" << std::scientific << std::setprecision(3)
        << r.max_rel_error << " max_abs_error=" << r.max_abs_error << std::defaultfloat << " worst=" << r.worst_parameter << "[" << r.worst_element << "]"
        << " checked=" << r.checked << (pass ? " ok" : " FAIL") << "\n";
  }
  return ok ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rainy low-resolution to clean high-resolution (x4) pipeline", "rainsr"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Generate the synthetic micro-dataset");
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  ConfigSource synth_cfg;
  synth->add_option("-o,--out", synth_out, "Dataset directory")->required();
  synth->add_option("--seed", synth_seed, "Base seed");
  add_config_options(synth, synth_cfg);

  // train
  auto* train = app.add_subcommand("train", "Train one stage (or all three in order)");
  std::string train_stage;
  std::string run_dir;
  std::string resume;
  std::optional<std::uint64_t> stop_after;
  std::vector<std::uint64_t> snapshots;
  bool quiet = false;
  ConfigSource train_cfg;
  train->add_option("stage", train_stage, "translator | dsn | srn | all")
      ->required()
      ->check(CLI::IsMember({"translator", "dsn", "srn", "all"}));
  train->add_option("-o,--out", run_dir, "Run directory")->required();
  train->add_option("--resume", resume, "Checkpoint of the same stage to continue from")->check(CLI::ExistingFile);
  train->add_option("--stop-after", stop_after, "Stop after this many completed steps");
  train->add_option("--snapshot-at", snapshots, "Also checkpoint to <stage>_step<N>.ckpt at these steps");
  train->add_flag("-q,--quiet", quiet, "No progress lines");
  add_config_options(train, train_cfg);

  // infer
  auto* infer = app.add_subcommand("infer", "Super-resolve one image x4");
  std::string infer_in;
  std::string infer_out;
  std::string infer_ckpt;
  infer->add_option("-i,--input", infer_in, "Rainy LR image (PNG or JPEG)")->required();
  infer->add_option("-o,--output", infer_out, "Output PNG")->required();
  infer->add_option("-k,--checkpoint", infer_ckpt, "srn checkpoint")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a trained run on the paired eval set");
  std::string eval_run;
  std::string eval_out;
  std::vector<std::string> baseline_specs;
  ConfigSource eval_cfg;
  eval->add_option("-r,--run", eval_run, "Run directory")->required();
  eval->add_option("-o,--out", eval_out, "Report directory")->required();
  eval->add_option("--baseline", baseline_specs, "name=dir of precomputed HR outputs");
  add_config_options(eval, eval_cfg);

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every network family");
  std::uint64_t gc_seed = 0;
  gc->add_option("--seed", gc_seed, "Seed for weights and inputs");

  // bake-pairs
  auto* bake = app.add_subcommand("bake-pairs", "Write pseudo-pairs of a trained run as PNGs");
  std::string bake_run;
  std::string bake_out;
  int bake_count = 8;
  ConfigSource bake_cfg;
  bake->add_option("-r,--run", bake_run, "Run directory")->required();
  bake->add_option("-o,--out", bake_out, "Destination directory")->required();
  bake->add_option("-n,--count", bake_count, "Number of pairs");
  add_config_options(bake, bake_cfg);

  // print-config
  auto* show = app.add_subcommand("print-config", "Print the effective configuration and its fingerprint");
  ConfigSource show_cfg;
  add_config_options(show, show_cfg);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "rainsr: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return 1;
  }

  try {
    if (*synth) {
      TrainConfig cfg = synth_cfg.load();
      RainParams rain = cfg.data.rain;
      make_micro_dataset(synth_out, synth_seed, cfg.data.micro, rain);
      out << "wrote micro-dataset to " << synth_out << "\n";
    } else if (*train) {
      const TrainConfig cfg = train_cfg.load();
      RunOptions opts;
      if (!resume.empty()) opts.resume = fs::path(resume);
      opts.stop_after = stop_after;
      opts.snapshots = snapshots;
      opts.progress = quiet ? nullptr : &out;
      std::vector<Stage> stages;
      if (train_stage == "all") {
        if (opts.resume || opts.stop_after || !opts.snapshots.empty()) {
          err << "rainsr: --resume, --stop-after and --snapshot-at apply to a single stage\n";
          return 1;
        }
        stages = {Stage::translator, Stage::dsn, Stage::srn};
      } else {
        stages = {stage_from_string(train_stage)};
      }
      for (Stage s : stages) {
        const StageResult r = run_stage(cfg, s, run_dir, opts);
        out << to_string(s) << ": step " << r.checkpoint.step << "/" << r.total_steps << " -> "
            << r.checkpoint_path.string() << " (" << std::fixed << std::setprecision(1) << r.wall_seconds << " s)\n"
            << std::defaultfloat;
      }
    } else if (*infer) {
      const Checkpoint c = load_checkpoint(infer_ckpt);
      const BuiltNetwork<float> srn = network_from_checkpoint(c, "srn");
      const Image lr = crop_to_multiple(read_image(infer_in), 4);
      write_png(infer_out, super_resolve(srn, lr));
    } else if (*eval) {
      const TrainConfig cfg = eval_cfg.load();
      std::vector<ExternalBaseline> baselines;
      for (const auto& b : baseline_specs) {
        const auto eq = b.find('=');
        if (eq == std::string::npos || eq == 0) {
          err << "rainsr: --baseline expects name=dir, got '" << b << "'\n";
          return 1;
        }
        baselines.push_back({b.substr(0, eq), b.substr(eq + 1)});
      }
      const MetricsReport report = evaluate_run(cfg, eval_run, eval_out, baselines);
      out << "images " << report.rows.size() << "\n"
          << "median psnr gain (dB) " << format_double(report.median_psnr_gain()) << "\n"
          << "median ssim gain " << format_double(report.median_ssim_gain()) << "\n"
          << "report " << (fs::path(eval_out) / "report.csv").string() << "\n";
    } else if (*gc) {
      return grad_check_all(out, gc_seed);
    } else if (*bake) {
      const TrainConfig cfg = bake_cfg.load();
      bake_pairs(cfg, bake_run, bake_count, bake_out);
      out << "wrote " << bake_count << " pairs to " << bake_out << "\n";
    } else if (*show) {
      const TrainConfig cfg = show_cfg.load();
      out << cfg.canonical_text() << "# fingerprint " << cfg.fingerprint() << "\n";
    }
  } catch (const std::exception& e) {
    err << "rainsr: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace rainsr
