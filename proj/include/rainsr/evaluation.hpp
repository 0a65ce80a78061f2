#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rainsr/datasets.hpp"
#include "rainsr/image.hpp"

namespace rainsr {

inline constexpr double kPsnrCapDb = 100.0;

// 10 log10(peak^2 / MSE) over all RGB samples, capped at 100 dB.
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5) over valid positions,
// K1 = 0.01, K2 = 0.03, peak 1, averaged over positions and RGB channels.
double ssim(const Image& a, const Image& b);

struct MetricScores {
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsRow {
  std::string name;
  MetricScores sr;
  MetricScores bicubic;
  std::vector<std::pair<std::string, MetricScores>> baselines;  // external candidates
};

struct MetricsSummary {
  double mean = 0.0;
  double median = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<std::filesystem::path> grids;
  std::string config_fingerprint;

  // Aggregates are recomputed from rows on every call.
  MetricsSummary summarize(const std::function<double(const MetricsRow&)>& column) const;
  double median_psnr_gain() const;
  double median_ssim_gain() const;
};

double median(std::vector<double> v);

// Panels side by side with 2-pixel white separators; shorter panels are
// top-aligned on a white canvas.
Image render_grid(const std::vector<Image>& panels);

struct ExternalBaseline {
  std::string name;
  std::filesystem::path dir;  // holds <scene_id>.png at HR resolution
};

struct EvaluateOptions {
  std::filesystem::path out_dir;  // empty: metrics only, nothing written
  std::string config_fingerprint;
  std::vector<ExternalBaseline> baselines;
};

// Scores super_resolve(rainy LR) and bicubic x4 of rainy LR against the clean
// HR of every eval triplet; writes report.csv, header.txt, grids/*.png.
MetricsReport evaluate_pipeline(const std::function<Image(const Image&)>& super_resolve_fn,
                                const MicroDatasetManifest& manifest, const EvaluateOptions& options = {});

void write_report(const MetricsReport& report, const std::filesystem::path& out_dir);

}  // namespace rainsr
