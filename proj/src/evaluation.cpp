#include "rainsr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rainsr/error.hpp"
#include "rainsr/image_io.hpp"
#include "rainsr/text_format.hpp"

namespace fs = std::filesystem;

namespace rainsr {

namespace {

void require_same_dims(const Image& a, const Image& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable "valid" filtering of a single plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& g) {
  const int oh = h - kWindow + 1;
  const int ow = w - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * plane[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  require_same_dims(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_dims(a, b, "ssim");
  if (a.height < kWindow || a.width < kWindow) {
    throw DimensionError("ssim needs images of at least 11x11, got " + std::to_string(a.height) + "x" +
                         std::to_string(a.width));
  }
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const auto g = gaussian_window();
  const int h = a.height;
  const int w = a.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < Image::kChannels; ++c) {
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = a.data[i * 3 + static_cast<std::size_t>(c)];
      pb[i] = b.data[i * 3 + static_cast<std::size_t>(c)];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, h, w, g);
    const auto mu_b = filter_valid(pb, h, w, g);
    const auto e_aa = filter_valid(paa, h, w, g);
    const auto e_bb = filter_valid(pbb, h, w, g);
    const auto e_ab = filter_valid(pab, h, w, g);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

MetricsSummary MetricsReport::summarize(const std::function<double(const MetricsRow&)>& column) const {
  std::vector<double> vals;
  for (const auto& r : rows) vals.push_back(column(r));
  MetricsSummary s;
  if (vals.empty()) return s;
  double acc = 0.0;
  for (double v : vals) acc += v;
  s.mean = acc / static_cast<double>(vals.size());
  s.median = median(vals);
  return s;
}

double MetricsReport::median_psnr_gain() const {
  return summarize([](const MetricsRow& r) { return r.sr.psnr - r.bicubic.psnr; }).median;
}

double MetricsReport::median_ssim_gain() const {
  return summarize([](const MetricsRow& r) { return r.sr.ssim - r.bicubic.ssim; }).median;
}

Image render_grid(const std::vector<Image>& panels) {
  if (panels.empty()) throw DimensionError("render_grid: no panels");
  constexpr int kSep = 2;
  int h = 0;
  int w = 0;
  for (const auto& p : panels) {
    h = std::max(h, p.height);
    w += p.width;
  }
  w += kSep * static_cast<int>(panels.size() - 1);
  Image out(h, w, 1.0f);
  int x0 = 0;
  for (const auto& p : panels) {
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        for (int c = 0; c < Image::kChannels; ++c) out.at(y, x0 + x, c) = p.at(y, x, c);
      }
    }
    x0 += p.width + kSep;
  }
  return out;
}

MetricsReport evaluate_pipeline(const std::function<Image(const Image&)>& super_resolve_fn,
                                const MicroDatasetManifest& manifest, const EvaluateOptions& options) {
  if (!manifest.paired_eval || manifest.eval.empty()) throw ManifestError("manifest has no paired eval split");
  MetricsReport report;
  report.config_fingerprint = options.config_fingerprint;
  if (!options.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options.out_dir / "grids", ec);
    if (ec) throw IoError("cannot create report directory " + options.out_dir.string());
  }
  for (const auto& t : manifest.eval) {
    const auto load = [&](const fs::path& rel) {
      const fs::path p = manifest.root / rel;
      if (!fs::exists(p)) throw ManifestError("missing eval file for " + t.scene_id + ": " + p.string());
      return read_image(p);
    };
    const Image clean = load(t.clean_hr);
    const Image lr = load(t.rainy_lr);
    if (clean.height != 4 * lr.height || clean.width != 4 * lr.width) {
      throw ManifestError("eval triplet " + t.scene_id + ": clean HR is not 4x the rainy LR");
    }
    const Image sr = super_resolve_fn(lr);
    const Image bic = resize_bicubic(lr, {4, 1});
    MetricsRow row;
    row.name = t.scene_id;
    row.sr = {psnr(sr, clean), ssim(sr, clean)};
    row.bicubic = {psnr(bic, clean), ssim(bic, clean)};
    for (const auto& b : options.baselines) {
      const fs::path p = b.dir / (t.scene_id + ".png");
      if (!fs::exists(p)) continue;
      const Image cand = read_image(p);
      row.baselines.emplace_back(b.name, MetricScores{psnr(cand, clean), ssim(cand, clean)});
    }
    report.rows.push_back(std::move(row));
    if (!options.out_dir.empty()) {
      const fs::path grid = options.out_dir / "grids" / (t.scene_id + ".png");
      write_png(grid, render_grid({enlarge_nearest(lr, 4), bic, sr, clean}));
      report.grids.push_back(grid);
    }
  }
  if (!options.out_dir.empty()) write_report(report, options.out_dir);
  return report;
}

void write_report(const MetricsReport& report, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::vector<std::string> extra;
  for (const auto& r : report.rows) {
    for (const auto& [name, s] : r.baselines) {
      if (std::find(extra.begin(), extra.end(), name) == extra.end()) extra.push_back(name);
    }
  }
  const auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  std::ostringstream csv;
  csv << "name,psnr_sr,ssim_sr,psnr_bicubic,ssim_bicubic";
  for (const auto& e : extra) csv << ",psnr_" << e << ",ssim_" << e;
  csv << "\n";
  for (const auto& r : report.rows) {
    csv << r.name << "," << fmt(r.sr.psnr) << "," << fmt(r.sr.ssim) << "," << fmt(r.bicubic.psnr) << ","
        << fmt(r.bicubic.ssim);
    for (const auto& e : extra) {
      auto it = std::find_if(r.baselines.begin(), r.baselines.end(), [&](const auto& b) { return b.first == e; });
      if (it == r.baselines.end()) {
        csv << ",,";
      } else {
        csv << "," << fmt(it->second.psnr) << "," << fmt(it->second.ssim);
      }
    }
    csv << "\n";
  }
  using Col = std::function<double(const MetricsRow&)>;
  const std::vector<Col> cols = {[](const MetricsRow& r) { return r.sr.psnr; }, [](const MetricsRow& r) { return r.sr.ssim; },
                                 [](const MetricsRow& r) { return r.bicubic.psnr; },
                                 [](const MetricsRow& r) { return r.bicubic.ssim; }};
  for (const char* agg : {"mean", "median"}) {
    csv << agg;
    for (const auto& col : cols) {
      const MetricsSummary s = report.summarize(col);
      csv << "," << fmt(std::string(agg) == "mean" ? s.mean : s.median);
    }
    for (std::size_t i = 0; i < extra.size(); ++i) csv << ",,";
    csv << "\n";
  }
  write_text_file(out_dir / "report.csv", csv.str());

  std::ostringstream hdr;
  hdr << "config_fingerprint = " << report.config_fingerprint << "\n";
  hdr << "images = " << report.rows.size() << "\n";
  hdr << "color_space = RGB (no luma conversion)\n";
  hdr << "psnr = 10*log10(1/MSE) over all RGB samples, peak 1, capped at " << kPsnrCapDb << " dB\n";
  hdr << "ssim = single-scale, 11x11 Gaussian window sigma 1.5, K1 0.01, K2 0.03, valid positions, mean over RGB\n";
  hdr << "grid = rainy LR (nearest x4) | bicubic x4 | SRN x4 | clean HR\n";
  hdr << "median_psnr_gain_db = " << fmt(report.median_psnr_gain()) << "\n";
  hdr << "median_ssim_gain = " << fmt(report.median_ssim_gain()) << "\n";
  write_text_file(out_dir / "header.txt", hdr.str());
}

}  // namespace rainsr
