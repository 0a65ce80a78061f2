#include "rainsr/srn.hpp"

#include <cmath>

#include "rainsr/rng.hpp"

namespace rainsr {

namespace {

constexpr std::uint64_t kTagSrn = 0x30;
constexpr std::uint64_t kTagDhr = 0x31;

}  // namespace

void SrnSettings::validate() const {
  srn.validate();
  discriminator.validate();
  if (srn.family != Family::srn) throw ConfigError("srn network must be of family srn");
  if (discriminator.family != Family::patch_disc) throw ConfigError("srn discriminator must be patch_disc");
  if (!(lambda_pix > 0.0)) throw ConfigError("lambda_pix must be positive");
  if (!(lambda_adv >= 0.0)) throw ConfigError("lambda_adv must be non-negative");
}

SrnState SrnState::create(const SrnSettings& settings, std::uint64_t seed) {
  settings.validate();
  SrnState s{settings,
             seed,
             build_network<float>(settings.srn, derive_seed(seed, kTagSrn)),
             build_network<float>(settings.discriminator, derive_seed(seed, kTagDhr)),
             {},
             {},
             0};
  s.opt_srn = OptimizerState<float>::init(s.srn.params, settings.adam);
  s.opt_d_hr = OptimizerState<float>::init(s.d_hr.params, settings.adam);
  return s;
}

void SrnState::set_learning_rate(double lr) {
  opt_srn.settings.lr = lr;
  opt_d_hr.settings.lr = lr;
}

std::vector<PseudoPair> make_pseudo_pairs(const ImageFn& translate, const ImageFn& degrade_fn,
                                          std::span<const Image> sunny, int patch_size, int count, std::uint64_t seed,
                                          const WeightFn& weights) {
  if (sunny.empty()) throw EmptyDatasetError("make_pseudo_pairs: no sunny images");
  if (patch_size < 4 || patch_size % 4 != 0) throw DimensionError("pseudo-pair patch size must be a multiple of 4");
  for (const Image& img : sunny) {
    if (img.height < patch_size || img.width < patch_size) {
      throw DimensionError("sunny image smaller than the pseudo-pair patch size");
    }
  }
  Rng rng(seed);
  std::vector<PseudoPair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int entry = static_cast<int>(rng.below(sunny.size()));
    const Image& src = sunny[static_cast<std::size_t>(entry)];
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(src.height - patch_size + 1)));
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(src.width - patch_size + 1)));
    PseudoPair p;
    p.hr_clean = crop(src, y, x, patch_size, patch_size);
    p.lr_rainy = degrade_fn(translate(p.hr_clean));
    if (p.lr_rainy.height * 4 != p.hr_clean.height || p.lr_rainy.width * 4 != p.hr_clean.width) {
      throw DimensionError("make_pseudo_pairs: degrader did not reduce by 4");
    }
    if (weights) p.weight_map = weights(p.lr_rainy);
    p.source_entry = entry;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

LossValue loss_pix_weighted(const Tensor<float>& sr, const Tensor<float>& hr, const std::optional<Tensor<float>>& weights) {
  sr.require_same_shape(hr, "loss_pix_weighted");
  if (sr.rank() != 4 || sr.empty()) throw DimensionError("loss_pix_weighted: expected non-empty N x C x H x W");
  if (!weights) {
    return loss_l1(sr, hr);
  }
  const Tensor<float>& w = *weights;
  if (w.rank() != 4 || w.n() != sr.n() || w.c() != 1 || w.h() * 4 != sr.h() || w.w() * 4 != sr.w()) {
    throw DimensionError("loss_pix_weighted: weight map " + shape_string(w.shape()) + " is not LR-sized for " +
                         shape_string(sr.shape()));
  }
  // Mean of the upscaled map equals the mean of the LR map (nearest x4).
  double wsum = 0.0;
  for (float v : w.values()) wsum += v;
  const double wmean = wsum / static_cast<double>(w.size());
  LossValue out{0.0, Tensor<float>(sr.shape())};
  if (!(wmean > 0.0)) {
    // All-zero weights carry no signal.
    return out;
  }
  const double denom = static_cast<double>(sr.size()) * wmean;
  double acc = 0.0;
  for (int n = 0; n < sr.n(); ++n) {
    const float* wp = w.plane(n, 0);
    for (int c = 0; c < sr.c(); ++c) {
      const float* a = sr.plane(n, c);
      const float* b = hr.plane(n, c);
      float* g = out.grad.plane(n, c);
      for (int y = 0; y < sr.h(); ++y) {
        for (int x = 0; x < sr.w(); ++x) {
          const double wt = wp[(y / 4) * w.w() + x / 4];
          const double d = static_cast<double>(a[y * sr.w() + x]) - b[y * sr.w() + x];
          acc += wt * std::abs(d);
          g[y * sr.w() + x] = static_cast<float>(d > 0.0 ? wt / denom : (d < 0.0 ? -wt / denom : 0.0));
        }
      }
    }
  }
  out.value = acc / denom;
  return out;
}

LossRecord train_step_srn(SrnState& state, std::span<const PseudoPair> pairs) {
  if (pairs.empty()) throw DimensionError("train_step_srn: empty pair batch");
  std::vector<Image> lr_imgs;
  std::vector<Image> hr_imgs;
  bool any_weights = false;
  for (const auto& p : pairs) {
    if (p.hr_clean.height != 4 * p.lr_rainy.height || p.hr_clean.width != 4 * p.lr_rainy.width) {
      throw DimensionError("train_step_srn: pseudo-pair HR must be 4x its LR");
    }
    lr_imgs.push_back(p.lr_rainy);
    hr_imgs.push_back(p.hr_clean);
    any_weights = any_weights || p.weight_map.has_value();
  }
  const Tensor<float> lr = to_model_range(lr_imgs);
  const Tensor<float> hr = to_model_range(hr_imgs);

  std::optional<Tensor<float>> weights;
  double mean_weight = 1.0;
  if (state.settings.use_domain_weights && any_weights) {
    Tensor<float> w = Tensor<float>::nchw(lr.n(), 1, lr.h(), lr.w(), 1.0f);
    for (int n = 0; n < lr.n(); ++n) {
      const auto& wm = pairs[static_cast<std::size_t>(n)].weight_map;
      if (!wm) continue;
      if (wm->height != lr.h() || wm->width != lr.w()) throw DimensionError("weight map is not LR-sized");
      std::copy(wm->values.begin(), wm->values.end(), w.plane(n, 0));
    }
    double acc = 0.0;
    for (float v : w.values()) acc += v;
    mean_weight = acc / static_cast<double>(w.size());
    weights = std::move(w);
  }

  auto& g = state.srn;
  auto& d = state.d_hr;
  g.params.zero_grad();
  d.params.zero_grad();
  Trace<float> tg, td;
  const Tensor<float> sr = g.net.forward(g.params, lr, &tg);
  LossValue pix = loss_pix_weighted(sr, hr, weights);
  const LossValue adv = loss_adv_ls(d.net.forward(d.params, sr, &td), Target::real);

  LossRecord rec;
  rec.set("loss_pix", pix.value);
  rec.set("loss_g_adv", adv.value);
  rec.require_finite("srn");

  Tensor<float> grad = std::move(pix.grad);
  scale_in_place(grad, static_cast<float>(state.settings.lambda_pix));
  if (state.settings.lambda_adv > 0.0) {
    Tensor<float> g_adv = d.net.backward(d.params, td, adv.grad);
    scale_in_place(g_adv, static_cast<float>(state.settings.lambda_adv));
    grad += g_adv;
  }
  g.net.backward(g.params, tg, grad);
  opt_step(g.params, state.opt_srn);

  d.params.zero_grad();
  const LossValue l_real = loss_adv_ls(d.net.forward(d.params, hr, &td), Target::real);
  Tensor<float> gr = l_real.grad;
  scale_in_place(gr, 0.5f);
  d.net.backward(d.params, td, gr);
  const LossValue l_fake = loss_adv_ls(d.net.forward(d.params, sr, &td), Target::fake);
  Tensor<float> gf = l_fake.grad;
  scale_in_place(gf, 0.5f);
  d.net.backward(d.params, td, gf);
  rec.set("loss_d_hr", 0.5 * (l_real.value + l_fake.value));
  rec.set("mean_weight", mean_weight);
  rec.require_finite("srn");
  opt_step(d.params, state.opt_d_hr);

  ++state.step;
  return rec;
}

Image super_resolve(const BuiltNetwork<float>& srn, const Image& lr_img) {
  if (lr_img.height < kMinSuperResolveInput || lr_img.width < kMinSuperResolveInput) {
    throw DimensionError("super_resolve: input " + std::to_string(lr_img.height) + "x" + std::to_string(lr_img.width) +
                         " is below the 8x8 minimum");
  }
  return from_model_range(srn(to_model_range(lr_img)));
}

Image super_resolve(const SrnState& state, const Image& lr_img) { return super_resolve(state.srn, lr_img); }

}  // namespace rainsr
