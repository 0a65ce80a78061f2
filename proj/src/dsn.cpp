#include "rainsr/dsn.hpp"

#include <algorithm>
#include <cmath>

#include "rainsr/resample.hpp"
#include "rainsr/rng.hpp"

namespace rainsr {

namespace {

constexpr std::uint64_t kTagDsn = 0x20;
constexpr std::uint64_t kTagDlr = 0x21;

}  // namespace

void DsnSettings::validate() const {
  dsn.validate();
  discriminator.validate();
  if (dsn.family != Family::dsn) throw ConfigError("dsn network must be of family dsn");
  if (discriminator.family != Family::patch_disc) throw ConfigError("dsn discriminator must be patch_disc");
  if (!(lambda_content > 0.0)) throw ConfigError("lambda_content must be positive");
  if (!(lambda_adv >= 0.0)) throw ConfigError("lambda_adv must be non-negative");
}

DsnState DsnState::create(const DsnSettings& settings, std::uint64_t seed) {
  settings.validate();
  DsnState s{settings,
             seed,
             build_network<float>(settings.dsn, derive_seed(seed, kTagDsn)),
             build_network<float>(settings.discriminator, derive_seed(seed, kTagDlr)),
             {},
             {},
             0};
  s.opt_dsn = OptimizerState<float>::init(s.dsn.params, settings.adam);
  s.opt_d_lr = OptimizerState<float>::init(s.d_lr.params, settings.adam);
  return s;
}

void DsnState::set_learning_rate(double lr) {
  opt_dsn.settings.lr = lr;
  opt_d_lr.settings.lr = lr;
}

LossValue loss_content_lowfreq(const Tensor<float>& dsn_out, const Tensor<float>& src_hr) {
  if (src_hr.rank() != 4 || dsn_out.rank() != 4 || src_hr.h() != 4 * dsn_out.h() || src_hr.w() != 4 * dsn_out.w() ||
      src_hr.n() != dsn_out.n() || src_hr.c() != dsn_out.c()) {
    throw DimensionError("loss_content_lowfreq: dsn_out " + shape_string(dsn_out.shape()) + " is not src_hr " +
                         shape_string(src_hr.shape()) + " / 4");
  }
  const Tensor<float> anchor = box_blur3(resize_bicubic(src_hr, Scale{1, 4}));
  LossValue l1 = loss_l1(box_blur3(dsn_out), anchor);
  return {l1.value, box_blur3_adjoint(l1.grad)};
}

LossRecord train_step_dsn(DsnState& state, const Tensor<float>& hr, const Tensor<float>& real_lr) {
  if (hr.rank() != 4 || real_lr.rank() != 4 || hr.h() != 4 * real_lr.h() || hr.w() != 4 * real_lr.w()) {
    throw DimensionError("train_step_dsn: rainy HR " + shape_string(hr.shape()) + " must be 4x real LR " +
                         shape_string(real_lr.shape()));
  }
  auto& g = state.dsn;
  auto& d = state.d_lr;
  const double lc = state.settings.lambda_content;
  const double la = state.settings.lambda_adv;

  g.params.zero_grad();
  d.params.zero_grad();
  Trace<float> tg, td;
  const Tensor<float> fake = g.net.forward(g.params, hr, &tg);
  LossValue content = loss_content_lowfreq(fake, hr);
  const LossValue adv = loss_adv_ls(d.net.forward(d.params, fake, &td), Target::real);

  LossRecord rec;
  rec.set("loss_content", content.value);
  rec.set("loss_g_adv", adv.value);
  rec.require_finite("dsn");

  Tensor<float> grad = std::move(content.grad);
  scale_in_place(grad, static_cast<float>(lc));
  if (la > 0.0) {
    Tensor<float> g_adv = d.net.backward(d.params, td, adv.grad);
    scale_in_place(g_adv, static_cast<float>(la));
    grad += g_adv;
  }
  g.net.backward(g.params, tg, grad);
  opt_step(g.params, state.opt_dsn);

  d.params.zero_grad();
  const LossValue lr_real = loss_adv_ls(d.net.forward(d.params, real_lr, &td), Target::real);
  Tensor<float> gr = lr_real.grad;
  scale_in_place(gr, 0.5f);
  d.net.backward(d.params, td, gr);
  const LossValue lr_fake = loss_adv_ls(d.net.forward(d.params, fake, &td), Target::fake);
  Tensor<float> gf = lr_fake.grad;
  scale_in_place(gf, 0.5f);
  d.net.backward(d.params, td, gf);
  rec.set("loss_d_lr", 0.5 * (lr_real.value + lr_fake.value));
  rec.require_finite("dsn");
  opt_step(d.params, state.opt_d_lr);

  ++state.step;
  return rec;
}

Image degrade(const BuiltNetwork<float>& dsn, const Image& img) {
  if (img.height % 4 != 0 || img.width % 4 != 0) {
    throw DimensionError("degrade: input dimensions must be multiples of 4 (crop first)");
  }
  return from_model_range(dsn(to_model_range(img)));
}

Image degrade(const DsnState& state, const Image& img) { return degrade(state.dsn, img); }

double WeightMap::mean() const {
  double acc = 0.0;
  for (float v : values) acc += v;
  return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

WeightMap domain_distance_weight(const DiscFn& d_lr, const Image& lr_img) {
  const Tensor<float> raw = d_lr(to_model_range(lr_img));
  if (raw.rank() != 4 || raw.n() != 1 || raw.c() != 1) {
    throw DimensionError("domain_distance_weight: expected 1 x 1 x h x w discriminator output, got " +
                         shape_string(raw.shape()));
  }
  Tensor<float> clamped = raw;
  for (auto& v : clamped.values()) v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
  const Tensor<float> up = PlaneResampler::bilinear(raw.h(), raw.w(), lr_img.height, lr_img.width).apply(clamped);
  WeightMap m{lr_img.height, lr_img.width, std::vector<float>(up.values())};
  // Convex bilinear weights keep values in [0, 1]; clamp guards rounding.
  for (auto& v : m.values) v = std::clamp(v, 0.0f, 1.0f);
  return m;
}

WeightMap domain_distance_weight(const BuiltNetwork<float>& d_lr, const Image& lr_img) {
  return domain_distance_weight([&](const Tensor<float>& x) { return d_lr(x); }, lr_img);
}

}  // namespace rainsr
