#include "rainsr/translator.hpp"

#include <cmath>
#include <string>

#include "rainsr/rng.hpp"

namespace rainsr {

namespace {

constexpr std::uint64_t kTagGS2R = 0x10;
constexpr std::uint64_t kTagGR2S = 0x11;
constexpr std::uint64_t kTagDRainy = 0x12;
constexpr std::uint64_t kTagDSunny = 0x13;
constexpr std::uint64_t kTagPoolRainy = 0x14;
constexpr std::uint64_t kTagPoolSunny = 0x15;

Tensor<float> scaled(Tensor<float> t, double s) {
  scale_in_place(t, static_cast<float>(s));
  return t;
}

}  // namespace

void TranslatorSettings::validate() const {
  generator.validate();
  discriminator.validate();
  if (generator.family != Family::translator_gen) throw ConfigError("translator generator must be translator_gen");
  if (discriminator.family != Family::patch_disc) throw ConfigError("translator discriminator must be patch_disc");
  if (!(lambda_cyc > 0.0)) throw ConfigError("lambda_cyc must be positive");
  if (!(lambda_id >= 0.0)) throw ConfigError("lambda_id must be non-negative");
  if (buffer_capacity < 0) throw ConfigError("buffer capacity must be non-negative");
}

Tensor<float> ReplayBuffer::query(const Tensor<float>& fakes, Rng& rng) {
  if (capacity_ == 0) return fakes;
  std::vector<Tensor<float>> out;
  out.reserve(static_cast<std::size_t>(fakes.n()));
  for (int i = 0; i < fakes.n(); ++i) {
    Tensor<float> img = slice_sample(fakes, i);
    if (static_cast<int>(images_.size()) < capacity_) {
      images_.push_back(img);
      out.push_back(std::move(img));
    } else if (rng.uniform() < 0.5) {
      const auto slot = static_cast<std::size_t>(rng.below(images_.size()));
      out.push_back(images_[slot]);
      images_[slot] = std::move(img);
    } else {
      out.push_back(std::move(img));
    }
  }
  return concat_batch(std::span<const Tensor<float>>(out));
}

void ReplayBuffer::restore(std::vector<Tensor<float>> images) {
  if (static_cast<int>(images.size()) > capacity_) throw StateError("replay buffer larger than its capacity");
  images_ = std::move(images);
}

TranslatorState TranslatorState::create(const TranslatorSettings& settings, std::uint64_t seed) {
  settings.validate();
  TranslatorState s{settings,
                    seed,
                    build_network<float>(settings.generator, derive_seed(seed, kTagGS2R)),
                    build_network<float>(settings.generator, derive_seed(seed, kTagGR2S)),
                    build_network<float>(settings.discriminator, derive_seed(seed, kTagDRainy)),
                    build_network<float>(settings.discriminator, derive_seed(seed, kTagDSunny)),
                    {},
                    {},
                    {},
                    {},
                    0,
                    ReplayBuffer(settings.buffer_capacity),
                    ReplayBuffer(settings.buffer_capacity)};
  s.opt_g_s2r = OptimizerState<float>::init(s.g_s2r.params, settings.adam);
  s.opt_g_r2s = OptimizerState<float>::init(s.g_r2s.params, settings.adam);
  s.opt_d_rainy = OptimizerState<float>::init(s.d_rainy.params, settings.adam);
  s.opt_d_sunny = OptimizerState<float>::init(s.d_sunny.params, settings.adam);
  return s;
}

void TranslatorState::set_learning_rate(double lr) {
  for (auto* o : {&opt_g_s2r, &opt_g_r2s, &opt_d_rainy, &opt_d_sunny}) o->settings.lr = lr;
}

double translator_identity_loss(const TensorFn& g_s2r, const TensorFn& g_r2s, const Tensor<float>& sunny,
                                const Tensor<float>& rainy) {
  return loss_l1(g_s2r(rainy), rainy).value + loss_l1(g_r2s(sunny), sunny).value;
}

namespace {

// Least-squares discriminator update: 0.5 (ls(D(real), 1) + ls(D(fake), 0)).
double discriminator_step(BuiltNetwork<float>& d, OptimizerState<float>& opt, const Tensor<float>& real,
                          const Tensor<float>& fake, const char* name) {
  d.params.zero_grad();
  Trace<float> tr;
  const LossValue lr = loss_adv_ls(d.net.forward(d.params, real, &tr), Target::real);
  d.net.backward(d.params, tr, scaled(lr.grad, 0.5));
  const LossValue lf = loss_adv_ls(d.net.forward(d.params, fake, &tr), Target::fake);
  d.net.backward(d.params, tr, scaled(lf.grad, 0.5));
  const double loss = 0.5 * (lr.value + lf.value);
  if (!std::isfinite(loss)) throw DivergenceError(std::string("translator: non-finite loss term '") + name + "'");
  opt_step(d.params, opt);
  return loss;
}

}  // namespace

LossRecord train_step_translator(TranslatorState& state, const Tensor<float>& sunny, const Tensor<float>& rainy) {
  sunny.require_same_shape(rainy, "train_step_translator");
  auto& gs = state.g_s2r;
  auto& gr = state.g_r2s;
  auto& dr = state.d_rainy;
  auto& ds = state.d_sunny;
  const double lc = state.settings.lambda_cyc;
  const double li = state.settings.lambda_id;

  // Generator pass.
  gs.params.zero_grad();
  gr.params.zero_grad();
  dr.params.zero_grad();
  ds.params.zero_grad();

  Trace<float> t_fake_r, t_rec_s, t_fake_s, t_rec_r, t_id_r, t_id_s, t_dr, t_ds;
  const Tensor<float> fake_r = gs.net.forward(gs.params, sunny, &t_fake_r);
  const Tensor<float> rec_s = gr.net.forward(gr.params, fake_r, &t_rec_s);
  const Tensor<float> fake_s = gr.net.forward(gr.params, rainy, &t_fake_s);
  const Tensor<float> rec_r = gs.net.forward(gs.params, fake_s, &t_rec_r);

  const LossValue adv_r = loss_adv_ls(dr.net.forward(dr.params, fake_r, &t_dr), Target::real);
  const LossValue adv_s = loss_adv_ls(ds.net.forward(ds.params, fake_s, &t_ds), Target::real);
  const LossValue cyc_s = loss_l1(rec_s, sunny);
  const LossValue cyc_r = loss_l1(rec_r, rainy);

  LossRecord rec;
  rec.set("loss_g_adv", adv_r.value + adv_s.value);
  rec.set("loss_cycle", cyc_s.value + cyc_r.value);

  Tensor<float> g_fake_r = dr.net.backward(dr.params, t_dr, adv_r.grad);
  Tensor<float> g_fake_s = ds.net.backward(ds.params, t_ds, adv_s.grad);
  g_fake_r += gr.net.backward(gr.params, t_rec_s, scaled(cyc_s.grad, lc));
  g_fake_s += gs.net.backward(gs.params, t_rec_r, scaled(cyc_r.grad, lc));
  gs.net.backward(gs.params, t_fake_r, g_fake_r);
  gr.net.backward(gr.params, t_fake_s, g_fake_s);

  double id_total = 0.0;
  if (li > 0.0) {
    const Tensor<float> id_r = gs.net.forward(gs.params, rainy, &t_id_r);
    const Tensor<float> id_s = gr.net.forward(gr.params, sunny, &t_id_s);
    const LossValue l_id_r = loss_l1(id_r, rainy);
    const LossValue l_id_s = loss_l1(id_s, sunny);
    id_total = l_id_r.value + l_id_s.value;
    gs.net.backward(gs.params, t_id_r, scaled(l_id_r.grad, li));
    gr.net.backward(gr.params, t_id_s, scaled(l_id_s.grad, li));
  } else {
    const auto fs = [&](const Tensor<float>& x) { return gs(x); };
    const auto fr = [&](const Tensor<float>& x) { return gr(x); };
    id_total = translator_identity_loss(fs, fr, sunny, rainy);
  }
  rec.set("loss_id", id_total);
  rec.require_finite("translator generator");

  opt_step(gs.params, state.opt_g_s2r);
  opt_step(gr.params, state.opt_g_r2s);

  // Discriminator passes on replayed fakes.
  Rng pool_rng_r(derive_seed(derive_seed(state.seed, kTagPoolRainy), state.step));
  Rng pool_rng_s(derive_seed(derive_seed(state.seed, kTagPoolSunny), state.step));
  const Tensor<float> pooled_r = state.buffer_rainy.query(fake_r, pool_rng_r);
  const Tensor<float> pooled_s = state.buffer_sunny.query(fake_s, pool_rng_s);
  rec.set("loss_d_rainy", discriminator_step(dr, state.opt_d_rainy, rainy, pooled_r, "loss_d_rainy"));
  rec.set("loss_d_sunny", discriminator_step(ds, state.opt_d_sunny, sunny, pooled_s, "loss_d_sunny"));

  ++state.step;
  return rec;
}

Image translate_sunny_to_rainy(const BuiltNetwork<float>& g_s2r, const Image& img) {
  if (img.height % 4 != 0 || img.width % 4 != 0) {
    throw DimensionError("translator input must have dimensions that are multiples of 4 (crop first)");
  }
  return from_model_range(g_s2r(to_model_range(img)));
}

Image translate_sunny_to_rainy(const TranslatorState& state, const Image& img) {
  return translate_sunny_to_rainy(state.g_s2r, img);
}

}  // namespace rainsr
