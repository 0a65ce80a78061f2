#include "rainsr/nets.hpp"

#include <cmath>
#include <sstream>

#include "layers.hpp"
#include "rainsr/rng.hpp"

namespace rainsr {

std::string to_string(Family f) {
  switch (f) {
    case Family::translator_gen:
      return "translator_gen";
    case Family::patch_disc:
      return "patch_disc";
    case Family::dsn:
      return "dsn";
    case Family::srn:
      return "srn";
  }
  return "unknown";
}

Family family_from_string(const std::string& s) {
  if (s == "translator_gen") return Family::translator_gen;
  if (s == "patch_disc") return Family::patch_disc;
  if (s == "dsn") return Family::dsn;
  if (s == "srn") return Family::srn;
  throw Error("unknown network family: " + s);
}

NetworkSpec NetworkSpec::translator_gen(int base_channels, int residual_blocks) {
  return {Family::translator_gen, base_channels, residual_blocks, {1, 1}};
}
NetworkSpec NetworkSpec::patch_disc(int base_channels) { return {Family::patch_disc, base_channels, 0, {1, 8}}; }
NetworkSpec NetworkSpec::dsn(int base_channels, int residual_blocks) {
  return {Family::dsn, base_channels, residual_blocks, {1, 4}};
}
NetworkSpec NetworkSpec::srn(int base_channels, int residual_blocks) {
  return {Family::srn, base_channels, residual_blocks, {4, 1}};
}

void NetworkSpec::validate() const {
  if (base_channels < 1) throw DimensionError("base_channels must be positive");
  if (residual_blocks < 0) throw DimensionError("residual_blocks must be non-negative");
  const auto expect = [&](int num, int den) {
    if (scale_factor.num * den != scale_factor.den * num) {
      throw DimensionError(to_string(family) + " requires scale factor " + std::to_string(num) + "/" + std::to_string(den));
    }
  };
  switch (family) {
    case Family::translator_gen:
      expect(1, 1);
      break;
    case Family::patch_disc:
      expect(1, 8);
      break;
    case Family::dsn:
      expect(1, 4);
      break;
    case Family::srn:
      expect(4, 1);
      break;
  }
}

int NetworkSpec::input_multiple() const {
  switch (family) {
    case Family::translator_gen:
    case Family::dsn:
      return 4;
    case Family::patch_disc:
      return 8;
    case Family::srn:
      return 1;
  }
  return 1;
}

Shape NetworkSpec::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[1] != 3) throw DimensionError("expected N x 3 x H x W input, got " + shape_string(in));
  const int m = input_multiple();
  if (in[2] < m || in[3] < m || in[2] % m != 0 || in[3] % m != 0) {
    throw DimensionError(to_string(family) + " needs H and W to be positive multiples of " + std::to_string(m) +
                         ", got " + shape_string(in));
  }
  switch (family) {
    case Family::translator_gen:
      return in;
    case Family::patch_disc:
      return {in[0], 1, in[2] / 8, in[3] / 8};
    case Family::dsn:
      return {in[0], 3, in[2] / 4, in[3] / 4};
    case Family::srn:
      return {in[0], 3, in[2] * 4, in[3] * 4};
  }
  return in;
}

std::string NetworkSpec::describe() const {
  std::ostringstream os;
  os << to_string(family) << "/c" << base_channels << "/r" << residual_blocks << "/x" << scale_factor.num << ":"
     << scale_factor.den;
  return os.str();
}

NetworkSpec NetworkSpec::parse(const std::string& text) {
  NetworkSpec s;
  std::string fam;
  char sep = 0;
  std::istringstream is(text);
  if (!std::getline(is, fam, '/')) throw VersionError("malformed network spec: " + text);
  s.family = family_from_string(fam);
  if (!(is >> sep) || sep != 'c' || !(is >> s.base_channels) || !(is >> sep) || sep != '/' || !(is >> sep) ||
      sep != 'r' || !(is >> s.residual_blocks) || !(is >> sep) || sep != '/' || !(is >> sep) || sep != 'x' ||
      !(is >> s.scale_factor.num) || !(is >> sep) || sep != ':' || !(is >> s.scale_factor.den)) {
    throw VersionError("malformed network spec: " + text);
  }
  s.validate();
  return s;
}

template <typename T>
int ParamStore<T>::add(std::string name, Tensor<T> value) {
  if (by_name_.count(name)) throw StateError("duplicate parameter name: " + name);
  by_name_[name] = entries_.size();
  Tensor<T> grad(value.shape());
  entries_.push_back({std::move(name), std::move(value), std::move(grad)});
  ++version_;
  return static_cast<int>(entries_.size() - 1);
}

template <typename T>
std::optional<std::size_t> ParamStore<T>::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.grad.fill(T{0});
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

template <typename T>
Tensor<T> Trace<T>::pop() {
  if (saved_.empty()) throw StateError("trace exhausted: backward does not match the recorded forward");
  Tensor<T> t = std::move(saved_.back());
  saved_.pop_back();
  return t;
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::shared_ptr<const Layer<T>> root) : spec_(spec), root_(std::move(root)) {}

template <typename T>
void Network<T>::check_input(const Shape& s) const {
  (void)spec_.output_shape(s);
}

template <typename T>
Tensor<T> Network<T>::forward(const ParamStore<T>& params, const Tensor<T>& x, Trace<T>* trace) const {
  check_input(x.shape());
  if (trace) {
    trace->saved_.clear();
    trace->version_ = params.version();
    trace->owner_ = &params;
    trace->armed_ = true;
  }
  return root_->forward(params, x, trace);
}

template <typename T>
Tensor<T> Network<T>::backward(ParamStore<T>& params, Trace<T>& trace, const Tensor<T>& grad_out) const {
  if (!trace.armed_) throw StateError("backward without a retained forward (trace already consumed or never recorded)");
  if (trace.owner_ != &params || trace.version_ != params.version()) {
    throw StateError("stale intermediates: parameters changed since the forward pass");
  }
  trace.armed_ = false;
  Tensor<T> g = root_->backward(params, trace, grad_out);
  if (!trace.saved_.empty()) throw StateError("trace not fully consumed by backward");
  return g;
}

namespace {

template <typename T>
class Builder {
 public:
  Builder(ParamStore<T>* params, Rng* rng, const InitOptions& init) : params_(params), rng_(rng), init_(init) {}

  std::unique_ptr<Layer<T>> conv(const std::string& name, int in, int out, int k, int stride, bool bias) {
    int w = -1;
    int b = -1;
    if (params_) {
      const int fan_in = in * k * k;
      const double std = init_.fan_in_scaled ? init_.weight_std / std::sqrt(static_cast<double>(fan_in)) : init_.weight_std;
      Tensor<T> wt({out, in, k, k});
      for (auto& v : wt.values()) v = static_cast<T>(rng_->normal() * std);
      w = params_->add(name + ".weight", std::move(wt));
      if (bias) {
        Tensor<T> bt({out});
        if (init_.bias_std > 0.0) {
          for (auto& v : bt.values()) v = static_cast<T>(rng_->normal() * init_.bias_std);
        }
        b = params_->add(name + ".bias", std::move(bt));
      }
    } else {
      w = next_index_++;
      if (bias) b = next_index_++;
    }
    const int pad = (k == 4) ? 1 : k / 2;
    return std::make_unique<layers::Conv2d<T>>(w, b, in, out, k, stride, pad);
  }

 private:
  ParamStore<T>* params_;
  Rng* rng_;
  InitOptions init_;
  int next_index_ = 0;
};

template <typename T>
std::unique_ptr<Layer<T>> relu() {
  return std::make_unique<layers::LeakyRelu<T>>(T{0});
}
template <typename T>
std::unique_ptr<Layer<T>> leaky() {
  return std::make_unique<layers::LeakyRelu<T>>(static_cast<T>(0.2));
}
template <typename T>
std::unique_ptr<Layer<T>> inorm() {
  return std::make_unique<layers::InstanceNorm<T>>();
}

template <typename T>
std::shared_ptr<const Layer<T>> assemble(const NetworkSpec& spec, Builder<T>& b) {
  using layers::Sequential;
  const int c = spec.base_channels;
  auto seq = std::make_unique<Sequential<T>>();
  switch (spec.family) {
    case Family::translator_gen: {
      seq->add(b.conv("enc0", 3, c, 7, 1, false));
      seq->add(inorm<T>());
      seq->add(relu<T>());
      seq->add(b.conv("enc1", c, 2 * c, 3, 2, false));
      seq->add(inorm<T>());
      seq->add(relu<T>());
      seq->add(b.conv("enc2", 2 * c, 4 * c, 3, 2, false));
      seq->add(inorm<T>());
      seq->add(relu<T>());
      for (int r = 0; r < spec.residual_blocks; ++r) {
        const std::string name = "res" + std::to_string(r);
        auto body = std::make_unique<Sequential<T>>();
        body->add(b.conv(name + ".conv0", 4 * c, 4 * c, 3, 1, false));
        body->add(inorm<T>());
        body->add(relu<T>());
        body->add(b.conv(name + ".conv1", 4 * c, 4 * c, 3, 1, false));
        body->add(inorm<T>());
        seq->add(std::make_unique<layers::Residual<T>>(std::move(body)));
      }
      seq->add(std::make_unique<layers::Upsample2x<T>>());
      seq->add(b.conv("dec0", 4 * c, 2 * c, 3, 1, false));
      seq->add(inorm<T>());
      seq->add(relu<T>());
      seq->add(std::make_unique<layers::Upsample2x<T>>());
      seq->add(b.conv("dec1", 2 * c, c, 3, 1, false));
      seq->add(inorm<T>());
      seq->add(relu<T>());
      seq->add(b.conv("head", c, 3, 7, 1, true));
      seq->add(std::make_unique<layers::Tanh<T>>());
      return seq;
    }
    case Family::patch_disc: {
      seq->add(b.conv("conv0", 3, c, 4, 2, true));
      seq->add(leaky<T>());
      seq->add(b.conv("conv1", c, 2 * c, 4, 2, true));
      seq->add(leaky<T>());
      seq->add(b.conv("conv2", 2 * c, 4 * c, 4, 2, true));
      seq->add(leaky<T>());
      seq->add(b.conv("head", 4 * c, 1, 3, 1, true));
      return seq;
    }
    case Family::dsn: {
      seq->add(b.conv("conv0", 3, c, 3, 1, true));
      seq->add(relu<T>());
      seq->add(b.conv("down0", c, c, 3, 2, true));
      seq->add(relu<T>());
      seq->add(b.conv("down1", c, c, 3, 2, true));
      seq->add(relu<T>());
      for (int r = 0; r < spec.residual_blocks; ++r) {
        const std::string name = "res" + std::to_string(r);
        auto body = std::make_unique<Sequential<T>>();
        body->add(b.conv(name + ".conv0", c, c, 3, 1, true));
        body->add(relu<T>());
        body->add(b.conv(name + ".conv1", c, c, 3, 1, true));
        seq->add(std::make_unique<layers::Residual<T>>(std::move(body)));
      }
      seq->add(b.conv("head", c, 3, 3, 1, true));
      return std::make_shared<layers::BicubicSkip<T>>(std::move(seq), Scale{1, 4});
    }
    case Family::srn: {
      seq->add(b.conv("conv0", 3, c, 3, 1, true));
      for (int r = 0; r < spec.residual_blocks; ++r) {
        const std::string name = "res" + std::to_string(r);
        auto body = std::make_unique<Sequential<T>>();
        body->add(b.conv(name + ".conv0", c, c, 3, 1, true));
        body->add(relu<T>());
        body->add(b.conv(name + ".conv1", c, c, 3, 1, true));
        seq->add(std::make_unique<layers::Residual<T>>(std::move(body)));
      }
      seq->add(std::make_unique<layers::Upsample2x<T>>());
      seq->add(b.conv("up0", c, c, 3, 1, true));
      seq->add(relu<T>());
      seq->add(std::make_unique<layers::Upsample2x<T>>());
      seq->add(b.conv("up1", c, c, 3, 1, true));
      seq->add(relu<T>());
      seq->add(b.conv("head", c, 3, 3, 1, true));
      return std::make_shared<layers::BicubicSkip<T>>(std::move(seq), Scale{4, 1});
    }
  }
  throw Error("unhandled network family");
}

}  // namespace

template <typename T>
BuiltNetwork<T> build_network(const NetworkSpec& spec, std::uint64_t seed, const InitOptions& init) {
  spec.validate();
  ParamStore<T> params(seed);
  Rng rng(seed);
  Builder<T> b(&params, &rng, init);
  auto root = assemble(spec, b);
  return {Network<T>(spec, std::move(root)), std::move(params)};
}

template <typename T>
Network<T> make_network(const NetworkSpec& spec) {
  spec.validate();
  Builder<T> b(nullptr, nullptr, {});
  return Network<T>(spec, assemble(spec, b));
}

template <typename T>
OptimizerState<T> OptimizerState<T>::init(const ParamStore<T>& params, const AdamSettings& settings) {
  OptimizerState s;
  s.settings = settings;
  for (const auto& e : params.entries()) {
    s.m.emplace_back(e.value.shape());
    s.v.emplace_back(e.value.shape());
  }
  return s;
}

template <typename T>
void opt_step(ParamStore<T>& params, OptimizerState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("optimizer state does not match parameter store");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    if (state.m[i].shape() != e.value.shape()) throw DimensionError("optimizer moment shape mismatch for " + e.name);
    for (T g : e.grad.values()) {
      if (!std::isfinite(static_cast<double>(g))) throw DivergenceError("non-finite gradient in parameter " + e.name);
    }
  }
  ++state.step;
  const auto& s = state.settings;
  const T b1 = static_cast<T>(s.beta1);
  const T b2 = static_cast<T>(s.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(s.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(s.beta2, static_cast<double>(state.step)));
  const T lr = static_cast<T>(s.lr);
  const T eps = static_cast<T>(s.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor<T>& g = params.entry(i).grad;
    Tensor<T>& w = params.mutable_value(i);
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      const T mhat = m[j] / c1;
      const T vhat = v[j] / c2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

GradCheckResult grad_check(ParamStore<double>& params, const LossFn& loss, const GradientFn& gradient, double eps) {
  params.zero_grad();
  gradient(params);
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor<double> analytic = params.entry(i).grad;
    double diff2 = 0.0;
    double analytic2 = 0.0;
    double fd2 = 0.0;
    double worst_abs = -1.0;
    std::size_t worst_j = 0;
    for (std::size_t j = 0; j < analytic.size(); ++j) {
      const double orig = params.entry(i).value[j];
      params.mutable_value(i)[j] = orig + eps;
      const double up = loss(params);
      params.mutable_value(i)[j] = orig - eps;
      const double down = loss(params);
      params.mutable_value(i)[j] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double a = analytic[j];
      const double d = std::abs(a - fd);
      diff2 += d * d;
      analytic2 += a * a;
      fd2 += fd * fd;
      if (d > worst_abs) {
        worst_abs = d;
        worst_j = j;
      }
      result.max_abs_error = std::max(result.max_abs_error, d);
      ++result.checked;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(analytic2), std::sqrt(fd2), 1e-12});
    if (i == 0 || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_parameter = params.entry(i).name;
      result.worst_element = worst_j;
    }
  }
  return result;
}

namespace {
thread_local ActivationPatternFreeze* g_freeze = nullptr;
}  // namespace

ActivationPatternFreeze::ActivationPatternFreeze() : previous_(g_freeze) { g_freeze = this; }

ActivationPatternFreeze::~ActivationPatternFreeze() { g_freeze = previous_; }

void ActivationPatternFreeze::replay() {
  recording_ = false;
  cursor_ = 0;
}

std::vector<bool>& ActivationPatternFreeze::next(std::size_t size) {
  if (recording_) {
    patterns_.emplace_back(size, false);
    return patterns_.back();
  }
  if (cursor_ >= patterns_.size() || patterns_[cursor_].size() != size) {
    throw StateError("activation pattern replay does not match the recorded forward pass");
  }
  return patterns_[cursor_++];
}

ActivationPatternFreeze* ActivationPatternFreeze::current() { return g_freeze; }

NetworkSpec minimal_spec(Family f) {
  switch (f) {
    case Family::translator_gen:
      return NetworkSpec::translator_gen(2, 1);
    case Family::patch_disc:
      return NetworkSpec::patch_disc(2);
    case Family::dsn:
      return NetworkSpec::dsn(2, 1);
    case Family::srn:
      return NetworkSpec::srn(2, 1);
  }
  throw Error("unhandled family");
}

Shape grad_check_input_shape(const NetworkSpec& spec) {
  switch (spec.family) {
    case Family::translator_gen:
    case Family::patch_disc:
    case Family::dsn:
      return {1, 3, 16, 16};
    case Family::srn:
      return {1, 3, 8, 8};
  }
  return {1, 3, 16, 16};
}

GradCheckResult grad_check(const NetworkSpec& spec, std::uint64_t seed, double eps) {
  // Unit-scale weights and biases keep every activation O(1), so the probe
  // exercises all layers instead of collapsing toward zero.
  InitOptions init;
  init.weight_std = 1.0;
  init.fan_in_scaled = true;
  init.bias_std = 0.1;
  auto built = build_network<double>(spec, seed, init);
  Rng rng(derive_seed(seed, 0x50524F4245ULL));
  Tensor<double> x(grad_check_input_shape(spec));
  for (auto& v : x.values()) v = rng.uniform(-1.0, 1.0);
  Tensor<double> proj(spec.output_shape(x.shape()));
  for (auto& v : proj.values()) v = rng.uniform(-1.0, 1.0);

  const Network<double>& net = built.net;
  ActivationPatternFreeze freeze;
  (void)net.forward(built.params, x);
  freeze.replay();
  const LossFn loss = [&](const ParamStore<double>& p) {
    freeze.rewind();
    const Tensor<double> y = net.forward(p, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += proj[i] * y[i];
    return acc;
  };
  const GradientFn gradient = [&](ParamStore<double>& p) {
    freeze.rewind();
    Trace<double> tr;
    (void)net.forward(p, x, &tr);
    (void)net.backward(p, tr, proj);
  };
  return grad_check(built.params, loss, gradient, eps);
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Trace<float>;
template class Trace<double>;
template class Network<float>;
template class Network<double>;
template struct OptimizerState<float>;
template struct OptimizerState<double>;
template BuiltNetwork<float> build_network(const NetworkSpec&, std::uint64_t, const InitOptions&);
template BuiltNetwork<double> build_network(const NetworkSpec&, std::uint64_t, const InitOptions&);
template Network<float> make_network(const NetworkSpec&);
template Network<double> make_network(const NetworkSpec&);
template void opt_step(ParamStore<float>&, OptimizerState<float>&);
template void opt_step(ParamStore<double>&, OptimizerState<double>&);

}  // namespace rainsr
