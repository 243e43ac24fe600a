#include "cyclesum/seq_models.hpp"

#include <stdexcept>

namespace cyclesum::nn {

namespace ad = cyclesum::ad;

std::uint64_t derive_seed(std::uint64_t base, const std::string& name) {
  // FNV-1a over the name, then a splitmix64 finalizer mixed with the base.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::uint64_t z = h ^ (base + 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

Tensor& add_xavier(ParamStore& store, const std::string& name, ad::Shape shape,
                   std::uint64_t seed) {
  auto values = ad::xavier_values(shape, derive_seed(seed, name));
  return store.add(name, std::move(shape), std::move(values));
}

Tensor as_row(const Tensor& t) {
  if (t.rank() == 2 && t.rows() == 1) return t;
  return ad::reshape(t, {1, t.size()});
}

}  // namespace

LstmLayerParams add_lstm_layer(ParamStore& store, const std::string& prefix,
                               std::size_t input_size, std::size_t hidden, std::uint64_t seed) {
  add_xavier(store, prefix + ".w_in", {input_size, 4 * hidden}, seed);
  add_xavier(store, prefix + ".w_rec", {hidden, 4 * hidden}, seed);
  Tensor& bias = add_xavier(store, prefix + ".bias", {4 * hidden}, seed);
  auto b = bias.mutable_values();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  return bind_lstm_layer(store, prefix);
}

LstmLayerParams bind_lstm_layer(ParamStore& store, const std::string& prefix) {
  LstmLayerParams p;
  p.w_in = store.get(prefix + ".w_in");
  p.w_rec = store.get(prefix + ".w_rec");
  p.bias = store.get(prefix + ".bias");
  p.hidden = p.w_rec.rows();
  p.input_size = p.w_in.rows();
  return p;
}

LstmOutput lstm_forward(const LstmLayerParams& layer, const Tensor& seq, const Tensor& h0,
                        const Tensor& c0) {
  if (seq.rank() != 2 || seq.rows() == 0) throw ad::ShapeError("lstm_forward: expected (k x d) sequence");
  if (seq.cols() != layer.input_size) {
    throw ad::ShapeError("lstm_forward: feature dim " + std::to_string(seq.cols()) +
                         " does not match layer input size " + std::to_string(layer.input_size));
  }
  auto out = ad::lstm_sequence(seq, layer.w_in, layer.w_rec, layer.bias, h0, c0);
  const std::size_t k = seq.rows();
  return {out.hidden, ad::slice_rows(out.hidden, k - 1, k), ad::slice_rows(out.cell, k - 1, k)};
}

LstmOutput lstm_forward(const LstmLayerParams& layer, const Tensor& seq) {
  const Tensor zeros = Tensor::constant({layer.hidden}, 0.0);
  return lstm_forward(layer, seq, zeros, zeros);
}

Tensor lstm_stack_forward(const std::vector<LstmLayerParams>& layers, const Tensor& seq) {
  if (layers.empty()) throw std::invalid_argument("lstm stack needs at least one layer");
  Tensor h = seq;
  for (const auto& layer : layers) h = lstm_forward(layer, h).hidden;
  return h;
}

Tensor bilstm_forward(const std::vector<BiLstmLayer>& stack, const Tensor& seq) {
  if (stack.empty()) throw std::invalid_argument("bilstm_forward: stack depth must be >= 1");
  if (seq.rank() != 2 || seq.rows() == 0) throw ad::ShapeError("bilstm_forward: empty sequence");
  Tensor h = seq;
  for (const auto& layer : stack) {
    Tensor fwd = lstm_forward(layer.fwd, h).hidden;
    Tensor bwd = ad::reverse_rows(lstm_forward(layer.bwd, ad::reverse_rows(h)).hidden);
    h = ad::concat({fwd, bwd}, 1);
  }
  return h;
}

VaeLstmParams add_vae(ParamStore& store, const std::string& prefix, const VaeDims& dims,
                      std::uint64_t seed) {
  for (std::size_t l = 0; l < dims.layers; ++l) {
    add_lstm_layer(store, prefix + ".enc." + std::to_string(l), l == 0 ? dims.feature_dim : dims.hidden,
                   dims.hidden, seed);
    add_lstm_layer(store, prefix + ".dec." + std::to_string(l),
                   l == 0 ? dims.feature_dim + dims.z_dim : dims.hidden, dims.hidden, seed);
  }
  add_xavier(store, prefix + ".mu.w", {dims.hidden, dims.z_dim}, seed);
  add_xavier(store, prefix + ".mu.b", {dims.z_dim}, seed);
  add_xavier(store, prefix + ".logvar.w", {dims.hidden, dims.z_dim}, seed);
  add_xavier(store, prefix + ".logvar.b", {dims.z_dim}, seed);
  add_xavier(store, prefix + ".start_token", {dims.feature_dim}, seed);
  add_xavier(store, prefix + ".out.w", {dims.hidden, dims.feature_dim}, seed);
  add_xavier(store, prefix + ".out.b", {dims.feature_dim}, seed);
  return bind_vae(store, prefix, dims);
}

VaeLstmParams bind_vae(ParamStore& store, const std::string& prefix, const VaeDims& dims) {
  VaeLstmParams p;
  p.dims = dims;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    p.encoder.push_back(bind_lstm_layer(store, prefix + ".enc." + std::to_string(l)));
    p.decoder.push_back(bind_lstm_layer(store, prefix + ".dec." + std::to_string(l)));
  }
  p.mu_w = store.get(prefix + ".mu.w");
  p.mu_b = store.get(prefix + ".mu.b");
  p.logvar_w = store.get(prefix + ".logvar.w");
  p.logvar_b = store.get(prefix + ".logvar.b");
  p.start_token = store.get(prefix + ".start_token");
  p.out_w = store.get(prefix + ".out.w");
  p.out_b = store.get(prefix + ".out.b");
  return p;
}

VaeEncoding vae_encode(const VaeLstmParams& p, const Tensor& seq) {
  Tensor h = seq;
  Tensor last;
  for (const auto& layer : p.encoder) {
    auto out = lstm_forward(layer, h);
    h = out.hidden;
    last = out.h_final;
  }
  Tensor mu = ad::add(ad::matmul(last, p.mu_w), p.mu_b);
  Tensor logvar = ad::add(ad::matmul(last, p.logvar_w), p.logvar_b);
  logvar = ad::clamp(logvar, kLogvarMin, kLogvarMax);
  return {ad::reshape(mu, {p.dims.z_dim}), ad::reshape(logvar, {p.dims.z_dim})};
}

Tensor vae_reparam_sample(const Tensor& mu, const Tensor& logvar, const std::vector<double>& eps) {
  if (mu.shape() != logvar.shape() || eps.size() != mu.size()) {
    throw ad::ShapeError("vae_reparam_sample: mu " + ad::shape_string(mu.shape()) + ", logvar " +
                         ad::shape_string(logvar.shape()) + ", eps size " + std::to_string(eps.size()));
  }
  const Tensor noise = Tensor::constant(mu.shape(), eps);
  const Tensor lv = ad::clamp(logvar, kLogvarMin, kLogvarMax);
  return ad::add(mu, ad::mul(ad::exp(ad::scale(lv, 0.5)), noise));
}

Tensor vae_reparam_sample(const Tensor& mu, const Tensor& logvar, Rng& rng) {
  std::vector<double> eps(mu.size());
  for (auto& e : eps) e = rng.normal();
  return vae_reparam_sample(mu, logvar, eps);
}

Tensor vae_decode(const VaeLstmParams& p, const Tensor& z, std::size_t k) {
  if (k == 0) throw std::invalid_argument("vae_decode: target length must be >= 1");
  const Tensor step_input = ad::concat({as_row(p.start_token), as_row(z)}, 1);
  Tensor h = lstm_stack_forward(p.decoder, ad::repeat_rows(step_input, k));
  Tensor emitted = ad::add(ad::matmul(h, p.out_w), p.out_b);
  // Emission t reconstructs frame k-1-t.
  return ad::reverse_rows(emitted);
}

GeneratorOutput generate(const VaeLstmParams& p, const Tensor& seq, Rng& rng) {
  auto enc = vae_encode(p, seq);
  Tensor z = vae_reparam_sample(enc.mu, enc.logvar, rng);
  return {vae_decode(p, z, seq.rows()), enc.mu, enc.logvar};
}

CriticParams add_critic(ParamStore& store, const std::string& prefix, const CriticDims& dims,
                        std::uint64_t seed) {
  for (std::size_t l = 0; l < dims.layers; ++l) {
    add_lstm_layer(store, prefix + ".lstm." + std::to_string(l), l == 0 ? dims.feature_dim : dims.hidden,
                   dims.hidden, seed);
  }
  add_xavier(store, prefix + ".head.w", {dims.hidden, 1}, seed);
  add_xavier(store, prefix + ".head.b", {1}, seed);
  return bind_critic(store, prefix, dims);
}

CriticParams bind_critic(ParamStore& store, const std::string& prefix, const CriticDims& dims) {
  CriticParams p;
  p.dims = dims;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    p.layers.push_back(bind_lstm_layer(store, prefix + ".lstm." + std::to_string(l)));
  }
  p.head_w = store.get(prefix + ".head.w");
  p.head_b = store.get(prefix + ".head.b");
  return p;
}

CriticOutput critic_forward(const CriticParams& p, const Tensor& seq) {
  if (seq.rank() != 2 || seq.rows() == 0) throw ad::ShapeError("critic_forward: empty sequence");
  Tensor top = lstm_stack_forward(p.layers, seq);
  Tensor phi = ad::mean(top, 0);
  Tensor score = ad::add(ad::matmul(as_row(phi), p.head_w), p.head_b);
  return {ad::reshape(score, {1}), phi};
}

}  // namespace cyclesum::nn
