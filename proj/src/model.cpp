#include "cyclesum/model.hpp"

#include <stdexcept>

namespace cyclesum {

namespace {

std::string bi_prefix(std::size_t layer, const char* dir) {
  return "bilstm." + std::to_string(layer) + "." + dir;
}

}  // namespace

CycleSumNets CycleSumNets::create(const ModelDims& dims, std::uint64_t seed) {
  if (dims.feature_dim == 0 || dims.hidden == 0 || dims.z_dim == 0 || dims.selector_layers == 0 ||
      dims.vae_layers == 0 || dims.critic_layers == 0) {
    throw std::invalid_argument("model dimensions must all be positive");
  }
  CycleSumNets nets;
  nets.dims_ = dims;
  const std::size_t h = dims.hidden;
  for (std::size_t l = 0; l < dims.selector_layers; ++l) {
    const std::size_t in = l == 0 ? dims.feature_dim : 2 * h;
    nn::add_lstm_layer(nets.selector_store, bi_prefix(l, "fwd"), in, h, nn::derive_seed(seed, "selector"));
    nn::add_lstm_layer(nets.selector_store, bi_prefix(l, "bwd"), in, h, nn::derive_seed(seed, "selector"));
  }
  nets.selector_store.add("head.w", {2 * h, 1}, ad::xavier_values({2 * h, 1}, nn::derive_seed(seed, "selector.head.w")));
  nets.selector_store.add("head.b", {1}, ad::xavier_values({1}, nn::derive_seed(seed, "selector.head.b")));

  const nn::VaeDims vae{dims.feature_dim, h, dims.z_dim, dims.vae_layers};
  nn::add_vae(nets.gen_f_store, "vae", vae, nn::derive_seed(seed, "gen_f"));
  nn::add_vae(nets.gen_b_store, "vae", vae, nn::derive_seed(seed, "gen_b"));
  const nn::CriticDims critic{dims.feature_dim, h, dims.critic_layers};
  nn::add_critic(nets.critic_f_store, "critic", critic, nn::derive_seed(seed, "critic_f"));
  nn::add_critic(nets.critic_b_store, "critic", critic, nn::derive_seed(seed, "critic_b"));
  nets.bind();
  return nets;
}

void CycleSumNets::bind() {
  selector.clear();
  for (std::size_t l = 0; l < dims_.selector_layers; ++l) {
    selector.push_back({nn::bind_lstm_layer(selector_store, bi_prefix(l, "fwd")),
                        nn::bind_lstm_layer(selector_store, bi_prefix(l, "bwd"))});
  }
  selector_head_w = selector_store.get("head.w");
  selector_head_b = selector_store.get("head.b");
  const nn::VaeDims vae{dims_.feature_dim, dims_.hidden, dims_.z_dim, dims_.vae_layers};
  gen_f = nn::bind_vae(gen_f_store, "vae", vae);
  gen_b = nn::bind_vae(gen_b_store, "vae", vae);
  const nn::CriticDims critic{dims_.feature_dim, dims_.hidden, dims_.critic_layers};
  critic_f = nn::bind_critic(critic_f_store, "critic", critic);
  critic_b = nn::bind_critic(critic_b_store, "critic", critic);
}

CycleSumNets CycleSumNets::clone() const {
  CycleSumNets out;
  out.dims_ = dims_;
  out.selector_store = selector_store.clone();
  out.gen_f_store = gen_f_store.clone();
  out.gen_b_store = gen_b_store.clone();
  out.critic_f_store = critic_f_store.clone();
  out.critic_b_store = critic_b_store.clone();
  out.bind();
  return out;
}

void CycleSumNets::assign_values(const CycleSumNets& other) {
  auto dst = stores();
  auto src = other.stores();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->assign_values(*src[i]);
}

std::array<ParamStore*, 5> CycleSumNets::stores() {
  return {&selector_store, &gen_f_store, &gen_b_store, &critic_f_store, &critic_b_store};
}

std::array<const ParamStore*, 5> CycleSumNets::stores() const {
  return {&selector_store, &gen_f_store, &gen_b_store, &critic_f_store, &critic_b_store};
}

void CycleSumNets::save(const std::filesystem::path& dir, ad::Precision dtype) const {
  std::filesystem::create_directories(dir);
  auto all = stores();
  for (std::size_t i = 0; i < all.size(); ++i) ad::save_checkpoint(*all[i], dir / kStoreNames[i], dtype);
}

void CycleSumNets::load(const std::filesystem::path& dir) {
  auto all = stores();
  for (std::size_t i = 0; i < all.size(); ++i) ad::load_checkpoint(*all[i], dir / kStoreNames[i]);
}

Tensor select(const CycleSumNets& nets, const Tensor& o) {
  if (o.rank() != 2 || o.rows() == 0) throw ad::ShapeError("select: expected a non-empty (k x d) sequence");
  Tensor h = nn::bilstm_forward(nets.selector, o);
  Tensor logits = ad::add(ad::matmul(h, nets.selector_head_w), nets.selector_head_b);
  return ad::reshape(ad::sigmoid(logits), {o.rows()});
}

Tensor weight_frames(const Tensor& o, const Tensor& x) { return ad::scale_rows(o, x); }

CyclePass full_cycle(const CycleSumNets& nets, const Tensor& o, Rng& rng, const CycleOptions& opts) {
  if (o.rank() != 2 || o.rows() == 0) throw ad::ShapeError("full_cycle: expected a non-empty (k x d) sequence");
  if (o.cols() != nets.dims().feature_dim) {
    throw ad::ShapeError("full_cycle: feature dim " + std::to_string(o.cols()) + " vs model " +
                         std::to_string(nets.dims().feature_dim));
  }
  CyclePass pass;
  pass.k = o.rows();
  pass.o = o;
  pass.x = select(nets, o);
  pass.s = weight_frames(o, pass.x);

  auto fwd = nn::generate(nets.gen_f, pass.s, rng);
  pass.o_hat = fwd.sequence;
  pass.mu_f = fwd.mu;
  pass.logvar_f = fwd.logvar;

  if (opts.backward_generator) {
    auto bwd = nn::generate(nets.gen_b, o, rng);
    pass.s_hat = bwd.sequence;
    pass.mu_b = bwd.mu;
    pass.logvar_b = bwd.logvar;
    if (opts.forward_cycle) pass.s_cycle = nn::generate(nets.gen_b, pass.o_hat, rng).sequence;
    if (opts.backward_cycle) pass.o_cycle = nn::generate(nets.gen_f, pass.s_hat, rng).sequence;
  }

  auto df_real = nn::critic_forward(nets.critic_f, o);
  auto df_fake = nn::critic_forward(nets.critic_f, pass.o_hat);
  pass.df_real = {df_real.score, df_real.phi};
  pass.df_fake = {df_fake.score, df_fake.phi};
  if (opts.backward_generator) {
    auto db_real = nn::critic_forward(nets.critic_b, pass.s);
    auto db_fake = nn::critic_forward(nets.critic_b, pass.s_hat);
    pass.db_real = {db_real.score, db_real.phi};
    pass.db_fake = {db_fake.score, db_fake.phi};
  }
  return pass;
}

eval::KeyshotSelection discretize_scores(const std::vector<double>& x,
                                         const eval::ShotSegmentation& segments, double fraction) {
  return eval::select_keyshots(x, segments, fraction);
}

std::vector<double> score_frames(const CycleSumNets& nets, const Tensor& o) {
  Tensor x = select(nets, o);
  return {x.values().begin(), x.values().end()};
}

}  // namespace cyclesum
