#include "cyclesum/trainer.hpp"

#include <cmath>
#include <numeric>

namespace cyclesum {

namespace {

constexpr std::size_t kSelector = 0, kGenF = 1, kGenB = 2, kCriticF = 3, kCriticB = 4;

Tensor detach(const Tensor& t) {
  return Tensor::constant(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
}

void check_finite(const LossBreakdown& b, std::size_t step) {
  const double fields[] = {b.sparsity, b.prior_f, b.prior_b, b.recon_f, b.recon_b,
                           b.gan_f,    b.gan_b,   b.cycle_f, b.cycle_b, b.total};
  for (std::size_t i = 0; i < std::size(fields); ++i) {
    if (!std::isfinite(fields[i])) throw NumericalAbort(kLossTermNames[i], step);
  }
}

void add_into(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.sparsity += w * b.sparsity;
  acc.prior_f += w * b.prior_f;
  acc.prior_b += w * b.prior_b;
  acc.recon_f += w * b.recon_f;
  acc.recon_b += w * b.recon_b;
  acc.gan_f += w * b.gan_f;
  acc.gan_b += w * b.gan_b;
  acc.cycle_f += w * b.cycle_f;
  acc.cycle_b += w * b.cycle_b;
  acc.total += w * b.total;
}

}  // namespace

NumericalAbort::NumericalAbort(std::string term, std::size_t step)
    : std::runtime_error("non-finite " + term + " loss at step " + std::to_string(step)),
      term_(std::move(term)),
      step_(step) {}

void TrainConfig::validate() const {
  if (n_generator_iters < 1) throw std::invalid_argument("n_generator_iters must be >= 1");
  if (!(clip_c > 0.0 && clip_c <= 0.5)) throw std::invalid_argument("clip_c must lie in (0, 0.5]");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
  if (!(pretrain_lr >= 0.0)) throw std::invalid_argument("pretrain_lr must be >= 0");
  if (!(rms_decay > 0.0 && rms_decay < 1.0)) throw std::invalid_argument("rms_decay must lie in (0, 1)");
  if (!(convergence_tolerance >= 0.0)) throw std::invalid_argument("convergence tolerance must be >= 0");
  weights.validate();
}

void apply_variant(LossWeights& w, const std::string& variant) {
  w.enable_gan_f = w.enable_gan_b = w.enable_cycle_f = w.enable_cycle_b = w.enable_backward_gen = true;
  if (variant == "cycle-sum") return;
  if (variant == "c") {
    w.enable_gan_f = w.enable_gan_b = false;
  } else if (variant == "2g") {
    w.enable_cycle_f = w.enable_cycle_b = false;
  } else if (variant == "gf") {
    w.enable_cycle_b = false;
  } else if (variant == "gb") {
    w.enable_cycle_f = false;
  } else if (variant == "1g") {
    w.enable_gan_b = w.enable_cycle_f = w.enable_cycle_b = w.enable_backward_gen = false;
  } else {
    throw std::invalid_argument("unknown variant '" + variant + "' (expected cycle-sum, c, 1g, 2g, gf, gb)");
  }
}

std::string variant_label(const std::string& variant) {
  if (variant == "cycle-sum") return "Cycle-SUM";
  if (variant == "c") return "Cycle-SUM-C";
  if (variant == "1g") return "Cycle-SUM-1G";
  if (variant == "2g") return "Cycle-SUM-2G";
  if (variant == "gf") return "Cycle-SUM-Gf";
  if (variant == "gb") return "Cycle-SUM-Gb";
  throw std::invalid_argument("unknown variant '" + variant + "'");
}

PretrainLog pretrain_vaes(CycleSumNets& nets, const std::vector<Tensor>& videos, std::size_t epochs,
                          double lr, std::uint64_t seed, double clip_c) {
  PretrainLog log;
  if (epochs == 0) return log;
  if (videos.empty()) throw std::invalid_argument("pretrain_vaes: empty dataset");
  Rng rng(seed);
  ad::RmsPropOptions opts;
  opts.lr = lr;
  struct Gen {
    ParamStore* store;
    const nn::VaeLstmParams* params;
    ad::RmsPropState rms;
  };
  Gen gens[] = {{&nets.gen_f_store, &nets.gen_f, {}}, {&nets.gen_b_store, &nets.gen_b, {}}};
  std::vector<std::size_t> order(videos.size());
  std::size_t step = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    double acc = 0.0;
    for (std::size_t idx : order) {
      const Tensor& o = videos[idx];
      for (auto& g : gens) {
        auto enc = nn::vae_encode(*g.params, o);
        Tensor z = nn::vae_reparam_sample(enc.mu, enc.logvar, rng);
        Tensor rec = nn::vae_decode(*g.params, z, o.rows());
        Tensor loss = ad::add(prior_kl(enc.mu, enc.logvar),
                              ad::scale(ad::l2_norm(ad::sub(o, rec)), 1.0 / static_cast<double>(o.rows())));
        if (!std::isfinite(loss.item())) throw NumericalAbort("pretrain", step);
        g.store->zero_grad();
        ad::backward(loss);
        ad::rmsprop_step(*g.store, g.rms, opts, ad::Direction::descend);
        if (clip_c > 0.0) ad::clip_params(*g.store, clip_c);
        acc += loss.item();
      }
      ++step;
    }
    log.epoch_loss.push_back(acc / static_cast<double>(2 * videos.size()));
  }
  return log;
}

double critic_phase(CycleSumNets& nets, TrainState& state, const Tensor& o, const Tensor& o_hat,
                    const Tensor& s, const Tensor& s_hat, const TrainConfig& config) {
  auto stores = nets.stores();
  const ad::RmsPropOptions opts{config.lr, config.rms_decay};
  struct Side {
    std::size_t store;
    const nn::CriticParams* critic;
    Tensor real, fake;
  };
  std::vector<Side> sides = {{kCriticF, &nets.critic_f, o, o_hat}};
  if (s.defined() && s_hat.defined()) sides.push_back({kCriticB, &nets.critic_b, s, s_hat});
  double forward_objective = 0.0;
  for (const auto& side : sides) {
    ParamStore& store = *stores[side.store];
    store.set_requires_grad(true);
    const Tensor real = detach(side.real), fake = detach(side.fake);
    Tensor objective = wgan_losses(nn::critic_forward(*side.critic, real).score,
                                   nn::critic_forward(*side.critic, fake).score)
                           .critic_objective;
    if (!std::isfinite(objective.item())) {
      throw NumericalAbort(side.store == kCriticF ? "critic_f" : "critic_b", state.step);
    }
    if (side.store == kCriticF) forward_objective = objective.item();
    store.zero_grad();
    ad::backward(objective);
    ad::rmsprop_step(store, state.rms[side.store], opts, ad::Direction::ascend);
    ad::clip_params(store, config.clip_c);
  }
  return forward_objective;
}

LossBreakdown train_step(CycleSumNets& nets, TrainState& state, const Tensor& video, const TrainConfig& config) {
  if (video.rank() != 2 || video.rows() < 2) throw std::invalid_argument("train_step: video needs >= 2 frames");
  const CycleOptions opts = config.weights.cycle_options();
  auto stores = nets.stores();
  const ad::RmsPropOptions rms{config.lr, config.rms_decay};
  std::vector<std::size_t> generator_side = {kSelector, kGenF};
  if (opts.backward_generator) generator_side.push_back(kGenB);

  // Critic weight gradients are not needed while the generators learn.
  stores[kCriticF]->set_requires_grad(false);
  stores[kCriticB]->set_requires_grad(false);
  for (auto i : generator_side) stores[i]->set_requires_grad(config.train_generators);

  CyclePass last;
  LossBreakdown out;
  for (std::size_t it = 0; it < config.n_generator_iters; ++it) {
    CyclePass pass = full_cycle(nets, video, state.rng, opts);
    LossTerms terms = total_loss(pass, config.weights);
    check_finite(terms.values, state.step);
    if (config.train_generators) {
      for (auto i : generator_side) stores[i]->zero_grad();
      ad::backward(terms.total);
      for (auto i : generator_side) ad::rmsprop_step(*stores[i], state.rms[i], rms, ad::Direction::descend);
      if (config.clip_generators) {
        ad::clip_params(*stores[kSelector], config.clip_c);
        ad::clip_params(*stores[kGenF], config.clip_c);
        ad::clip_params(*stores[kGenB], config.clip_c);
      }
    }
    out = terms.values;
    last = std::move(pass);
  }
  for (auto* s : stores) s->set_requires_grad(true);

  if (config.train_critics) {
    critic_phase(nets, state, last.o, last.o_hat, opts.backward_generator ? last.s : Tensor(),
                 opts.backward_generator ? last.s_hat : Tensor(), config);
    // D_b never trains without G_b, but the clip box covers all five networks.
    if (!opts.backward_generator) ad::clip_params(*stores[kCriticB], config.clip_c);
  }
  ++state.step;
  return out;
}

TrainResult train(CycleSumNets& nets, const std::vector<Tensor>& videos, const TrainConfig& config,
                  CycleSumNets* best, const TrainHooks& hooks) {
  config.validate();
  TrainResult result;
  if (config.max_epochs == 0) return result;
  if (videos.empty()) throw std::invalid_argument("train: empty dataset");
  ad::PrecisionScope precision(config.precision);

  pretrain_vaes(nets, videos, config.pretrain_epochs, config.pretrain_lr, nn::derive_seed(config.seed, "pretrain"),
                config.clip_generators ? config.clip_c : 0.0);

  TrainState state(nn::derive_seed(config.seed, "train"));
  std::vector<std::size_t> order(videos.size());
  for (std::size_t e = 0; e < config.max_epochs; ++e) {
    state.epoch = e + 1;
    std::iota(order.begin(), order.end(), 0);
    state.rng.shuffle(order);
    EpochRecord record;
    record.epoch = state.epoch;
    for (std::size_t idx : order) {
      const LossBreakdown b = train_step(nets, state, videos[idx], config);
      result.step_log.push_back(b.csv_line(state.step));
      add_into(record.mean, b, 1.0 / static_cast<double>(videos.size()));
    }
    result.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);

    if (!state.has_best || record.mean.total < state.best_total) {
      state.has_best = true;
      state.best_total = record.mean.total;
      result.best_epoch = state.epoch;
      if (best) best->assign_values(nets);
    }

    const std::size_t w = config.convergence_window;
    if (w == 0) continue;
    state.history.push_back(record.mean.total);
    if (state.history.size() > 2 * w) state.history.pop_front();
    if (state.history.size() == 2 * w) {
      const double prev = std::accumulate(state.history.begin(), state.history.begin() + static_cast<long>(w), 0.0) /
                          static_cast<double>(w);
      const double cur =
          std::accumulate(state.history.begin() + static_cast<long>(w), state.history.end(), 0.0) /
          static_cast<double>(w);
      if ((prev - cur) < config.convergence_tolerance * std::fabs(prev)) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace cyclesum
