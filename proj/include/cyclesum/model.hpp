#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cyclesum/eval_metrics.hpp"
#include "cyclesum/seq_models.hpp"

namespace cyclesum {

using ad::ParamStore;
using ad::Tensor;

struct ModelDims {
  std::size_t feature_dim = 0;
  std::size_t hidden = 64;
  std::size_t z_dim = 16;
  std::size_t selector_layers = 3;
  std::size_t vae_layers = 2;
  std::size_t critic_layers = 1;
};

/// Selector (Bi-LSTM + per-frame sigmoid head), the two VAE generators and
/// the two critics. Each network owns its ParamStore; the *Params members are
/// handles into those stores. Copying is explicit through clone().
class CycleSumNets {
 public:
  static CycleSumNets create(const ModelDims& dims, std::uint64_t seed);

  CycleSumNets(CycleSumNets&&) = default;
  CycleSumNets& operator=(CycleSumNets&&) = default;
  CycleSumNets(const CycleSumNets&) = delete;
  CycleSumNets& operator=(const CycleSumNets&) = delete;

  CycleSumNets clone() const;
  void assign_values(const CycleSumNets& other);

  const ModelDims& dims() const { return dims_; }

  ParamStore selector_store;
  ParamStore gen_f_store;
  ParamStore gen_b_store;
  ParamStore critic_f_store;
  ParamStore critic_b_store;

  std::vector<nn::BiLstmLayer> selector;
  Tensor selector_head_w;  // (2h x 1)
  Tensor selector_head_b;  // (1)
  nn::VaeLstmParams gen_f;
  nn::VaeLstmParams gen_b;
  nn::CriticParams critic_f;
  nn::CriticParams critic_b;

  // selector, gen_f, gen_b, critic_f, critic_b
  std::array<ParamStore*, 5> stores();
  std::array<const ParamStore*, 5> stores() const;
  static constexpr std::array<const char*, 5> kStoreNames = {"selector", "gen_f", "gen_b",
                                                             "critic_f", "critic_b"};

  // One manifest/bin pair per network under `dir`.
  void save(const std::filesystem::path& dir, ad::Precision dtype = ad::Precision::f64) const;
  void load(const std::filesystem::path& dir);

 private:
  CycleSumNets() = default;
  void bind();
  ModelDims dims_;
};

// x_t = sigmoid(head(BiLSTM(o)_t)); returns a rank-1 tensor of length k.
Tensor select(const CycleSumNets& nets, const Tensor& o);

// s_t = x_t * o_t.
Tensor weight_frames(const Tensor& o, const Tensor& x);

struct CriticView {
  Tensor score;
  Tensor phi;
};

/// Every intermediate of one forward/backward cycle. Members that the
/// requested options skip stay undefined.
struct CyclePass {
  Tensor o, x, s;
  Tensor o_hat;    // G_f(s)
  Tensor s_hat;    // G_b(o)
  Tensor s_cycle;  // G_b(o_hat)
  Tensor o_cycle;  // G_f(s_hat)
  CriticView df_real, df_fake;  // D_f(o), D_f(o_hat)
  CriticView db_real, db_fake;  // D_b(s), D_b(s_hat)
  Tensor mu_f, logvar_f;        // encoder of G_f on s
  Tensor mu_b, logvar_b;        // encoder of G_b on o
  std::size_t k = 0;
};

struct CycleOptions {
  bool backward_generator = true;  // off: no s_hat, no D_b, no cycles
  bool forward_cycle = true;       // s_cycle = G_b(o_hat)
  bool backward_cycle = true;      // o_cycle = G_f(s_hat)
};

// Draws one latent sample per generator call, in the order
// G_f(s), G_b(o), G_b(o_hat), G_f(s_hat).
CyclePass full_cycle(const CycleSumNets& nets, const Tensor& o, Rng& rng,
                     const CycleOptions& opts = {});

// Test-time binarization: shot means of x, knapsack at floor(fraction * k).
eval::KeyshotSelection discretize_scores(const std::vector<double>& x,
                                         const eval::ShotSegmentation& segments, double fraction);

// Importance scores as plain values (no gradient tracking needed by callers).
std::vector<double> score_frames(const CycleSumNets& nets, const Tensor& o);

}  // namespace cyclesum
