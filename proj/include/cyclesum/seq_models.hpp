#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cyclesum/ops.hpp"
#include "cyclesum/param_store.hpp"
#include "cyclesum/rng.hpp"

namespace cyclesum::nn {

using ad::ParamStore;
using ad::Tensor;

// Stable per-parameter seed derived from a base seed and the parameter name.
std::uint64_t derive_seed(std::uint64_t base, const std::string& name);

/// Handles into a ParamStore for one LSTM layer.
/// w_in: (input_size x 4h), w_rec: (h x 4h), bias: (4h).
struct LstmLayerParams {
  Tensor w_in;
  Tensor w_rec;
  Tensor bias;
  std::size_t input_size = 0;
  std::size_t hidden = 0;
};

// Registers `<prefix>.w_in`, `<prefix>.w_rec`, `<prefix>.bias` with Xavier
// values; the forget-gate block of the bias starts at 1.
LstmLayerParams add_lstm_layer(ParamStore& store, const std::string& prefix,
                               std::size_t input_size, std::size_t hidden, std::uint64_t seed);
LstmLayerParams bind_lstm_layer(ParamStore& store, const std::string& prefix);

struct LstmOutput {
  Tensor hidden;  // (k x h)
  Tensor h_final;  // (1 x h)
  Tensor c_final;  // (1 x h)
};

LstmOutput lstm_forward(const LstmLayerParams& layer, const Tensor& seq, const Tensor& h0,
                        const Tensor& c0);
LstmOutput lstm_forward(const LstmLayerParams& layer, const Tensor& seq);

// Unidirectional stack with zero initial states; returns the top layer output.
Tensor lstm_stack_forward(const std::vector<LstmLayerParams>& layers, const Tensor& seq);

struct BiLstmLayer {
  LstmLayerParams fwd;
  LstmLayerParams bwd;
};

// Each layer runs forward over the sequence and backward over its reversal;
// the backward outputs are flipped back and concatenated per step, giving
// (k x 2h) which feeds the next layer.
Tensor bilstm_forward(const std::vector<BiLstmLayer>& stack, const Tensor& seq);

inline constexpr double kLogvarMin = -20.0;
inline constexpr double kLogvarMax = 20.0;

struct VaeDims {
  std::size_t feature_dim = 0;
  std::size_t hidden = 64;
  std::size_t z_dim = 16;
  std::size_t layers = 2;
};

/// VAE-LSTM generator. The encoder maps a sequence to (mu, logvar) from the
/// final top-layer hidden state. The decoder is fed [start_token, z] at every
/// step and its emissions are projected to feature space in reverse time order.
struct VaeLstmParams {
  VaeDims dims;
  std::vector<LstmLayerParams> encoder;
  Tensor mu_w, mu_b, logvar_w, logvar_b;
  std::vector<LstmLayerParams> decoder;
  Tensor start_token;
  Tensor out_w, out_b;
};

VaeLstmParams add_vae(ParamStore& store, const std::string& prefix, const VaeDims& dims,
                      std::uint64_t seed);
VaeLstmParams bind_vae(ParamStore& store, const std::string& prefix, const VaeDims& dims);

struct VaeEncoding {
  Tensor mu;      // (z)
  Tensor logvar;  // (z), clamped to [kLogvarMin, kLogvarMax]
};

VaeEncoding vae_encode(const VaeLstmParams& p, const Tensor& seq);
// z = mu + exp(logvar / 2) * eps with eps ~ N(0, I) drawn from `rng`.
Tensor vae_reparam_sample(const Tensor& mu, const Tensor& logvar, Rng& rng);
// Same with explicit noise.
Tensor vae_reparam_sample(const Tensor& mu, const Tensor& logvar, const std::vector<double>& eps);
// Returns (k x d) in caller time order.
Tensor vae_decode(const VaeLstmParams& p, const Tensor& z, std::size_t k);

struct GeneratorOutput {
  Tensor sequence;  // (k x d)
  Tensor mu;
  Tensor logvar;
};

// encode -> one reparameterized sample -> decode to the input length.
GeneratorOutput generate(const VaeLstmParams& p, const Tensor& seq, Rng& rng);

struct CriticDims {
  std::size_t feature_dim = 0;
  std::size_t hidden = 64;
  std::size_t layers = 1;
};

/// LSTM critic with an unsquashed linear head.
struct CriticParams {
  CriticDims dims;
  std::vector<LstmLayerParams> layers;
  Tensor head_w;  // (h x 1)
  Tensor head_b;  // (1)
};

CriticParams add_critic(ParamStore& store, const std::string& prefix, const CriticDims& dims,
                        std::uint64_t seed);
CriticParams bind_critic(ParamStore& store, const std::string& prefix, const CriticDims& dims);

struct CriticOutput {
  Tensor score;  // scalar
  Tensor phi;    // (h): time-mean of the top layer hidden states
};

CriticOutput critic_forward(const CriticParams& p, const Tensor& seq);

}  // namespace cyclesum::nn
