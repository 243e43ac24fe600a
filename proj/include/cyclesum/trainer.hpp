#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cyclesum/losses.hpp"
#include "cyclesum/optim.hpp"

namespace cyclesum {

// Non-finite loss during training; carries the term name and step.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(std::string term, std::size_t step);
  const std::string& term() const { return term_; }
  std::size_t step() const { return step_; }

 private:
  std::string term_;
  std::size_t step_;
};

struct TrainConfig {
  std::size_t n_generator_iters = 3;
  double clip_c = 0.1;
  double lr = 1e-4;
  double rms_decay = 0.9;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 7;
  LossWeights weights;
  std::size_t pretrain_epochs = 0;
  double pretrain_lr = 1e-3;
  // Stop when the windowed mean total loss improves by less than `tolerance`
  // (relative). A window of 0 disables the check.
  std::size_t convergence_window = 10;
  double convergence_tolerance = 0.01;
  ad::Precision precision = ad::Precision::f64;
  bool clip_generators = true;
  // Switches for the two phases of a step; both on in normal training.
  bool train_generators = true;
  bool train_critics = true;

  void validate() const;
};

// Applies an ablation preset: cycle-sum, c, 1g, 2g, gf, gb.
void apply_variant(LossWeights& weights, const std::string& variant);
// Printable name of a preset ("Cycle-SUM-2G", ...).
std::string variant_label(const std::string& variant);

struct TrainState {
  std::size_t epoch = 0;
  std::size_t step = 0;
  // Indexed like CycleSumNets::stores().
  std::array<ad::RmsPropState, 5> rms;
  double best_total = 0.0;
  bool has_best = false;
  Rng rng;
  std::deque<double> history;  // recent per-epoch mean totals

  explicit TrainState(std::uint64_t seed) : rng(seed) {}
};

struct PretrainLog {
  std::vector<double> epoch_loss;  // mean over videos and both generators
};

// Trains G_f and G_b as plain VAEs on o: prior_kl + ||o - decode(encode(o))||_2 / k.
PretrainLog pretrain_vaes(CycleSumNets& nets, const std::vector<Tensor>& videos, std::size_t epochs,
                          double lr, std::uint64_t seed, double clip_c = 0.0);

// One training step on one video: n generator iterations, then one critic phase.
// Returns the breakdown of the last generator iteration.
LossBreakdown train_step(CycleSumNets& nets, TrainState& state, const Tensor& video,
                         const TrainConfig& config);

// Critic phase alone on fixed inputs. `o_hat` is G_f's output; s and s_hat
// may be undefined when the backward generator is off. Returns the forward
// critic objective before the update.
double critic_phase(CycleSumNets& nets, TrainState& state, const Tensor& o, const Tensor& o_hat,
                    const Tensor& s, const Tensor& s_hat, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown mean;  // per-field mean over the epoch's steps
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> step_log;  // csv lines, one per step
  std::size_t best_epoch = 0;
  bool converged = false;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

// Best-loss parameters are copied into `best` when provided.
TrainResult train(CycleSumNets& nets, const std::vector<Tensor>& videos, const TrainConfig& config,
                  CycleSumNets* best = nullptr, const TrainHooks& hooks = {});

}  // namespace cyclesum
