#pragma once

#include <cstddef>
#include <string>

#include "cyclesum/model.hpp"

namespace cyclesum {

struct LossWeights {
  double lambda_adv = 1.0;    // lambda_1
  double lambda_gen = 0.5;    // lambda_2
  double lambda_cycle = 10.0; // lambda_3
  double sigma = 0.3;         // sparsity target
  bool enable_gan_f = true;
  bool enable_gan_b = true;
  bool enable_cycle_f = true;
  bool enable_cycle_b = true;
  // Off for the single-generator variant: G_b and D_b are not evaluated at all.
  bool enable_backward_gen = true;

  void validate() const;
  CycleOptions cycle_options() const;
};

struct LossBreakdown {
  double sparsity = 0.0;
  double prior_f = 0.0;
  double prior_b = 0.0;
  double recon_f = 0.0;
  double recon_b = 0.0;
  double gan_f = 0.0;
  double gan_b = 0.0;
  double cycle_f = 0.0;
  double cycle_b = 0.0;
  double total = 0.0;

  // "step,sparsity,prior_f,...,total"
  static std::string csv_header();
  std::string csv_line(std::size_t step) const;
  // Weighted re-summation of the fields.
  double resum(const LossWeights& w) const;
};

// |mean(x) - sigma|.
Tensor sparsity_loss(const Tensor& x, double sigma);
// KL(N(mu, exp(logvar)) || N(0, I)) = 1/2 sum(mu^2 + exp(logvar) - logvar - 1).
Tensor prior_kl(const Tensor& mu, const Tensor& logvar);
// ||phi_real - phi_fake||_2 / k.
Tensor recon_loss(const Tensor& phi_real, const Tensor& phi_fake, std::size_t k);

struct WganLosses {
  Tensor critic_objective;  // real - fake, ascended by the critic
  Tensor generator_loss;    // -fake, descended by selector and generators
};
WganLosses wgan_losses(const Tensor& score_real, const Tensor& score_fake);

// sum |a - b| / k for (k x d) sequences.
Tensor cycle_loss(const Tensor& a, const Tensor& b);

/// Graph handles for every term plus their values. Disabled terms stay
/// undefined and read as 0 in `values`.
struct LossTerms {
  Tensor sparsity, prior_f, prior_b, recon_f, recon_b, gan_f, gan_b, cycle_f, cycle_b;
  Tensor total;
  LossBreakdown values;

  // Lookup by breakdown field name ("total" included); throws on unknown names.
  const Tensor& term(const std::string& name) const;
};

// Requires a pass produced with weights.cycle_options().
LossTerms total_loss(const CyclePass& pass, const LossWeights& weights);

inline constexpr const char* kLossTermNames[] = {"sparsity", "prior_f", "prior_b", "recon_f", "recon_b",
                                                 "gan_f",    "gan_b",   "cycle_f", "cycle_b", "total"};

}  // namespace cyclesum
