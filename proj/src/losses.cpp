#include "cyclesum/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cyclesum {

void LossWeights::validate() const {
  if (!(lambda_adv >= 0.0) || !(lambda_gen >= 0.0) || !(lambda_cycle >= 0.0)) {
    throw std::invalid_argument("loss weights must be >= 0");
  }
  if (!(sigma > 0.0 && sigma < 1.0)) throw std::invalid_argument("sparsity target sigma must lie in (0, 1)");
  if (!enable_backward_gen && (enable_gan_b || enable_cycle_f || enable_cycle_b)) {
    throw std::invalid_argument("gan_b and both cycle terms need the backward generator");
  }
}

CycleOptions LossWeights::cycle_options() const {
  return {enable_backward_gen, enable_backward_gen && enable_cycle_f, enable_backward_gen && enable_cycle_b};
}

std::string LossBreakdown::csv_header() {
  std::string out = "step";
  for (const char* n : kLossTermNames) out += std::string(",") + n;
  return out;
}

std::string LossBreakdown::csv_line(std::size_t step) const {
  std::ostringstream os;
  os.precision(17);
  os << step << ',' << sparsity << ',' << prior_f << ',' << prior_b << ',' << recon_f << ',' << recon_b << ','
     << gan_f << ',' << gan_b << ',' << cycle_f << ',' << cycle_b << ',' << total;
  return os.str();
}

double LossBreakdown::resum(const LossWeights& w) const {
  return sparsity + w.lambda_adv * (gan_f + gan_b) + w.lambda_gen * (prior_f + recon_f + prior_b + recon_b) +
         w.lambda_cycle * (cycle_f + cycle_b);
}

Tensor sparsity_loss(const Tensor& x, double sigma) { return ad::abs(ad::add_scalar(ad::mean(x), -sigma)); }

Tensor prior_kl(const Tensor& mu, const Tensor& logvar) {
  if (mu.shape() != logvar.shape()) {
    throw ad::ShapeError("prior_kl: mu " + ad::shape_string(mu.shape()) + " vs logvar " +
                         ad::shape_string(logvar.shape()));
  }
  Tensor inner = ad::sub(ad::add(ad::square(mu), ad::exp(logvar)), logvar);
  return ad::scale(ad::sum(ad::add_scalar(inner, -1.0)), 0.5);
}

Tensor recon_loss(const Tensor& phi_real, const Tensor& phi_fake, std::size_t k) {
  if (k == 0) throw std::invalid_argument("recon_loss: k must be >= 1");
  return ad::scale(ad::l2_norm(ad::sub(phi_real, phi_fake)), 1.0 / static_cast<double>(k));
}

WganLosses wgan_losses(const Tensor& score_real, const Tensor& score_fake) {
  return {ad::sub(score_real, score_fake), ad::neg(score_fake)};
}

Tensor cycle_loss(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() != 2) {
    throw ad::ShapeError("cycle_loss: " + ad::shape_string(a.shape()) + " vs " + ad::shape_string(b.shape()));
  }
  return ad::scale(ad::sum(ad::abs(ad::sub(a, b))), 1.0 / static_cast<double>(a.rows()));
}

const Tensor& LossTerms::term(const std::string& name) const {
  if (name == "sparsity") return sparsity;
  if (name == "prior_f") return prior_f;
  if (name == "prior_b") return prior_b;
  if (name == "recon_f") return recon_f;
  if (name == "recon_b") return recon_b;
  if (name == "gan_f") return gan_f;
  if (name == "gan_b") return gan_b;
  if (name == "cycle_f") return cycle_f;
  if (name == "cycle_b") return cycle_b;
  if (name == "total") return total;
  throw std::invalid_argument("unknown loss term '" + name + "'");
}

namespace {

double value_of(const Tensor& t) { return t.defined() ? t.item() : 0.0; }

void accumulate(Tensor& acc, const Tensor& term, double weight) {
  if (!term.defined() || weight == 0.0) return;
  Tensor scaled = weight == 1.0 ? term : ad::scale(term, weight);
  acc = acc.defined() ? ad::add(acc, scaled) : scaled;
}

}  // namespace

LossTerms total_loss(const CyclePass& pass, const LossWeights& w) {
  w.validate();
  LossTerms t;
  t.sparsity = sparsity_loss(pass.x, w.sigma);
  t.prior_f = prior_kl(pass.mu_f, pass.logvar_f);
  t.recon_f = recon_loss(pass.df_real.phi, pass.df_fake.phi, pass.k);
  if (w.enable_gan_f) t.gan_f = wgan_losses(pass.df_real.score, pass.df_fake.score).generator_loss;
  if (w.enable_backward_gen) {
    t.prior_b = prior_kl(pass.mu_b, pass.logvar_b);
    t.recon_b = recon_loss(pass.db_real.phi, pass.db_fake.phi, pass.k);
    if (w.enable_gan_b) t.gan_b = wgan_losses(pass.db_real.score, pass.db_fake.score).generator_loss;
    if (w.enable_cycle_f) t.cycle_f = cycle_loss(pass.s_cycle, pass.s);
    if (w.enable_cycle_b) t.cycle_b = cycle_loss(pass.o_cycle, pass.o);
  }

  t.total = t.sparsity;
  accumulate(t.total, t.gan_f, w.lambda_adv);
  accumulate(t.total, t.gan_b, w.lambda_adv);
  accumulate(t.total, t.prior_f, w.lambda_gen);
  accumulate(t.total, t.recon_f, w.lambda_gen);
  accumulate(t.total, t.prior_b, w.lambda_gen);
  accumulate(t.total, t.recon_b, w.lambda_gen);
  accumulate(t.total, t.cycle_f, w.lambda_cycle);
  accumulate(t.total, t.cycle_b, w.lambda_cycle);

  auto& v = t.values;
  v.sparsity = value_of(t.sparsity);
  v.prior_f = value_of(t.prior_f);
  v.prior_b = value_of(t.prior_b);
  v.recon_f = value_of(t.recon_f);
  v.recon_b = value_of(t.recon_b);
  v.gan_f = value_of(t.gan_f);
  v.gan_b = value_of(t.gan_b);
  v.cycle_f = value_of(t.cycle_f);
  v.cycle_b = value_of(t.cycle_b);
  v.total = t.total.item();
  return t;
}

}  // namespace cyclesum
