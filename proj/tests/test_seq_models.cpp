#include <cmath>

#include "cyclesum/ops.hpp"
#include "cyclesum/optim.hpp"
#include "cyclesum/seq_models.hpp"
#include "doctest.h"

using namespace cyclesum;
using namespace cyclesum::ad;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor random_seq(std::size_t k, std::size_t d, Rng& rng, double scale = 1.0) {
  std::vector<double> v(k * d);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Tensor::constant({k, d}, v);
}

void zero_store(ParamStore& store) {
  for (auto& [name, t] : store)
    for (auto& x : t.mutable_values()) x = 0.0;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("zero LSTM weights give zero hidden states") {
  ParamStore store;
  auto layer = nn::add_lstm_layer(store, "l", 3, 4, 1);
  zero_store(store);
  Rng rng(1);
  auto out = nn::lstm_forward(layer, random_seq(5, 3, rng));
  for (double v : out.hidden.values()) CHECK(v == 0.0);
}

TEST_CASE("forget gate bias starts at one") {
  ParamStore store;
  auto layer = nn::add_lstm_layer(store, "l", 3, 4, 1);
  for (std::size_t j = 0; j < 4; ++j) CHECK(layer.bias.at(4 + j) == 1.0);
}

TEST_CASE("single step matches a hand-evaluated cell, d = h = 1") {
  ParamStore store;
  auto layer = nn::add_lstm_layer(store, "l", 1, 1, 1);
  const double wi = 0.3, wf = -0.2, wg = 0.5, wo = 0.7;
  const double ui = 0.1, uf = 0.4, ug = -0.6, uo = 0.2;
  const double bi = 0.05, bf = 1.0, bg = -0.1, bo = 0.3;
  std::copy_n(std::vector<double>{wi, wf, wg, wo}.begin(), 4, layer.w_in.mutable_values().begin());
  std::copy_n(std::vector<double>{ui, uf, ug, uo}.begin(), 4, layer.w_rec.mutable_values().begin());
  std::copy_n(std::vector<double>{bi, bf, bg, bo}.begin(), 4, layer.bias.mutable_values().begin());
  const double x = 0.8, h0 = -0.4, c0 = 0.25;
  auto out = nn::lstm_forward(layer, Tensor::constant({1, 1}, {x}), Tensor::constant({1}, {h0}),
                              Tensor::constant({1}, {c0}));
  const double i = sig(wi * x + ui * h0 + bi);
  const double f = sig(wf * x + uf * h0 + bf);
  const double g = std::tanh(wg * x + ug * h0 + bg);
  const double o = sig(wo * x + uo * h0 + bo);
  const double c = f * c0 + i * g;
  const double h = o * std::tanh(c);
  CHECK(out.hidden.item() == doctest::Approx(h).epsilon(1e-14));
  CHECK(out.c_final.item() == doctest::Approx(c).epsilon(1e-14));
}

TEST_CASE("lstm gradient w.r.t. all weights") {
  ParamStore store;
  auto layer = nn::add_lstm_layer(store, "l", 3, 4, 2);
  Rng rng(2);
  auto seq = random_seq(6, 3, rng);
  CHECK(grad_check([&] { return sum(nn::lstm_forward(layer, seq).hidden); }, store, 1e-5, 1e-4).pass);
}

TEST_CASE("recurrent forward is length covariant") {
  ParamStore store;
  std::vector<nn::LstmLayerParams> stack = {nn::add_lstm_layer(store, "a", 3, 4, 3),
                                            nn::add_lstm_layer(store, "b", 4, 4, 4)};
  Rng rng(3);
  auto seq = random_seq(7, 3, rng);
  auto full = nn::lstm_stack_forward(stack, seq);
  auto part = nn::lstm_stack_forward(stack, slice_rows(seq, 0, 4));
  for (std::size_t i = 0; i < part.size(); ++i) CHECK(part.at(i) == full.at(i));
}

TEST_CASE("bilstm matches two manual passes") {
  ParamStore store;
  std::vector<nn::BiLstmLayer> stack = {
      {nn::add_lstm_layer(store, "f", 3, 4, 5), nn::add_lstm_layer(store, "b", 3, 4, 6)}};
  Rng rng(4);
  auto seq = random_seq(5, 3, rng);
  auto bi = nn::bilstm_forward(stack, seq);
  auto fwd = nn::lstm_forward(stack[0].fwd, seq).hidden;
  auto bwd = reverse_rows(nn::lstm_forward(stack[0].bwd, reverse_rows(seq)).hidden);
  auto manual = concat({fwd, bwd}, 1);
  CHECK(vals(bi) == vals(manual));

  SUBCASE("palindromic input with tied directions mirrors the half channels") {
    ParamStore tied;
    auto l = nn::add_lstm_layer(tied, "t", 3, 4, 7);
    std::vector<nn::BiLstmLayer> st = {{l, l}};
    auto half = random_seq(3, 3, rng);
    auto pal = concat({half, slice_rows(reverse_rows(half), 1, 3)}, 0);  // 5 frames, palindrome
    auto out = nn::bilstm_forward(st, pal);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t j = 0; j < 4; ++j) CHECK(out.at(t, j) == doctest::Approx(out.at(4 - t, 4 + j)));
  }
  SUBCASE("k = 1 sees the same frame in both directions") {
    auto one = random_seq(1, 3, rng);
    auto a = nn::bilstm_forward(stack, one);
    CHECK(vals(slice_cols(a, 0, 4)) == vals(nn::lstm_forward(stack[0].fwd, one).hidden));
  }
  CHECK_THROWS(nn::bilstm_forward({}, seq));
}

TEST_CASE("vae encode, sample and decode contracts") {
  ParamStore store;
  nn::VaeDims dims{3, 4, 2, 2};
  auto vae = nn::add_vae(store, "g", dims, 9);
  Rng rng(5);

  SUBCASE("zero encoder gives the projection bias") {
    for (auto& l : vae.encoder) {
      for (auto* t : {&l.w_in, &l.w_rec, &l.bias})
        for (auto& x : t->mutable_values()) x = 0.0;
    }
    for (auto& x : vae.mu_w.mutable_values()) x = 0.0;
    auto enc = nn::vae_encode(vae, random_seq(4, 3, rng));
    CHECK(vals(enc.mu) == vals(vae.mu_b));
  }
  SUBCASE("finite outputs for inputs up to magnitude 10") {
    auto enc = nn::vae_encode(vae, random_seq(6, 3, rng, 10.0));
    for (double v : enc.mu.values()) CHECK(std::isfinite(v));
    for (double v : enc.logvar.values()) CHECK(std::isfinite(v));
  }
  SUBCASE("reparameterization") {
    auto z = nn::vae_reparam_sample(Tensor::constant({2}, 0.0), Tensor::constant({2}, 0.0), {1.0, -1.0});
    CHECK(vals(z) == std::vector<double>{1.0, -1.0});
    auto near = nn::vae_reparam_sample(Tensor::constant({2}, {0.3, -0.7}), Tensor::constant({2}, -20.0), rng);
    CHECK(near.at(0) == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(near.at(1) == doctest::Approx(-0.7).epsilon(1e-3));

    ParamStore p;
    auto& mu = p.add("mu", {2}, {0.5, -0.5});
    auto& lv = p.add("lv", {2}, {0.2, -0.3});
    auto zz = nn::vae_reparam_sample(mu, lv, {0.7, -1.3});
    backward(sum(zz));
    CHECK(mu.grad()[0] == 1.0);
    CHECK(lv.grad()[1] == doctest::Approx(0.5 * std::exp(-0.15) * -1.3));
  }
  SUBCASE("sample mean over 1e6 draws is within 3 standard errors") {
    const double m = 0.4, logvar = 0.5;
    const std::size_t n = 1000000;
    Rng r(77);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += m + std::exp(0.5 * logvar) * r.normal();
    const double se = std::exp(0.5 * logvar) / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(acc / static_cast<double>(n) - m) < 3 * se);
  }
  SUBCASE("zero decoder emits the projection bias at every step") {
    for (auto& l : vae.decoder) {
      for (auto* t : {&l.w_in, &l.w_rec, &l.bias})
        for (auto& x : t->mutable_values()) x = 0.0;
    }
    auto out = nn::vae_decode(vae, Tensor::constant({2}, {0.3, 0.1}), 5);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t j = 0; j < 3; ++j) CHECK(out.at(t, j) == vae.out_b.at(j));
  }
  SUBCASE("decode shape for several lengths") {
    for (std::size_t k : {1, 5, 96}) {
      auto out = nn::vae_decode(vae, Tensor::constant({2}, 0.1), k);
      CHECK(out.shape() == Shape{k, 3});
    }
  }
  SUBCASE("decoder time order: emissions are flipped back") {
    // The decoder input is constant over time, so emission t depends only on
    // the number of steps run. Caller-visible frame t is emission k-1-t.
    auto z = Tensor::constant({2}, {0.2, -0.4});
    auto full = nn::vae_decode(vae, z, 5);
    auto one = nn::vae_decode(vae, z, 1);
    for (std::size_t j = 0; j < 3; ++j) CHECK(full.at(4, j) == doctest::Approx(one.at(0, j)).epsilon(1e-14));
  }
  SUBCASE("encode -> sample -> decode gradient") {
    auto seq = random_seq(3, 3, rng);
    auto f = [&] {
      auto enc = nn::vae_encode(vae, seq);
      auto z = nn::vae_reparam_sample(enc.mu, enc.logvar, {0.3, -0.8});
      return sum(square(sub(nn::vae_decode(vae, z, 3), seq)));
    };
    auto rep = grad_check(f, store, 1e-5, 1e-4);
    CHECK(rep.pass);
    double gmax = 0.0;
    for (const auto& e : rep.entries)
      if (e.name.find(".enc.") != std::string::npos) gmax = std::max(gmax, e.max_abs_analytic);
    CHECK(gmax > 0.0);
  }
}

TEST_CASE("critic contracts") {
  ParamStore store;
  auto critic = nn::add_critic(store, "d", {3, 4, 1}, 3);
  Rng rng(8);
  auto a = random_seq(5, 3, rng), b = random_seq(7, 3, rng);

  auto ra = nn::critic_forward(critic, a);
  auto ra2 = nn::critic_forward(critic, a);
  CHECK(ra.score.item() == ra2.score.item());
  CHECK(vals(ra.phi) == vals(ra2.phi));
  CHECK(ra.phi.size() == 4);

  auto rb = nn::critic_forward(critic, b);
  double dphi = 0.0, wn = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    dphi += std::pow(ra.phi.at(j) - rb.phi.at(j), 2);
    wn += std::pow(critic.head_w.at(j), 2);
  }
  CHECK(std::fabs(ra.score.item() - rb.score.item()) <= std::sqrt(wn) * std::sqrt(dphi) + 1e-15);

  for (auto& x : critic.head_w.mutable_values()) x = 0.0;
  critic.head_b.mutable_values()[0] = 0.37;
  CHECK(nn::critic_forward(critic, a).score.item() == 0.37);
  CHECK(nn::critic_forward(critic, b).score.item() == 0.37);
}

TEST_CASE("outputs stay finite for |input| <= 10 with Xavier weights") {
  ParamStore store;
  auto vae = nn::add_vae(store, "g", {3, 8, 2, 2}, 4);
  auto critic = nn::add_critic(store, "d", {3, 8, 2}, 5);
  Rng rng(6);
  auto seq = random_seq(20, 3, rng, 10.0);
  auto gen = nn::generate(vae, seq, rng);
  for (double v : gen.sequence.values()) CHECK(std::isfinite(v));
  CHECK(std::isfinite(nn::critic_forward(critic, seq).score.item()));
}

TEST_CASE("derived seeds differ by name and are stable") {
  CHECK(nn::derive_seed(1, "a") == nn::derive_seed(1, "a"));
  CHECK(nn::derive_seed(1, "a") != nn::derive_seed(1, "b"));
  CHECK(nn::derive_seed(1, "a") != nn::derive_seed(2, "a"));
}
