#include <cmath>

#include "cyclesum/losses.hpp"
#include "cyclesum/optim.hpp"
#include "doctest.h"
#include "toy.hpp"

using namespace cyclesum;
using namespace cyclesum::ad;

TEST_CASE("sparsity loss") {
  CHECK(sparsity_loss(Tensor::constant({3}, 0.3), 0.3).item() == doctest::Approx(0.0));
  CHECK(sparsity_loss(Tensor::constant({5}, 1.0), 0.3).item() == doctest::Approx(0.7));
  CHECK(sparsity_loss(Tensor::constant({10}, {1, 1, 1, 0, 0, 0, 0, 0, 0, 0}), 0.15).item() ==
        doctest::Approx(0.15));
}

TEST_CASE("prior KL closed form") {
  CHECK(prior_kl(Tensor::constant({4}, 0.0), Tensor::constant({4}, 0.0)).item() == 0.0);
  CHECK(prior_kl(Tensor::constant({1}, 1.0), Tensor::constant({1}, 0.0)).item() == doctest::Approx(0.5));
  const double kl = prior_kl(Tensor::constant({1}, 0.0), Tensor::constant({1}, std::log(2.0))).item();
  CHECK(kl == doctest::Approx(0.5 * (2.0 - std::log(2.0) - 1.0)).epsilon(1e-14));
  CHECK(kl == doctest::Approx(0.15343).epsilon(1e-4));

  // Monte-Carlo: E_q[log q(z) - log p(z)] with 1e6 draws.
  Rng rng(17);
  const double sd = std::sqrt(2.0);
  double acc = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double e = rng.normal();
    const double z = sd * e;
    acc += (-0.5 * e * e - std::log(sd)) - (-0.5 * z * z);
  }
  CHECK(std::fabs(acc / n - kl) / kl <= 0.01);
  CHECK_THROWS_AS(prior_kl(Tensor::constant({2}, 0.0), Tensor::constant({3}, 0.0)), ShapeError);
}

TEST_CASE("feature-wise reconstruction loss") {
  CHECK(recon_loss(Tensor::constant({3}, 0.4), Tensor::constant({3}, 0.4), 7).item() == 0.0);
  CHECK(recon_loss(Tensor::constant({2}, {3, 4}), Tensor::constant({2}, 0.0), 5).item() == doctest::Approx(1.0));

  auto nets = CycleSumNets::create(test::toy_dims(), 2);
  auto o = test::toy_video(4, 3, 1);
  auto f = [&] {
    Rng rng(5);
    auto pass = full_cycle(nets, o, rng);
    return recon_loss(pass.df_real.phi, pass.df_fake.phi, pass.k);
  };
  CHECK(grad_check(f, nets.gen_f_store, 1e-5, 1e-4).pass);
}

TEST_CASE("wgan losses") {
  auto c = wgan_losses(Tensor::scalar(0.7), Tensor::scalar(0.7));
  CHECK(c.critic_objective.item() == 0.0);
  auto w = wgan_losses(Tensor::scalar(3.0), Tensor::scalar(1.5));
  CHECK(w.critic_objective.item() == 1.5);
  CHECK(w.generator_loss.item() == -1.5);

  SUBCASE("one small ascend step raises the objective on fixed inputs") {
    ParamStore store;
    auto critic = nn::add_critic(store, "d", {3, 4, 1}, 8);
    auto real = test::toy_video(5, 3, 1), fake = test::toy_video(5, 3, 2);
    auto objective = [&] {
      return wgan_losses(nn::critic_forward(critic, real).score, nn::critic_forward(critic, fake).score)
          .critic_objective;
    };
    auto before = objective();
    store.zero_grad();
    backward(before);
    RmsPropState state;
    rmsprop_step(store, state, {1e-4, 0.9, 1e-8}, Direction::ascend);
    CHECK(objective().item() > before.item());
  }
}

TEST_CASE("cycle loss") {
  auto a = test::toy_video(3, 2, 4);
  CHECK(cycle_loss(a, a).item() == 0.0);
  CHECK(cycle_loss(Tensor::constant({2, 1}, {1, 2}), Tensor::constant({2, 1}, 0.0)).item() == 1.5);
  CHECK(cycle_loss(Tensor::constant({1, 3}, {1, -1, 2}), Tensor::constant({1, 3}, 0.0)).item() == 4.0);
  CHECK_THROWS_AS(cycle_loss(Tensor::constant({2, 2}, 0.0), Tensor::constant({2, 3}, 0.0)), ShapeError);
}

TEST_CASE("breakdown weighted sum") {
  LossWeights w;
  w.lambda_adv = w.lambda_gen = w.lambda_cycle = 1.0;
  LossBreakdown b;
  b.sparsity = b.gan_f = b.gan_b = b.cycle_f = b.cycle_b = 1.0;
  b.prior_f = b.recon_f = b.prior_b = b.recon_b = 0.5;  // gen_f = gen_b = 1
  CHECK(b.resum(w) == 7.0);
  CHECK(LossBreakdown::csv_header() ==
        "step,sparsity,prior_f,prior_b,recon_f,recon_b,gan_f,gan_b,cycle_f,cycle_b,total");
  CHECK(b.csv_line(3).rfind("3,1,0.5,0.5,0.5,0.5,1,1,1,1,0", 0) == 0);
}

TEST_CASE("total loss on random toy instances") {
  auto o = test::toy_video(4, 3, 9);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto nets = CycleSumNets::create(test::toy_dims(), seed);
    Rng rng(seed);
    LossWeights w;
    w.lambda_adv = 0.3 * static_cast<double>(seed);
    auto pass = full_cycle(nets, o, rng, w.cycle_options());
    auto t = total_loss(pass, w);
    CHECK(std::fabs(t.values.total - t.values.resum(w)) <= 1e-12 * std::max(1.0, std::fabs(t.values.total)));
    CHECK(t.values.sparsity >= 0.0);
    CHECK(t.values.prior_f >= 0.0);
    CHECK(t.values.recon_b >= 0.0);
    CHECK(t.values.cycle_f >= 0.0);
  }
}

TEST_CASE("lambda scaling is linear in its bracket") {
  auto nets = CycleSumNets::create(test::toy_dims(), 4);
  auto o = test::toy_video(4, 3, 2);
  LossWeights w;
  Rng r1(3), r2(3);
  auto base = total_loss(full_cycle(nets, o, r1), w).values;
  LossWeights w2 = w;
  w2.lambda_cycle *= 2.5;
  auto scaled = total_loss(full_cycle(nets, o, r2), w2).values;
  const double expect = base.total + 1.5 * w.lambda_cycle * (base.cycle_f + base.cycle_b);
  CHECK(scaled.total == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("toggles zero their terms and decouple exclusive parameters") {
  auto nets = CycleSumNets::create(test::toy_dims(), 6);
  auto o = test::toy_video(4, 3, 3);

  SUBCASE("all toggles off, x at sigma, zero-KL zero-recon toy gives 0") {
    LossWeights w;
    w.enable_gan_f = w.enable_gan_b = w.enable_cycle_f = w.enable_cycle_b = false;
    CyclePass p;
    p.k = 4;
    p.x = Tensor::constant({4}, w.sigma);
    p.mu_f = p.mu_b = p.logvar_f = p.logvar_b = Tensor::constant({2}, 0.0);
    p.df_real.phi = p.df_fake.phi = p.db_real.phi = p.db_fake.phi = Tensor::constant({4}, 0.2);
    auto t = total_loss(p, w);
    CHECK(t.values.total == doctest::Approx(0.0));
    CHECK_FALSE(t.gan_f.defined());
  }
  SUBCASE("single-generator variant: no gradient reaches D_b or G_b") {
    LossWeights w;
    w.enable_gan_b = w.enable_cycle_f = w.enable_cycle_b = w.enable_backward_gen = false;
    Rng rng(1);
    auto t = total_loss(full_cycle(nets, o, rng, w.cycle_options()), w);
    nets.critic_b_store.zero_grad();
    nets.gen_b_store.zero_grad();
    backward(t.total);
    for (auto* s : {&nets.critic_b_store, &nets.gen_b_store})
      for (const auto& [name, p] : *s)
        for (double g : p.grad()) CHECK(g == 0.0);
    CHECK(t.values.gan_b == 0.0);
    CHECK(t.values.cycle_b == 0.0);
    CHECK(t.values.prior_b == 0.0);
  }
  SUBCASE("inconsistent toggles are rejected") {
    LossWeights w;
    w.enable_backward_gen = false;
    CHECK_THROWS(w.validate());
    LossWeights neg;
    neg.lambda_gen = -1;
    CHECK_THROWS(neg.validate());
    LossWeights bad_sigma;
    bad_sigma.sigma = 1.0;
    CHECK_THROWS(bad_sigma.validate());
  }
}

TEST_CASE("gradient of every term and the total on the toy instance") {
  auto nets = CycleSumNets::create(test::toy_dims(), 21);
  auto o = test::toy_video(4, 3, 22);
  LossWeights w;
  for (const char* term : kLossTermNames) {
    for (std::size_t i = 0; i < 5; ++i) {
      auto f = [&] {
        Rng rng(99);
        return total_loss(full_cycle(nets, o, rng), w).term(term);
      };
      auto rep = grad_check(f, *nets.stores()[i], 1e-5, 1e-4);
      INFO(std::string(term), " on ", std::string(CycleSumNets::kStoreNames[i]), ": ", rep.max_rel_error, " net ",
           rep.max_rel_error_net);
      // Many entries here are ~1e-9, under ulp(f) / 2h, so the strict figure is
      // dominated by cancellation in the difference quotient itself.
      CHECK(rep.net_pass);
      CHECK(rep.max_rel_error_net < 1e-6);
    }
  }
}
