#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cyclesum/info_math.hpp"
#include "doctest.h"

using namespace cyclesum;
using namespace cyclesum::info;

namespace {

constexpr double kLn2 = std::numbers::ln2;

// Independent oracle: I = H(o) + H(s) - H(o, s).
double mi_by_entropies(const DiscreteJoint& j) {
  auto h = [](const std::vector<double>& p) {
    double acc = 0.0;
    for (double v : p)
      if (v > 0.0) acc -= v * std::log(v);
    return acc;
  };
  std::vector<double> flat;
  for (std::size_t i = 0; i < j.rows(); ++i)
    for (std::size_t k = 0; k < j.cols(); ++k) flat.push_back(j.at(i, k));
  return h(j.marginal_o()) + h(j.marginal_s()) - h(flat);
}

}  // namespace

TEST_CASE("mutual information examples") {
  auto prod = DiscreteJoint::product({0.2, 0.3, 0.5}, {0.6, 0.4});
  CHECK(std::fabs(mutual_information(prod)) <= 1e-15);
  DiscreteJoint diag(2, 2, {0.5, 0.0, 0.0, 0.5});
  CHECK(mutual_information(diag) == doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(mutual_information(diag) == doctest::Approx(0.693147).epsilon(1e-6));

  Rng rng(4);
  auto j = DiscreteJoint::random(4, 4, rng);
  CHECK(std::fabs(mutual_information(j) - conditional_kl_form(j)) <= 1e-12);
  CHECK(std::fabs(mutual_information(j) - mi_by_entropies(j)) <= 1e-12);
}

TEST_CASE("mutual information is non-negative, zero iff factorized") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    auto j = DiscreteJoint::random(1 + rng.below(6), 1 + rng.below(6), rng, 0.3);
    CHECK(mutual_information(j) >= -1e-15);
  }
  for (int i = 0; i < 20; ++i) {
    auto a = DiscreteJoint::random(1, 5, rng).marginal_s();
    auto b = DiscreteJoint::random(1, 4, rng).marginal_s();
    CHECK(std::fabs(mutual_information(DiscreteJoint::product(a, b))) <= 1e-14);
  }
  DiscreteJoint dependent(2, 2, {0.4, 0.1, 0.1, 0.4});
  CHECK(mutual_information(dependent) > 0.1);
}

TEST_CASE("symmetric decomposition") {
  auto prod = verify_symmetric_decomposition(DiscreteJoint::product({0.5, 0.5}, {0.1, 0.9}));
  CHECK(std::fabs(prod.lhs) <= 1e-15);
  CHECK(std::fabs(prod.rhs) <= 1e-15);
  auto diag = verify_symmetric_decomposition(DiscreteJoint(2, 2, {0.5, 0, 0, 0.5}));
  CHECK(diag.lhs == doctest::Approx(kLn2));
  CHECK(diag.rhs == doctest::Approx(kLn2));

  Rng rng(6);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto j = DiscreteJoint::random(2 + rng.below(15), 2 + rng.below(15), rng);
    worst = std::max(worst, verify_symmetric_decomposition(j).gap);
  }
  CHECK(worst <= 1e-10);

  // A zero marginal row contributes nothing.
  auto sparse = verify_symmetric_decomposition(DiscreteJoint(3, 2, {0.3, 0.2, 0.0, 0.0, 0.1, 0.4}));
  CHECK(sparse.gap <= 1e-12);
  CHECK(std::isfinite(sparse.lhs));
}

TEST_CASE("distribution validation") {
  CHECK_THROWS(DiscreteJoint(2, 2, {0.5, 0.5, 0.5, 0.5}));
  CHECK_THROWS(DiscreteJoint(2, 2, {1.5, -0.5, 0.0, 0.0}));
  CHECK_THROWS(DiscreteJoint(2, 2, {1.0}));
  CHECK_THROWS(DiscretePair({1.0}, {0.5, 0.5}));
}

TEST_CASE("Fenchel conjugate of log") {
  CHECK(fenchel_log_conjugate(-1.0) == -1.0);
  CHECK(fenchel_log_conjugate(-std::numbers::e) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK_THROWS_AS(fenchel_log_conjugate(0.0), std::domain_error);
  CHECK_THROWS_AS(fenchel_log_conjugate(0.5), std::domain_error);
  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = -std::exp(rng.uniform(-5.0, 5.0));
    worst = std::max(worst, std::fabs(fenchel_log_conjugate(t) - fenchel_log_conjugate_grid(t)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("GAN bound value") {
  Rng rng(8);
  for (int i = 0; i < 10; ++i) {
    auto pair = DiscretePair::random(2 + rng.below(8), rng);
    CHECK(gan_bound_value(pair, std::vector<double>(pair.p.size(), 0.5)) ==
          doctest::Approx(-2.0 * kLn2).epsilon(1e-14));
  }
  DiscretePair same({0.2, 0.8}, {0.2, 0.8});
  CHECK(gan_bound_value(same, {0.5, 0.5}) == doctest::Approx(-1.386294).epsilon(1e-6));
  CHECK_THROWS(gan_bound_value(same, {0.0, 0.5}));
  CHECK_THROWS(gan_bound_value(same, {0.5, 1.0}));
}

TEST_CASE("GAN bound supremum") {
  DiscretePair same({0.3, 0.7}, {0.3, 0.7});
  auto s = gan_bound_sup(same);
  CHECK(s.sup_value == doctest::Approx(-2.0 * kLn2));
  CHECK(std::fabs(s.jsd) <= 1e-15);

  DiscretePair disjoint({1.0, 0.0}, {0.0, 1.0});
  auto d = gan_bound_sup(disjoint);
  CHECK(std::fabs(d.sup_value) <= 1e-15);
  CHECK(d.jsd == doctest::Approx(kLn2));

  Rng rng(9);
  double worst_identity = 0.0, worst_grid = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto pair = DiscretePair::random(2 + rng.below(8), rng);
    auto sup = gan_bound_sup(pair);
    worst_identity = std::max(worst_identity, std::fabs(sup.sup_value - sup.jsd_identity));
    worst_grid = std::max(worst_grid, std::fabs(sup.sup_value - gan_bound_sup_grid(pair)));
    CHECK(sup.sup_value >= -2.0 * kLn2 - 1e-12);
    CHECK(sup.sup_value <= 1e-12);
    std::vector<double> T(pair.p.size());
    for (auto& t : T) t = rng.uniform(1e-6, 1.0 - 1e-6);
    CHECK(gan_bound_value(pair, T) <= sup.sup_value + 1e-12);
  }
  CHECK(worst_identity <= 1e-10);
  CHECK(worst_grid <= 1e-6);
}

TEST_CASE("KL bound probe finds counterexamples") {
  // KL(p||q) is unbounded while the negated supremum stays below 2 ln 2.
  DiscretePair far({0.999, 0.001}, {0.001, 0.999});
  auto probe = probe_kl_bound(far);
  CHECK(probe.negated_sup <= 2.0 * kLn2 + 1e-12);
  CHECK(probe.kl_pq > 2.0 * kLn2);
  CHECK(probe.violated);
  auto equal = probe_kl_bound(DiscretePair({0.5, 0.5}, {0.5, 0.5}));
  CHECK_FALSE(equal.violated);
}
