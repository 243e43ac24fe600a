#pragma once

#include <cstddef>
#include <vector>

#include "cyclesum/rng.hpp"

// Exact information-theoretic quantities on small discrete distributions, in
// nats, with 0 * log 0 = 0 throughout.
namespace cyclesum::info {

/// Joint distribution over an n x m alphabet, row-major.
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t n, std::size_t m, std::vector<double> p);
  static DiscreteJoint product(const std::vector<double>& po, const std::vector<double>& ps);
  static DiscreteJoint random(std::size_t n, std::size_t m, Rng& rng, double zero_fraction = 0.0);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return m_; }
  double at(std::size_t o, std::size_t s) const { return p_[o * m_ + s]; }
  std::vector<double> marginal_o() const;
  std::vector<double> marginal_s() const;

 private:
  std::size_t n_, m_;
  std::vector<double> p_;
};

struct DiscretePair {
  DiscretePair(std::vector<double> p, std::vector<double> q);
  static DiscretePair random(std::size_t n, Rng& rng);
  std::vector<double> p;
  std::vector<double> q;
};

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

// sum_{o,s} p(o,s) log(p(o,s) / (p(o) p(s))).
double mutual_information(const DiscreteJoint& joint);
// sum_o p(o) KL(p(s|o) || p(s)).
double conditional_kl_form(const DiscreteJoint& joint);
// sum_s p(s) KL(p(o|s) || p(o)).
double reverse_conditional_kl_form(const DiscreteJoint& joint);

struct DecompositionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

// lhs = I(o, s); rhs = average of the two conditional-KL anchorings.
DecompositionCheck verify_symmetric_decomposition(const DiscreteJoint& joint);

// -1 - log(-t) for t < 0. This is sup_u {u t + log u}, the convex conjugate
// of -log u, attained at u = -1/t. Written with "- log u" the supremum is
// +inf (u -> 0), so the sign convention follows the closed form.
double fenchel_log_conjugate(double t);
// Log-spaced grid search of the same supremum (test oracle and report).
double fenchel_log_conjugate_grid(double t, std::size_t points = 200000);

// sum p log T + sum q log(1 - T); T must lie strictly inside (0, 1).
double gan_bound_value(const DiscretePair& pair, const std::vector<double>& T);

struct GanBoundSup {
  double sup_value = 0.0;         // at T* = p / (p + q)
  double jsd_identity = 0.0;      // -2 ln 2 + 2 JSD(p || q)
  std::vector<double> t_star;
  double jsd = 0.0;
};

GanBoundSup gan_bound_sup(const DiscretePair& pair);

// Pointwise maximization over a logit-uniform T-grid of `points` values.
double gan_bound_sup_grid(const DiscretePair& pair, std::size_t points = 10000);

}  // namespace cyclesum::info

namespace cyclesum::info {

/// Compares KL(p || q) with -sup_T gan_bound_value, the quantity the
/// variational argument claims as an upper bound. Informational only: the
/// negated supremum never exceeds 2 ln 2 while KL is unbounded.
struct KlBoundProbe {
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  double negated_sup = 0.0;
  bool violated = false;  // kl_pq > negated_sup
};

KlBoundProbe probe_kl_bound(const DiscretePair& pair);

}  // namespace cyclesum::info
