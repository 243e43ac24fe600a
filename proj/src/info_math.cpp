#include "cyclesum/info_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cyclesum::info {

namespace {

constexpr double kSumTolerance = 1e-12;

void check_distribution(const std::vector<double>& p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": entries must be finite and >= 0");
    }
    total += v;
  }
  if (std::fabs(total - 1.0) > kSumTolerance) {
    throw std::invalid_argument(std::string(what) + ": sums to " + std::to_string(total) + ", not 1");
  }
}

std::vector<double> normalized(std::vector<double> v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= s;
  // Push the rounding residue into the largest entry so the sum is 1 to ~1 ulp.
  const double resid = 1.0 - std::accumulate(v.begin(), v.end(), 0.0);
  *std::max_element(v.begin(), v.end()) += resid;
  return v;
}

double xlogy_ratio(double x, double num, double den) {
  if (x == 0.0) return 0.0;
  return x * std::log(num / den);
}

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

}  // namespace

DiscreteJoint::DiscreteJoint(std::size_t n, std::size_t m, std::vector<double> p)
    : n_(n), m_(m), p_(std::move(p)) {
  if (n == 0 || m == 0 || p_.size() != n * m) throw std::invalid_argument("joint: shape/value mismatch");
  check_distribution(p_, "joint");
}

DiscreteJoint DiscreteJoint::product(const std::vector<double>& po, const std::vector<double>& ps) {
  std::vector<double> p(po.size() * ps.size());
  for (std::size_t i = 0; i < po.size(); ++i)
    for (std::size_t j = 0; j < ps.size(); ++j) p[i * ps.size() + j] = po[i] * ps[j];
  return DiscreteJoint(po.size(), ps.size(), normalized(std::move(p)));
}

DiscreteJoint DiscreteJoint::random(std::size_t n, std::size_t m, Rng& rng, double zero_fraction) {
  std::vector<double> p(n * m);
  for (auto& v : p) v = rng.uniform() < zero_fraction ? 0.0 : -std::log(1.0 - rng.uniform());
  if (std::accumulate(p.begin(), p.end(), 0.0) == 0.0) p[0] = 1.0;
  return DiscreteJoint(n, m, normalized(std::move(p)));
}

std::vector<double> DiscreteJoint::marginal_o() const {
  std::vector<double> out(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < m_; ++j) out[i] += at(i, j);
  return out;
}

std::vector<double> DiscreteJoint::marginal_s() const {
  std::vector<double> out(m_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < m_; ++j) out[j] += at(i, j);
  return out;
}

DiscretePair::DiscretePair(std::vector<double> p_in, std::vector<double> q_in)
    : p(std::move(p_in)), q(std::move(q_in)) {
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("pair: p and q must have equal, non-zero length");
  check_distribution(p, "pair.p");
  check_distribution(q, "pair.q");
}

DiscretePair DiscretePair::random(std::size_t n, Rng& rng) {
  std::vector<double> p(n), q(n);
  for (auto& v : p) v = -std::log(1.0 - rng.uniform());
  for (auto& v : q) v = -std::log(1.0 - rng.uniform());
  return DiscretePair(normalized(std::move(p)), normalized(std::move(q)));
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m);
}

double mutual_information(const DiscreteJoint& joint) {
  const auto po = joint.marginal_o();
  const auto ps = joint.marginal_s();
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.rows(); ++i)
    for (std::size_t j = 0; j < joint.cols(); ++j) mi += xlogy_ratio(joint.at(i, j), joint.at(i, j), po[i] * ps[j]);
  return mi;
}

double conditional_kl_form(const DiscreteJoint& joint) {
  const auto po = joint.marginal_o();
  const auto ps = joint.marginal_s();
  double total = 0.0;
  for (std::size_t i = 0; i < joint.rows(); ++i) {
    if (po[i] == 0.0) continue;
    std::vector<double> cond(joint.cols());
    for (std::size_t j = 0; j < joint.cols(); ++j) cond[j] = joint.at(i, j) / po[i];
    total += po[i] * kl_divergence(cond, ps);
  }
  return total;
}

double reverse_conditional_kl_form(const DiscreteJoint& joint) {
  const auto po = joint.marginal_o();
  const auto ps = joint.marginal_s();
  double total = 0.0;
  for (std::size_t j = 0; j < joint.cols(); ++j) {
    if (ps[j] == 0.0) continue;
    std::vector<double> cond(joint.rows());
    for (std::size_t i = 0; i < joint.rows(); ++i) cond[i] = joint.at(i, j) / ps[j];
    total += ps[j] * kl_divergence(cond, po);
  }
  return total;
}

DecompositionCheck verify_symmetric_decomposition(const DiscreteJoint& joint) {
  DecompositionCheck c;
  c.lhs = mutual_information(joint);
  c.rhs = 0.5 * (conditional_kl_form(joint) + reverse_conditional_kl_form(joint));
  c.gap = std::fabs(c.lhs - c.rhs);
  return c;
}

double fenchel_log_conjugate(double t) {
  if (!(t < 0.0)) throw std::domain_error("log conjugate is unbounded for t >= 0 (got " + std::to_string(t) + ")");
  return -1.0 - std::log(-t);
}

double fenchel_log_conjugate_grid(double t, std::size_t points) {
  if (!(t < 0.0)) throw std::domain_error("log conjugate is unbounded for t >= 0");
  // u = e^v with v uniform in [-20, 20]; the objective is ut + log u (see header).
  double best = -std::numeric_limits<double>::infinity();
  const double lo = -20.0, hi = 20.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double v = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    best = std::max(best, std::exp(v) * t + v);
  }
  return best;
}

double gan_bound_value(const DiscretePair& pair, const std::vector<double>& T) {
  if (T.size() != pair.p.size()) throw std::invalid_argument("gan_bound_value: T has wrong length");
  double v = 0.0;
  for (std::size_t i = 0; i < T.size(); ++i) {
    if (!(T[i] > 0.0 && T[i] < 1.0)) {
      throw std::domain_error("gan_bound_value: T must lie strictly inside (0, 1)");
    }
    v += pair.p[i] * std::log(T[i]) + pair.q[i] * std::log1p(-T[i]);
  }
  return v;
}

GanBoundSup gan_bound_sup(const DiscretePair& pair) {
  GanBoundSup out;
  out.t_star.resize(pair.p.size());
  for (std::size_t i = 0; i < pair.p.size(); ++i) {
    const double p = pair.p[i], q = pair.q[i];
    const double mass = p + q;
    const double t = mass > 0.0 ? p / mass : 0.5;
    out.t_star[i] = t;
    if (p > 0.0) out.sup_value += p * std::log(p / mass);
    if (q > 0.0) out.sup_value += q * std::log(q / mass);
  }
  out.jsd = js_divergence(pair.p, pair.q);
  out.jsd_identity = -2.0 * std::numbers::ln2 + 2.0 * out.jsd;
  return out;
}

double gan_bound_sup_grid(const DiscretePair& pair, std::size_t points) {
  // Logit-uniform grid so that optima near 0 or 1 are resolved.
  std::vector<double> grid(points);
  const double lo = -30.0, hi = 30.0;
  for (std::size_t j = 0; j < points; ++j) {
    grid[j] = lo + (hi - lo) * (static_cast<double>(j) + 0.5) / static_cast<double>(points);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pair.p.size(); ++i) {
    const double p = pair.p[i], q = pair.q[i];
    // log(1 - sigmoid(u)) = log sigmoid(-u)
    auto objective = [p, q](double u) {
      return (p > 0 ? p * std::log(logistic(u)) : 0.0) + (q > 0 ? q * std::log(logistic(-u)) : 0.0);
    };
    std::size_t arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points; ++j) {
      const double v = objective(grid[j]);
      if (v > best) best = v, arg = j;
    }
    // The objective is concave in the logit, so a golden-section pass over
    // the neighbouring cells polishes the grid optimum.
    double a = grid[arg > 0 ? arg - 1 : 0];
    double b = grid[arg + 1 < points ? arg + 1 : points - 1];
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
      const double c = b - ratio * (b - a), d = a + ratio * (b - a);
      if (objective(c) < objective(d)) a = c; else b = d;
    }
    best = std::max(best, objective(0.5 * (a + b)));
    total += best;
  }
  return total;
}

}  // namespace cyclesum::info

namespace cyclesum::info {

KlBoundProbe probe_kl_bound(const DiscretePair& pair) {
  KlBoundProbe probe;
  probe.kl_pq = kl_divergence(pair.p, pair.q);
  probe.kl_qp = kl_divergence(pair.q, pair.p);
  probe.negated_sup = -gan_bound_sup(pair).sup_value;
  probe.violated = probe.kl_pq > probe.negated_sup;
  return probe;
}

}  // namespace cyclesum::info
