#include "cyclesum/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cyclesum::ad {

void rmsprop_step(ParamStore& params, RmsPropState& state, const RmsPropOptions& opts,
                  Direction direction) {
  if (!(opts.lr >= 0.0)) throw std::invalid_argument("rmsprop: learning rate must be >= 0");
  if (!(opts.decay > 0.0 && opts.decay < 1.0)) {
    throw std::invalid_argument("rmsprop: decay must lie in (0, 1)");
  }
  for (auto& [name, t] : params) {
    if (!t.has_grad()) throw std::invalid_argument("rmsprop: parameter '" + name + "' has no gradient");
  }
  const double sign = direction == Direction::descend ? -1.0 : 1.0;
  const bool f32 = current_precision() == Precision::f32;
  for (auto& [name, t] : params) {
    auto& v = state.mean_square[name];
    if (v.empty()) v.assign(t.size(), 0.0);
    if (v.size() != t.size()) {
      throw ShapeError("rmsprop: accumulator for '" + name + "' has " + std::to_string(v.size()) +
                       " entries, parameter has " + std::to_string(t.size()));
    }
    auto g = t.grad();
    auto theta = t.mutable_values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = opts.decay * v[i] + (1.0 - opts.decay) * g[i] * g[i];
      const double denom = std::sqrt(v[i]) + opts.eps;
      if (denom > 0.0) theta[i] += sign * opts.lr * g[i] / denom;
      if (f32) theta[i] = static_cast<float>(theta[i]);
    }
  }
}

GradCheckReport grad_check(const std::function<Tensor()>& f, ParamStore& params, double h,
                           double tol) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step h must be positive");
  if (current_precision() != Precision::f64) {
    throw std::logic_error("grad_check requires 64-bit precision mode");
  }
  params.zero_grad();
  Tensor root = f();
  backward(root);
  root = Tensor();

  auto probe = [&f]() {
    try {
      return f().item();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  GradCheckReport report;
  for (auto& [name, t] : params) {
    GradCheckEntry entry;
    entry.name = name;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.size(); ++i) {
      double& slot = t.mutable_values()[i];
      const double saved = slot;
      slot = saved + h;
      const double fp = probe();
      slot = saved - h;
      const double fm = probe();
      slot = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i];
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::fabs(a));
      if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(a)) {
        ++entry.non_finite;
        entry.pass = false;
        continue;
      }
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      const double roundoff =
          16.0 * std::numeric_limits<double>::epsilon() * std::max(std::fabs(fp), std::fabs(fm)) / (2.0 * h);
      entry.max_rel_error_net =
          std::max(entry.max_rel_error_net, std::max(0.0, std::fabs(a - numeric) - roundoff) / denom);
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
      }
    }
    if (entry.max_rel_error > tol) entry.pass = false;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.max_rel_error_net = std::max(report.max_rel_error_net, entry.max_rel_error_net);
    report.pass = report.pass && entry.pass;
    report.net_pass = report.net_pass && entry.non_finite == 0 && entry.max_rel_error_net <= tol;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace cyclesum::ad
