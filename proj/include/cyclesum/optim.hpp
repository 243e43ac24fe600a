#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cyclesum/param_store.hpp"

namespace cyclesum::ad {

enum class Direction { descend, ascend };

struct RmsPropOptions {
  double lr = 1e-4;
  double decay = 0.9;
  double eps = 1e-8;
};

// Running mean of squared gradients, keyed like the store it tracks.
struct RmsPropState {
  std::map<std::string, std::vector<double>> mean_square;
};

/// v <- decay * v + (1 - decay) * g^2;  theta <- theta -/+ lr * g / (sqrt(v) + eps).
/// Gradients are read from each parameter's buffer; a parameter without one is
/// an error. Missing accumulators are created as zeros.
void rmsprop_step(ParamStore& params, RmsPropState& state, const RmsPropOptions& opts,
                  Direction direction);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_rel_error_net = 0.0;  // after discounting the roundoff bound
  double max_abs_analytic = 0.0;
  std::size_t worst_index = 0;
  std::size_t non_finite = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double max_rel_error_net = 0.0;
  bool pass = true;      // strict: max_rel_error <= tol
  bool net_pass = true;  // max_rel_error_net <= tol
};

/// Compares backprop gradients of `f` against central differences
/// (f(theta + h) - f(theta - h)) / 2h for every scalar entry in `params`.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8). `f` must rebuild its
/// graph on every call and be deterministic.
///
/// The net variant first subtracts r = 16 eps max(|f+|, |f-|) / 2h from
/// |a - n|, the cancellation error of the difference quotient itself. Entries
/// whose gradient sits below r / tol cannot meet the strict test in binary64
/// whatever the backprop does; the net figure separates that from real bugs.
GradCheckReport grad_check(const std::function<Tensor()>& f, ParamStore& params, double h,
                           double tol);

}  // namespace cyclesum::ad
