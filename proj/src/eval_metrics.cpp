#include "cyclesum/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cyclesum/rng.hpp"

namespace cyclesum::eval {

ShotSegmentation::ShotSegmentation(std::vector<Shot> shots, std::size_t k) : frames_(k) {
  std::size_t expect = 0;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const Shot& s = shots[i];
    if (s.start != expect) {
      throw std::invalid_argument("shot " + std::to_string(i) + " starts at " + std::to_string(s.start) +
                                  ", expected " + std::to_string(expect));
    }
    if (s.end <= s.start) throw std::invalid_argument("shot " + std::to_string(i) + " is empty");
    expect = s.end;
  }
  if (expect != k) {
    throw std::invalid_argument("shots cover [0, " + std::to_string(expect) + "), expected [0, " +
                                std::to_string(k) + ")");
  }
  shots_ = std::move(shots);
}

ShotSegmentation ShotSegmentation::uniform(std::size_t k, std::size_t length) {
  if (k == 0 || length == 0) throw std::invalid_argument("uniform segmentation needs k, length >= 1");
  std::vector<Shot> shots;
  const std::size_t n = std::max<std::size_t>(1, k / length);
  for (std::size_t i = 0; i < n; ++i) shots.push_back({i * length, i + 1 == n ? k : (i + 1) * length});
  return ShotSegmentation(std::move(shots), k);
}

std::size_t ShotSegmentation::min_length() const {
  std::size_t m = frames_;
  for (const auto& s : shots_) m = std::min(m, s.length());
  return m;
}

std::vector<std::size_t> ShotSegmentation::lengths() const {
  std::vector<std::size_t> out;
  out.reserve(shots_.size());
  for (const auto& s : shots_) out.push_back(s.length());
  return out;
}

std::vector<double> frame_to_shot_scores(const std::vector<double>& x, const ShotSegmentation& seg) {
  if (x.size() != seg.num_frames()) {
    throw std::invalid_argument("segmentation covers " + std::to_string(seg.num_frames()) +
                                " frames, scores have " + std::to_string(x.size()));
  }
  std::vector<double> out;
  out.reserve(seg.size());
  for (const auto& s : seg.shots()) {
    double acc = 0.0;
    for (std::size_t t = s.start; t < s.end; ++t) acc += x[t];
    out.push_back(acc / static_cast<double>(s.length()));
  }
  return out;
}

namespace {

struct Candidate {
  double value = 0.0;
  std::size_t frames = 0;
  std::vector<std::size_t> items;  // ascending
};

bool values_tie(double a, double b) {
  return std::fabs(a - b) <= 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

bool better(const Candidate& a, const Candidate& b) {
  if (!values_tie(a.value, b.value)) return a.value > b.value;
  if (a.frames != b.frames) return a.frames < b.frames;
  return std::lexicographical_compare(a.items.begin(), a.items.end(), b.items.begin(), b.items.end());
}

}  // namespace

std::vector<std::size_t> knapsack_select(const std::vector<double>& scores,
                                         const std::vector<std::size_t>& lengths,
                                         std::size_t capacity) {
  if (scores.size() != lengths.size()) throw std::invalid_argument("knapsack: scores/lengths size mismatch");
  for (auto len : lengths) {
    if (len == 0) throw std::invalid_argument("knapsack: shot lengths must be >= 1");
  }
  // best[c]: best set over the items seen so far with total length <= c.
  std::vector<Candidate> best(capacity + 1);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] > 0.0) || lengths[i] > capacity) continue;
    const std::size_t w = lengths[i];
    for (std::size_t c = capacity; c >= w; --c) {
      Candidate with = best[c - w];
      with.value += scores[i];
      with.frames += w;
      with.items.push_back(i);
      if (better(with, best[c])) best[c] = std::move(with);
      if (c == w) break;
    }
  }
  return best[capacity].items;
}

std::size_t frame_budget(std::size_t k, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("budget fraction must lie in (0, 1)");
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(k) + 1e-9));
}

KeyshotSelection select_keyshots(const std::vector<double>& x, const ShotSegmentation& seg,
                                 double fraction) {
  KeyshotSelection out;
  out.budget = frame_budget(x.size(), fraction);
  out.frames.assign(x.size(), 0);
  if (out.budget < seg.min_length()) {
    out.degenerate = true;
    return out;
  }
  const auto scores = frame_to_shot_scores(x, seg);
  out.shots = knapsack_select(scores, seg.lengths(), out.budget);
  for (auto i : out.shots) {
    const Shot& s = seg.shots()[i];
    std::fill(out.frames.begin() + static_cast<std::ptrdiff_t>(s.start),
              out.frames.begin() + static_cast<std::ptrdiff_t>(s.end), std::uint8_t{1});
  }
  return out;
}

EvalResult f_measure(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("f_measure: length mismatch");
  std::size_t n_pred = 0, n_gt = 0, overlap = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    n_pred += p;
    n_gt += g;
    overlap += p && g;
  }
  EvalResult r;
  r.selected_frames = n_pred;
  r.precision = n_pred ? static_cast<double>(overlap) / static_cast<double>(n_pred) : 0.0;
  r.recall = n_gt ? static_cast<double>(overlap) / static_cast<double>(n_gt) : 0.0;
  const double pr = r.precision + r.recall;
  r.f_score = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
  return r;
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "max") return Aggregation::max;
  throw std::invalid_argument("unknown aggregation '" + s + "' (expected mean or max)");
}

double aggregate_annotators(const std::vector<double>& per_user_f, Aggregation mode) {
  if (per_user_f.empty()) throw std::invalid_argument("aggregate_annotators: no annotators");
  if (mode == Aggregation::max) return *std::max_element(per_user_f.begin(), per_user_f.end());
  std::vector<double> sorted = per_user_f;  // fixed summation order
  std::sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
}

std::vector<Split> make_splits(const std::vector<std::string>& ids, std::uint64_t seed,
                               std::size_t count, double test_fraction) {
  if (ids.size() < count || ids.size() < 2) {
    throw std::invalid_argument("need at least " + std::to_string(std::max<std::size_t>(count, 2)) +
                                " videos for " + std::to_string(count) + " splits, got " +
                                std::to_string(ids.size()));
  }
  const auto n = ids.size();
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  Rng rng(seed);
  std::vector<Split> out;
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<std::string> order = ids;
    rng.shuffle(order);
    Split split;
    split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    out.push_back(std::move(split));
  }
  return out;
}

SplitRun run_splits(const std::vector<std::string>& ids, std::uint64_t seed, const TrainFn& train_fn,
                    const EvalFn& eval_fn, std::size_t count) {
  const auto splits = make_splits(ids, seed, count);
  SplitRun run;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    train_fn(splits[i], i);
    run.per_split_f.push_back(eval_fn(splits[i], i));
  }
  run.mean_f = std::accumulate(run.per_split_f.begin(), run.per_split_f.end(), 0.0) /
               static_cast<double>(run.per_split_f.size());
  return run;
}

}  // namespace cyclesum::eval
