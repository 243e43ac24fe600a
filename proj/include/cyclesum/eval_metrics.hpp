#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace cyclesum::eval {

/// Half-open frame interval [start, end).
struct Shot {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - start; }
  bool operator==(const Shot&) const = default;
};

/// Ordered, disjoint, contiguous shots covering [0, k).
class ShotSegmentation {
 public:
  ShotSegmentation() = default;
  // Throws std::invalid_argument unless the shots tile [0, k) exactly.
  ShotSegmentation(std::vector<Shot> shots, std::size_t k);

  // Shots of `length` frames; the last one absorbs the remainder.
  static ShotSegmentation uniform(std::size_t k, std::size_t length);

  const std::vector<Shot>& shots() const { return shots_; }
  std::size_t num_frames() const { return frames_; }
  std::size_t size() const { return shots_.size(); }
  std::size_t min_length() const;
  std::vector<std::size_t> lengths() const;

 private:
  std::vector<Shot> shots_;
  std::size_t frames_ = 0;
};

struct EvalResult {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::size_t selected_frames = 0;
  std::size_t budget = 0;
};

// Mean of x over each shot.
std::vector<double> frame_to_shot_scores(const std::vector<double>& x, const ShotSegmentation& seg);

/// Exact 0/1 knapsack over shots: maximizes total score subject to total
/// length <= capacity. Ties go to fewer frames, then to the lexicographically
/// smallest sorted index set. Shots scoring <= 0 are never chosen.
std::vector<std::size_t> knapsack_select(const std::vector<double>& scores,
                                         const std::vector<std::size_t>& lengths,
                                         std::size_t capacity);

// Frame budget floor(fraction * k).
std::size_t frame_budget(std::size_t k, double fraction);

struct KeyshotSelection {
  std::vector<std::uint8_t> frames;  // 0/1 per frame
  std::vector<std::size_t> shots;
  std::size_t budget = 0;
  bool degenerate = false;  // budget below the shortest shot
};

// Shot means of x -> knapsack at floor(fraction * k) frames -> frame mask.
KeyshotSelection select_keyshots(const std::vector<double>& x, const ShotSegmentation& seg,
                                 double fraction);

EvalResult f_measure(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt);

enum class Aggregation { mean, max };
Aggregation parse_aggregation(const std::string& s);
double aggregate_annotators(const std::vector<double>& per_user_f, Aggregation mode);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded partitions: each split shuffles the ids and holds out
/// round(test_fraction * n) of them. Requires at least `count` ids.
std::vector<Split> make_splits(const std::vector<std::string>& ids, std::uint64_t seed,
                               std::size_t count = 5, double test_fraction = 0.2);

struct SplitRun {
  std::vector<double> per_split_f;
  double mean_f = 0.0;
};

using TrainFn = std::function<void(const Split&, std::size_t split_index)>;
using EvalFn = std::function<double(const Split&, std::size_t split_index)>;

// Runs train_fn then eval_fn on each split and averages the returned F.
SplitRun run_splits(const std::vector<std::string>& ids, std::uint64_t seed, const TrainFn& train_fn,
                    const EvalFn& eval_fn, std::size_t count = 5);

}  // namespace cyclesum::eval
