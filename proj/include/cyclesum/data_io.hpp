#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cyclesum/eval_metrics.hpp"
#include "cyclesum/rng.hpp"
#include "cyclesum/tensor.hpp"

namespace cyclesum::data {

enum class DataErrorKind { missing_file, malformed, length_mismatch, bad_segments, unknown_id, overlap };
const char* to_string(DataErrorKind kind);

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorKind kind, const std::string& what);
  DataErrorKind kind() const { return kind_; }

 private:
  DataErrorKind kind_;
};

struct VideoRecord {
  std::string id;
  std::size_t k = 0;
  std::size_t d = 0;
  std::vector<double> features;  // row-major k x d
  // One entry per annotator, each k scores in [0, 1]. Empty when absent.
  std::vector<std::vector<double>> gt;
  std::optional<eval::ShotSegmentation> segments;
  std::optional<double> fps;

  // Throws DataError naming the id on any invariant violation.
  void validate() const;
  ad::Tensor features_tensor() const;
  // Stored segments, or uniform shots of ceil(k / 20) frames.
  eval::ShotSegmentation shots() const;
};

// `path` is a dataset directory holding dataset.json, or the manifest itself.
// An empty record list loads as an empty dataset and adds a warning.
std::vector<VideoRecord> load_dataset(const std::filesystem::path& path,
                                      std::vector<std::string>* warnings = nullptr);
// Writes dataset.json plus one <id>.f32 file per record into `dir`.
void save_dataset(const std::filesystem::path& dir, const std::vector<VideoRecord>& records);

struct SynthSpec {
  std::size_t n_videos = 20;
  std::size_t k = 96;
  std::size_t d = 32;
  std::size_t n_events = 6;
  double salience = 0.3;
  double noise = 0.1;
  // Salient centers are normalize(m + spread * r), m the normalized mean of
  // the video's non-salient centers and r a fresh random unit vector.
  double spread = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
};

// Number of salient events: max(1, floor(salience * n_events)).
std::size_t salient_event_count(const SynthSpec& spec);

/// Videos of n_events equal contiguous events (the last absorbs the
/// remainder). Every event has a distinct unit-norm center; frames are the
/// center plus N(0, noise^2) per coordinate, rounded to 32-bit floats. Salient
/// events carry gt 1, the rest 0. Shots subdivide each event into pieces of at
/// most ceil(k / 20) frames.
std::vector<VideoRecord> generate_synthetic(const SynthSpec& spec);

// Event index of every frame of a synthetic video (k / n_events layout).
std::vector<std::size_t> synthetic_event_of_frame(std::size_t k, std::size_t n_events);

void save_splits(const std::filesystem::path& path, const std::vector<eval::Split>& splits);
// Rejects overlapping train/test lists and, when `known_ids` is non-empty,
// ids outside it.
std::vector<eval::Split> load_splits(const std::filesystem::path& path,
                                     const std::vector<std::string>& known_ids = {});

// Reference keyshot masks per annotator: binary gt is used as is, graded gt
// goes through the knapsack at `fraction` over the record's shots.
std::vector<std::vector<std::uint8_t>> reference_summaries(const VideoRecord& record, double fraction);

struct VideoEval {
  std::string id;
  eval::EvalResult result;  // f_score aggregated over annotators; P and R likewise
};

VideoEval evaluate_scores(const VideoRecord& record, const std::vector<double>& x, double fraction,
                          eval::Aggregation aggregation);

// Mean aggregated F of uniform random frame scores over `draws` draws.
double random_baseline(const VideoRecord& record, double fraction, eval::Aggregation aggregation,
                       std::size_t draws, Rng& rng);

}  // namespace cyclesum::data
