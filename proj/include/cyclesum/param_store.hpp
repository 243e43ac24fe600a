#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cyclesum/tensor.hpp"

namespace cyclesum::ad {

/// Named parameters of one network. Names are dot-delimited paths and
/// iteration is lexicographic, which fixes the order of every sweep over the
/// store (optimizer, clipping, gradient checks, checkpoints).
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  // Registers a new trainable leaf; duplicate names are rejected.
  Tensor& add(const std::string& name, Shape shape, std::vector<double> values);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const;
  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  void zero_grad();
  void set_requires_grad(bool on);

  std::optional<double> clip_bound() const { return clip_bound_; }
  void set_clip_bound(std::optional<double> c) { clip_bound_ = c; }

  // Deep copy: fresh leaves with copied values and no gradients.
  ParamStore clone() const;
  // Copies values from a store with the same names and shapes.
  void assign_values(const ParamStore& other);
  // Flattened values in iteration order.
  std::vector<double> flat_values() const;
  // max |value| over all entries.
  double max_abs() const;

 private:
  Map params_;
  std::optional<double> clip_bound_;
};

/// Elementwise clamp of every entry to [-c, c]; records c as the store bound.
void clip_params(ParamStore& params, double c);

/// Glorot-uniform samples in +-sqrt(6 / (fan_in + fan_out)) where the fans are
/// the last two extents (a vector has fan_out = 1).
std::vector<double> xavier_values(const Shape& shape, std::uint64_t seed);
Tensor xavier_init(const Shape& shape, std::uint64_t seed);

/// Checkpoint layout: `<prefix>.manifest` holds one tab-separated line per
/// parameter (name, comma-joined shape, dtype, byte offset); `<prefix>.bin`
/// holds the little-endian values back to back in manifest order.
void save_checkpoint(const ParamStore& params, const std::filesystem::path& prefix,
                     Precision dtype = Precision::f64);
// Loads into an existing store; names, shapes and count must match exactly.
void load_checkpoint(ParamStore& params, const std::filesystem::path& prefix);

}  // namespace cyclesum::ad
