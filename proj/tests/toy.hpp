#pragma once

#include "cyclesum/model.hpp"

namespace cyclesum::test {

// The small instance used by gradient checks: k=4, d=3, h=4, z=2.
inline ModelDims toy_dims() {
  ModelDims d;
  d.feature_dim = 3;
  d.hidden = 4;
  d.z_dim = 2;
  return d;
}

inline ad::Tensor toy_video(std::size_t k, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(k * d);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return ad::Tensor::constant({k, d}, v);
}

}  // namespace cyclesum::test
