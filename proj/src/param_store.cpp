#include "cyclesum/param_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cyclesum/rng.hpp"

namespace cyclesum::ad {

Tensor& ParamStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  auto [it, _] = params_.emplace(name, Tensor::parameter(std::move(shape), std::move(values)));
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

void ParamStore::set_requires_grad(bool on) {
  for (auto& [_, t] : params_) t.set_requires_grad(on);
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : params_) {
    out.add(name, t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
    out.get(name).set_requires_grad(t.requires_grad());
  }
  out.clip_bound_ = clip_bound_;
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.size() != size()) throw std::invalid_argument("assign_values: parameter count mismatch");
  for (auto& [name, t] : params_) {
    const Tensor& src = other.get(name);
    if (src.shape() != t.shape()) {
      throw ShapeError("assign_values: '" + name + "' has shape " + shape_string(t.shape()) +
                       " vs " + shape_string(src.shape()));
    }
    std::ranges::copy(src.values(), t.mutable_values().begin());
  }
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(num_values());
  for (const auto& [_, t] : params_) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

double ParamStore::max_abs() const {
  double m = 0.0;
  for (const auto& [_, t] : params_)
    for (double v : t.values()) m = std::max(m, std::fabs(v));
  return m;
}

void clip_params(ParamStore& params, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip bound must be positive");
  for (auto& [_, t] : params) {
    for (double& v : t.mutable_values()) v = std::clamp(v, -c, c);
  }
  params.set_clip_bound(c);
}

std::vector<double> xavier_values(const Shape& shape, std::uint64_t seed) {
  const std::size_t n = shape_size(shape);
  const double fan_in = static_cast<double>(shape.size() == 1 ? shape[0] : shape[shape.size() - 2]);
  const double fan_out = static_cast<double>(shape.size() == 1 ? 1 : shape.back());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = rng.uniform(-bound, bound);
  return out;
}

Tensor xavier_init(const Shape& shape, std::uint64_t seed) {
  return Tensor::parameter(shape, xavier_values(shape, seed));
}

namespace {

template <class T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(const unsigned char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
  return std::filesystem::path(prefix.string() + suffix);
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::filesystem::path& prefix,
                     Precision dtype) {
  std::ofstream manifest(with_suffix(prefix, ".manifest"));
  std::ofstream bin(with_suffix(prefix, ".bin"), std::ios::binary);
  if (!manifest || !bin) throw std::runtime_error("cannot write checkpoint at " + prefix.string());
  const std::size_t width = dtype == Precision::f64 ? 8 : 4;
  std::size_t offset = 0;
  for (const auto& [name, t] : params) {
    manifest << name << '\t';
    for (std::size_t i = 0; i < t.shape().size(); ++i) manifest << (i ? "," : "") << t.shape()[i];
    manifest << '\t' << (dtype == Precision::f64 ? "f64" : "f32") << '\t' << offset << '\n';
    for (double v : t.values()) {
      if (dtype == Precision::f64) {
        write_le<double>(bin, v);
      } else {
        write_le<float>(bin, static_cast<float>(v));
      }
    }
    offset += t.size() * width;
  }
  if (!manifest || !bin) throw std::runtime_error("failed writing checkpoint at " + prefix.string());
}

void load_checkpoint(ParamStore& params, const std::filesystem::path& prefix) {
  std::ifstream manifest(with_suffix(prefix, ".manifest"));
  std::ifstream bin(with_suffix(prefix, ".bin"), std::ios::binary);
  if (!manifest || !bin) throw std::runtime_error("cannot open checkpoint at " + prefix.string());
  std::vector<unsigned char> buffer((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  std::string line;
  std::size_t seen = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, shape_text, dtype;
    std::size_t offset = 0;
    if (!std::getline(ls, name, '\t') || !std::getline(ls, shape_text, '\t') ||
        !std::getline(ls, dtype, '\t') || !(ls >> offset)) {
      throw std::runtime_error("malformed manifest line: " + line);
    }
    Shape shape;
    std::istringstream ss(shape_text);
    std::string extent;
    while (std::getline(ss, extent, ',')) shape.push_back(std::stoul(extent));
    if (!params.contains(name)) throw std::runtime_error("checkpoint parameter '" + name + "' not in model");
    Tensor& t = params.get(name);
    if (t.shape() != shape) {
      throw ShapeError("checkpoint parameter '" + name + "' has shape " + shape_string(shape) +
                       ", model expects " + shape_string(t.shape()));
    }
    const std::size_t width = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    if (width == 0) throw std::runtime_error("unknown dtype '" + dtype + "' for " + name);
    if (offset + t.size() * width > buffer.size()) {
      throw std::runtime_error("checkpoint buffer too short for '" + name + "'");
    }
    auto dst = t.mutable_values();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const unsigned char* p = buffer.data() + offset + i * width;
      dst[i] = width == 8 ? read_le<double>(p) : static_cast<double>(read_le<float>(p));
    }
    ++seen;
  }
  if (seen != params.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(seen) + " parameters, model has " +
                             std::to_string(params.size()));
  }
}

}  // namespace cyclesum::ad
