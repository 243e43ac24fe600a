#include "cyclesum/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

namespace cyclesum::ad {

namespace {

std::atomic<std::uint64_t> next_id{1};
thread_local Precision tls_precision = Precision::f64;

std::shared_ptr<Node> new_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  if (values.size() != n) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " needs " + std::to_string(n) +
                     " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value.assign(values.begin(), values.end());
  node->requires_grad = requires_grad;
  node->leaf = true;
  node->id = next_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) throw ShapeError("shape must have at least one extent");
  std::size_t n = 1;
  for (auto e : shape) {
    if (e == 0) throw ShapeError("shape " + shape_string(shape) + " has a zero extent");
    n *= e;
  }
  return n;
}

Precision current_precision() { return tls_precision; }

PrecisionScope::PrecisionScope(Precision p) : saved_(tls_precision) { tls_precision = p; }
PrecisionScope::~PrecisionScope() { tls_precision = saved_; }

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(new_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::constant(Shape shape, double fill) {
  const std::size_t n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, fill));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(new_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::scalar(double v) { return constant({1}, std::vector<double>{v}); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  return s.size() == 1 ? 1 : s[s.size() - 2];
}

std::size_t Tensor::cols() const { return node_->shape.back(); }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() {
  if (!node_->leaf) throw std::logic_error("only leaf tensors can be modified in place");
  return node_->value;
}

double Tensor::item() const {
  if (node_->value.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(node_->shape));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) throw std::logic_error("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
}

bool Tensor::is_leaf() const { return node_->leaf; }
bool Tensor::has_grad() const { return node_->grad.size() == node_->value.size(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

std::uint64_t Tensor::id() const { return node_->id; }

Tensor make_node(Shape shape, Buffer value, std::vector<Tensor> parents,
                 std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  if (tls_precision == Precision::f32) {
    for (auto& v : value) v = static_cast<double>(static_cast<float>(v));
  }
  node->value = std::move(value);
  node->leaf = false;
  node->id = next_id.fetch_add(1, std::memory_order_relaxed);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  node->requires_grad = any;
  if (any) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1) {
    throw ShapeError("backward needs a scalar root, got shape " +
                     (root.defined() ? shape_string(root.shape()) : std::string("<undefined>")));
  }
  Node* start = root.node();
  if (!start->requires_grad) return;

  // Iterative post-order DFS; each reachable node appears exactly once.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(start, 0);
  visited.insert(start);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->leaf) {
      n->ensure_grad();
    } else {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  start->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf && n->backward) n->backward(*n);
  }
}

}  // namespace cyclesum::ad
