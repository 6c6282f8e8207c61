#include "semi2i/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

#include "semi2i/errors.hpp"

namespace semi2i {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(std::span<const double>)> backward;
};

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : Tensor(shape, std::vector<double>(semi2i::numel(shape), fill), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (int d : shape) {
    if (d < 0) throw InvalidInput("negative tensor dimension in " + semi2i::to_string(shape));
  }
  if (values.size() != semi2i::numel(shape)) {
    throw InvalidInput("value count " + std::to_string(values.size()) + " does not match shape " +
                       semi2i::to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

const Shape& Tensor::shape() const {
  static const Shape kEmpty;
  return node_ ? node_->shape : kEmpty;
}

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw InvalidInput("axis out of range for shape " + semi2i::to_string(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) return {};
  return node_->value;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

double Tensor::item() const {
  if (numel() != 1) {
    throw InvalidInput("item() on tensor of shape " + semi2i::to_string(shape()));
  }
  return node_->value[0];
}

double Tensor::at(int n, int c, int h, int w) const {
  const Shape& s = shape();
  if (s.size() != 4) throw InvalidInput("at(n,c,h,w) requires a 4-d tensor");
  const std::size_t idx =
      ((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * static_cast<std::size_t>(s[3]) + w;
  return node_->value.at(idx);
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  return Tensor(node_->shape, node_->value, false);
}

Tensor Tensor::clone() const {
  if (!node_) return {};
  return Tensor(node_->shape, node_->value, node_->requires_grad);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(std::span<const double>)> backward_fn) {
  Tensor out(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  auto& node = *out.node_;
  node.requires_grad = true;
  node.parents.reserve(parents.size());
  for (const auto& p : parents) {
    if (p.requires_grad()) node.parents.push_back(p.node_ptr());
  }
  node.backward = std::move(backward_fn);
  return out;
}

std::span<double> accumulate_grad(const Tensor& t) {
  detail::Node* node = t.node();
  if (!node || !node->requires_grad) return {};
  if (node->grad.empty()) node->grad.assign(node->value.size(), 0.0);
  return node->grad;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw InvalidInput("backward() requires a single-element loss");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-call scratch; leaves keep accumulating.
  for (detail::Node* node : order) {
    if (node->backward) node->grad.assign(node->value.size(), 0.0);
  }
  if (!loss.node()->backward) {
    accumulate_grad(loss)[0] += 1.0;
    return;
  }
  loss.node()->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) {
      node->backward(node->grad);
    }
  }
  for (detail::Node* node : order) {
    if (node->backward) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

}  // namespace semi2i
