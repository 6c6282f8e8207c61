#pragma once

// Dense double-precision tensors with tape-free reverse-mode autodiff.
//
// A Tensor is a shared handle to a graph node. Operations in ops.hpp create
// new nodes that remember their parents and a backward closure; backward()
// walks the graph in reverse topological order. Leaves created with
// requires_grad=true (parameters, probe inputs) accumulate gradients across
// backward() calls until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace semi2i {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Mutable access is meant for leaves (parameters, inputs); mutating an
  /// interior node after it was consumed invalidates recorded gradients.
  std::span<double> mutable_values();

  bool requires_grad() const;
  bool has_grad() const;
  /// Gradient buffer; empty span if no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  double item() const;
  double at(int n, int c, int h, int w) const;

  /// New leaf holding a copy of the values; never requires grad.
  Tensor detach() const;
  /// Deep copy with the same requires_grad flag and no history.
  Tensor clone() const;

  bool is_same(const Tensor& other) const { return node_ == other.node_; }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(std::span<const double>)>);
};

/// Propagates d(loss)/d(node) to every reachable node that requires grad.
/// `loss` must hold exactly one element.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording for the lifetime of the guard (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. `backward_fn` receives d(loss)/d(result) and must
/// route it into the parents through accumulate_grad(). When recording is
/// off or no parent requires grad the closure is dropped.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(std::span<const double>)> backward_fn);

/// Gradient buffer of `t` to add into, or an empty span when `t` does not
/// require grad.
std::span<double> accumulate_grad(const Tensor& t);

}  // namespace semi2i
