#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "trgan/nn/tensor.hpp"

namespace trgan::nn {

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in a dynamically recorded computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  /// Adds `g` into grad, allocating on first use.
  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

/// Leaf that never receives gradients.
Var constant(Tensor value);
/// Leaf that accumulates gradients (a trainable parameter).
Var leaf(Tensor value, bool requires_grad = true);
Var detach(const Var& v);

/// True when new ops record backward closures (see NoGradGuard).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates the result node of an op. The closure is dropped when no parent
/// requires gradients or gradient recording is off.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Reverse sweep from a scalar root (seeded with d root = 1).
void backward(const Var& root);

}  // namespace trgan::nn
