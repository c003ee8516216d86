#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mhqg/tensor.hpp"

namespace mhqg::num {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

// Reverse-mode autodiff tape. Operations append nodes during the forward
// pass; backward() walks the nodes once in reverse recording order (which is
// a reverse topological order, since an op can only consume earlier nodes)
// and accumulates gradients into every reachable Parameter.
//
// A tape and the Vars pointing into it are confined to one thread. A tape is
// consumed by a single backward() call.
class Tape {
 public:
  // Gradient rule of one node: read grad(self), accumulate into parents.
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Non-differentiable input value.
  Var constant(Tensor value);

  // Differentiable leaf bound to a Parameter; backward() accumulates into
  // the parameter's grad buffer.
  Var leaf(Parameter& p);

  // Record an operation node. Used by the op library.
  Var emit(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  // Backpropagate from a scalar loss. Errors if loss is not scalar or the
  // tape was already consumed.
  void backward(Var loss);

  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }

  // Gradient buffer of a node, allocated (zeros) on first access. Only
  // meaningful during/after backward().
  Tensor& grad_acc(std::uint32_t id);
  const Tensor& grad(Var v) const;

  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched by backward
    std::vector<std::uint32_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace mhqg::num
