#include "mhqg/tape.hpp"

#include "mhqg/common.hpp"

namespace mhqg::num {

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::emit(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.tape != this) throw Error("op inputs recorded on different tapes");
    n.parents.push_back(p.id);
    if (nodes_[p.id].needs_grad) n.needs_grad = true;
  }
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_acc(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) {
    throw Error("gradient not populated; was backward() run and the node reachable?");
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("loss recorded on a different tape");
  if (consumed_) throw Error("tape already consumed by a previous backward()");
  if (value(loss).size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + value(loss).shape_str());
  }
  consumed_ = true;

  grad_acc(loss.id).at(0) = 1.0;
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0) continue;  // unreachable from loss
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad.at(i) += n.grad.at(i);
    }
  }
}

}  // namespace mhqg::num
