#pragma once

#include <cstdint>
#include <vector>

#include "mhqg/tensor.hpp"

namespace mhqg::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Works on a fixed parameter list; per-parameter
// first/second moment buffers live in the optimizer and can be serialized
// for checkpoints.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  // Applies one update from the gradients currently accumulated in the
  // parameters. Deterministic given parameter values, gradients and state.
  void step();

  void zero_grad();

  double lr() const { return config_.lr; }
  void set_lr(double lr);

  std::uint64_t steps_taken() const { return t_; }
  const std::vector<Parameter*>& params() const { return params_; }

  // Checkpoint access, index-aligned with params().
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void set_steps_taken(std::uint64_t t) { t_ = t; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t t_ = 0;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace mhqg::num
