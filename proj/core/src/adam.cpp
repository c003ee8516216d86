#include "mhqg/adam.hpp"

#include <cmath>

#include "mhqg/common.hpp"

namespace mhqg::num {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (config_.lr <= 0.0) throw ConfigError("adam: learning rate must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Tensor::zeros(p->value.shape()));
    v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::set_lr(double lr) {
  if (lr <= 0.0) throw ConfigError("adam: learning rate must be positive");
  config_.lr = lr;
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.grad.shape() != m_[k].shape()) {
      throw ShapeError("adam: state shape " + m_[k].shape_str() + " does not match gradient " +
                       p.grad.shape_str());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.at(i);
      m_[k].at(i) = config_.beta1 * m_[k].at(i) + (1.0 - config_.beta1) * g;
      v_[k].at(i) = config_.beta2 * v_[k].at(i) + (1.0 - config_.beta2) * g * g;
      const double mhat = m_[k].at(i) / bc1;
      const double vhat = v_[k].at(i) / bc2;
      p.value.at(i) -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad.at(i) * p->grad.at(i);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad.at(i) *= s;
    }
  }
  return norm;
}

}  // namespace mhqg::num
