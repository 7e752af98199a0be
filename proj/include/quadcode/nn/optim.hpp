#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "quadcode/nn/tensor.hpp"

namespace quadcode::nn {

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

inline void check_gradients(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (!p->frozen && !p->grad.all_finite()) {
      throw NonFiniteGradient("non-finite gradient in parameter " + p->name);
    }
  }
}

// SGD with classical momentum: v = momentum * v + g; w -= lr * v.
inline void sgd_step(std::span<Parameter* const> params, double lr, double momentum,
                     std::vector<Tensor>& velocity) {
  check_gradients(params);
  if (velocity.size() != params.size()) {
    velocity.clear();
    for (const Parameter* p : params) velocity.emplace_back(p->value.shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.frozen) {
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        velocity[i][j] = momentum * velocity[i][j] + p.grad[j];
        p.value[j] -= lr * velocity[i][j];
      }
    }
    p.zero_grad();
  }
}

class Sgd {
 public:
  Sgd(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}

  void step(std::span<Parameter* const> params) { sgd_step(params, lr_, momentum_, velocity_); }

 private:
  double lr_;
  double momentum_;
  std::vector<Tensor> velocity_;
};

// Adam with bias correction.
class Adam {
 public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(std::span<Parameter* const> params) {
    check_gradients(params);
    if (m_.size() != params.size()) {
      m_.clear();
      v_.clear();
      for (const Parameter* p : params) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      if (!p.frozen) {
        double* w = p.value.data();
        const double* g = p.grad.data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        for (std::size_t j = 0; j < p.value.size(); ++j) {
          m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
          v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
          w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + epsilon_);
        }
      }
      p.zero_grad();
    }
  }

  long steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace quadcode::nn
