#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/tensor.hpp"

namespace satlens::nn {

enum class OptimizerKind { adam, sgd };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  fail(ErrorKind::ConfigError, "unknown optimizer '" + s + "'");
}

/// Adam/SGD over a fixed parameter list. Moment buffers are laid out against
/// the parameter list given at construction.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double beta1, double beta2, double epsilon,
            std::vector<Tensor<float>*> params, std::vector<Tensor<float>*> grads)
      : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
        params_(std::move(params)), grads_(std::move(grads)) {
    require(lr_ > 0.0, ErrorKind::ConfigError, "learning rate must be positive");
    require(params_.size() == grads_.size(), ErrorKind::DimensionMismatch,
            "parameter/gradient list mismatch");
    if (kind_ == OptimizerKind::adam) {
      m_.resize(params_.size());
      v_.resize(params_.size());
      for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i]->numel(), 0.0);
        v_[i].assign(params_[i]->numel(), 0.0);
      }
    }
  }

  void step() {
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i]->data;
        const auto& g = grads_[i]->data;
        for (std::size_t j = 0; j < p.size(); ++j)
          p[j] -= static_cast<float>(lr_ * static_cast<double>(g[j]));
      }
      return;
    }
    ++t_;
    const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i]->data;
      const auto& g = grads_[i]->data;
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = static_cast<double>(g[j]);
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
        const double mhat = m[j] / bias1;
        const double vhat = v[j] / bias2;
        p[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + epsilon_));
      }
    }
  }

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, epsilon_;
  std::uint64_t t_ = 0;
  std::vector<Tensor<float>*> params_;
  std::vector<Tensor<float>*> grads_;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace satlens::nn
