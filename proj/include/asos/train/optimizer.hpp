#pragma once

#include <string>
#include <unordered_map>

#include "asos/nn/model.hpp"

namespace asos::train {

/// SGD with momentum and decoupled-onto-gradient weight decay:
/// g = grad + wd * w;  v = momentum * v + g;  w -= lr * v.
class Sgd {
 public:
  Sgd(float momentum, float weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(nn::Model& model, float lr) {
    model.visit_params([&](const std::string& name, nn::Param<float>& p) {
      Tensorf& v = velocity_[name];
      if (v.size() != p.value.size()) v = Tensorf(p.value.shape(), 0.0f);
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const float g = p.grad[i] + weight_decay_ * p.value[i];
        v[i] = momentum_ * v[i] + g;
        p.value[i] -= lr * v[i];
      }
    });
  }

 private:
  float momentum_, weight_decay_;
  std::unordered_map<std::string, Tensorf> velocity_;
};

}  // namespace asos::train
