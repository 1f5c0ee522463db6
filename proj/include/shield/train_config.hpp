#pragma once

#include <cstdint>
#include <string>

#include "shield/common.hpp"
#include "shield/nn/adam.hpp"

namespace shield {

enum class Optimizer { adam };

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;

  void validate() const {
    require(epochs >= 0, "epochs must be >= 0");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(learning_rate > 0, "learning_rate must be > 0");
  }

  nn::AdamConfig adam() const { return {learning_rate, 0.9, 0.999, 1e-8}; }
};

}  // namespace shield
