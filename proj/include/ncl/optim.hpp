#pragma once

#include <cstdint>

#include "ncl/net.hpp"

namespace ncl {

/// Momentum buffers mirroring a network's parameters plus a step counter.
struct OptimState {
  std::vector<Matrix> weight_velocity;
  std::vector<Vector> bias_velocity;
  std::int64_t step = 0;
};

OptimState make_optim_state(const Network& net);

/// Classic SGD with momentum and coupled weight decay:
///   v     <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
/// Decay is added into the gradient (not decoupled), matching the classic
/// formulation. Applies to weights and biases alike. Throws DivergenceError
/// on non-finite gradients and bumps the network revision on success.
void sgd_step(Network& net, const Gradients& grads, OptimState& state, double lr, double momentum,
              double weight_decay);

}  // namespace ncl
