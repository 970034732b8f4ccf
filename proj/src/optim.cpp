#include "ncl/optim.hpp"

#include <stdexcept>
#include <string>

#include "ncl/errors.hpp"

namespace ncl {

OptimState make_optim_state(const Network& net) {
  OptimState state;
  state.weight_velocity.resize(net.layers.size());
  state.bias_velocity.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != LayerKind::dense) continue;
    state.weight_velocity[i] = Matrix::Zero(net.weights[i].rows(), net.weights[i].cols());
    state.bias_velocity[i] = Vector::Zero(net.biases[i].size());
  }
  return state;
}

void sgd_step(Network& net, const Gradients& grads, OptimState& state, double lr, double momentum,
              double weight_decay) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be > 0");
  if (grads.weights.size() != net.layers.size() ||
      state.weight_velocity.size() != net.layers.size())
    throw DimensionError("sgd_step: gradient/state layer count mismatch");

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != LayerKind::dense) continue;
    const Matrix& gw = grads.weights[i];
    const Vector& gb = grads.biases[i];
    if (gw.rows() != net.weights[i].rows() || gw.cols() != net.weights[i].cols() ||
        gb.size() != net.biases[i].size())
      throw DimensionError("sgd_step: gradient shape mismatch at layer " + std::to_string(i));
    if (!gw.allFinite() || !gb.allFinite())
      throw DivergenceError("sgd_step: non-finite gradient at layer " + std::to_string(i) +
                            " (step " + std::to_string(state.step) + ")");
  }

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != LayerKind::dense) continue;
    Matrix& vw = state.weight_velocity[i];
    vw = momentum * vw + grads.weights[i] + weight_decay * net.weights[i];
    net.weights[i] -= lr * vw;
    Vector& vb = state.bias_velocity[i];
    vb = momentum * vb + grads.biases[i] + weight_decay * net.biases[i];
    net.biases[i] -= lr * vb;
  }
  ++state.step;
  ++net.revision;
}

}  // namespace ncl
