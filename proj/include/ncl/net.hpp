#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ncl/rng.hpp"
#include "ncl/types.hpp"

namespace ncl {

enum class Activation { relu, tanh, identity };
enum class LayerKind { dense, activation };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Index in_dim = 0;   // dense only
  Index out_dim = 0;  // dense only
  Activation activation = Activation::identity;

  static LayerSpec dense(Index in, Index out);
  static LayerSpec act(Activation a);
};

/// Feedforward network: an ordered layer list plus per-layer parameters.
/// Dense layer l maps a batch X (N x in) to X * W + b with W of shape
/// in x out. `revision` increments on every parameter mutation so traces
/// can detect staleness.
///
/// All matrix kernels accumulate in a fixed, documented order (inner index
/// ascending, one batch row at a time), which makes forward bit-exactly
/// batch-decomposable and runs reproducible across platforms.
struct Network {
  std::vector<LayerSpec> layers;
  std::vector<Matrix> weights;  // per layer; empty unless dense
  std::vector<Vector> biases;   // per layer; empty unless dense
  std::uint64_t revision = 0;

  Index in_dim() const;
  Index out_dim() const;
  Index depth() const { return static_cast<Index>(layers.size()); }
  Index parameter_count() const;
};

/// Build a network with seeded initialization: weights and biases drawn
/// uniformly from [-a, a], a = sqrt(6 / (fan_in + fan_out)), weights in
/// row-major order first, then the bias. Throws DimensionError if the layer
/// list is empty, does not start with a dense layer, or has incompatible
/// consecutive dimensions.
Network make_network(std::vector<LayerSpec> layers, Rng& rng);

/// Everything forward() computed, kept for the exact backward pass.
struct ActivationTrace {
  const Network* net = nullptr;
  std::uint64_t revision = 0;
  Matrix input;                 // N x D
  std::vector<Matrix> outputs;  // one entry per layer

  const Matrix& output() const { return outputs.back(); }
};

/// Batched forward pass. Rejects batches whose feature dimension does not
/// match the first layer, reporting both shapes.
ActivationTrace forward(const Network& net, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weights;  // mirrors Network::weights
  std::vector<Vector> biases;
  Matrix input;  // d loss / d batch
};

/// Exact gradients of sum_{n,o} output(n,o) * output_grad(n,o) w.r.t. all
/// parameters and the input. The trace must come from forward() on this
/// same network with unchanged parameters; otherwise ContractError.
Gradients backward(const Network& net, const ActivationTrace& trace, const Matrix& output_grad);

Gradients zero_gradients(const Network& net);

/// Accumulate: dst += src (shapes must mirror the same network).
void add_gradients(Gradients& dst, const Gradients& src);

/// A differentiable functional of the network output, used by grad_check
/// and the training loop: value(Y) is the loss, gradient(Y) is dloss/dY.
struct LossOnOutput {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
};

/// Central finite-difference check of backward() through the given loss.
/// Perturbs every parameter by +/- 1e-6 and returns the maximum over
/// parameters of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const Network& net, const Matrix& batch, const LossOnOutput& loss);

const char* activation_name(Activation a);

}  // namespace ncl
