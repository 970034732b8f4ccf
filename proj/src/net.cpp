#include "ncl/net.hpp"

#include <cmath>
#include <string>

#include "ncl/errors.hpp"

namespace ncl {

namespace {

std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

double activation_value(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

// Derivative expressed through the layer output. ReLU's subgradient at 0
// is 0, so `out > 0` is the whole story.
double activation_slope_from_output(Activation a, double out) {
  switch (a) {
    case Activation::relu: return out > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

LayerSpec LayerSpec::dense(Index in, Index out) {
  if (in <= 0 || out <= 0) throw DimensionError("dense layer dims must be positive");
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_dim = in;
  s.out_dim = out;
  return s;
}

LayerSpec LayerSpec::act(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  return s;
}

Index Network::in_dim() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::dense) return l.in_dim;
  return 0;
}

Index Network::out_dim() const {
  Index dim = in_dim();
  for (const auto& l : layers)
    if (l.kind == LayerKind::dense) dim = l.out_dim;
  return dim;
}

Index Network::parameter_count() const {
  Index n = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind != LayerKind::dense) continue;
    n += weights[i].size() + biases[i].size();
  }
  return n;
}

Network make_network(std::vector<LayerSpec> layers, Rng& rng) {
  if (layers.empty()) throw DimensionError("network needs at least one layer");
  if (layers.front().kind != LayerKind::dense)
    throw DimensionError("first layer must be dense so the input dimension is defined");

  Network net;
  net.layers = std::move(layers);
  net.weights.resize(net.layers.size());
  net.biases.resize(net.layers.size());

  Index dim = net.layers.front().in_dim;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::activation) continue;
    if (l.in_dim != dim)
      throw DimensionError("layer " + std::to_string(i) + " expects in_dim " +
                           std::to_string(l.in_dim) + " but previous layer produces " +
                           std::to_string(dim));
    const double a = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
    Matrix w(l.in_dim, l.out_dim);
    for (Index r = 0; r < l.in_dim; ++r)
      for (Index c = 0; c < l.out_dim; ++c) w(r, c) = rng.uniform(-a, a);
    Vector b(l.out_dim);
    for (Index c = 0; c < l.out_dim; ++c) b(c) = rng.uniform(-a, a);
    net.weights[i] = std::move(w);
    net.biases[i] = std::move(b);
    dim = l.out_dim;
  }
  return net;
}

namespace {

// Y = X * W + b, accumulated with the inner index ascending per row.
Matrix dense_forward(const Matrix& x, const Matrix& w, const Vector& b) {
  const Index n = x.rows();
  const Index out = w.cols();
  Matrix y(n, out);
  for (Index r = 0; r < n; ++r) {
    y.row(r) = b.transpose();
    for (Index j = 0; j < x.cols(); ++j) y.row(r) += x(r, j) * w.row(j);
  }
  return y;
}

}  // namespace

ActivationTrace forward(const Network& net, const Matrix& batch) {
  if (batch.cols() != net.in_dim())
    throw DimensionError("forward: batch shape " + shape_str(batch.rows(), batch.cols()) +
                         " incompatible with network input dim " + std::to_string(net.in_dim()));

  ActivationTrace trace;
  trace.net = &net;
  trace.revision = net.revision;
  trace.input = batch;
  trace.outputs.reserve(net.layers.size());

  const Matrix* cur = &trace.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::dense) {
      trace.outputs.push_back(dense_forward(*cur, net.weights[i], net.biases[i]));
    } else {
      Matrix y = *cur;
      for (Index r = 0; r < y.rows(); ++r)
        for (Index c = 0; c < y.cols(); ++c) y(r, c) = activation_value(l.activation, y(r, c));
      trace.outputs.push_back(std::move(y));
    }
    cur = &trace.outputs.back();
  }
  return trace;
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.weights.resize(net.layers.size());
  g.biases.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != LayerKind::dense) continue;
    g.weights[i] = Matrix::Zero(net.weights[i].rows(), net.weights[i].cols());
    g.biases[i] = Vector::Zero(net.biases[i].size());
  }
  return g;
}

void add_gradients(Gradients& dst, const Gradients& src) {
  if (dst.weights.size() != src.weights.size())
    throw DimensionError("add_gradients: mismatched layer counts");
  for (std::size_t i = 0; i < dst.weights.size(); ++i) {
    if (dst.weights[i].size() == 0) continue;
    dst.weights[i] += src.weights[i];
    dst.biases[i] += src.biases[i];
  }
}

Gradients backward(const Network& net, const ActivationTrace& trace, const Matrix& output_grad) {
  if (trace.net != &net || trace.revision != net.revision)
    throw ContractError("backward: trace is stale (network parameters changed since forward)");
  if (trace.outputs.empty()) throw ContractError("backward: empty trace");
  const Matrix& out = trace.output();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
    throw DimensionError("backward: output_grad shape " +
                         shape_str(output_grad.rows(), output_grad.cols()) +
                         " does not match output " + shape_str(out.rows(), out.cols()));

  Gradients grads = zero_gradients(net);
  Matrix g = output_grad;
  for (std::size_t ii = net.layers.size(); ii-- > 0;) {
    const LayerSpec& l = net.layers[ii];
    const Matrix& x_in = ii == 0 ? trace.input : trace.outputs[ii - 1];
    if (l.kind == LayerKind::dense) {
      const Matrix& w = net.weights[ii];
      Matrix& dw = grads.weights[ii];
      Vector& db = grads.biases[ii];
      for (Index r = 0; r < g.rows(); ++r) {
        db += g.row(r).transpose();
        for (Index j = 0; j < x_in.cols(); ++j) dw.row(j) += x_in(r, j) * g.row(r);
      }
      // Propagate through W: g_next = g * W^T, via a contiguous copy of W^T.
      const Matrix wt = w.transpose();
      Matrix g_next = Matrix::Zero(g.rows(), w.rows());
      for (Index r = 0; r < g.rows(); ++r)
        for (Index o = 0; o < g.cols(); ++o) g_next.row(r) += g(r, o) * wt.row(o);
      g = std::move(g_next);
    } else {
      const Matrix& y = trace.outputs[ii];
      for (Index r = 0; r < g.rows(); ++r)
        for (Index c = 0; c < g.cols(); ++c)
          g(r, c) *= activation_slope_from_output(l.activation, y(r, c));
    }
  }
  grads.input = std::move(g);
  return grads;
}

double grad_check(const Network& net, const Matrix& batch, const LossOnOutput& loss) {
  const ActivationTrace trace = forward(net, batch);
  const Matrix out_grad = loss.gradient(trace.output());
  const Gradients analytic = backward(net, trace, out_grad);

  constexpr double eps = 1e-6;
  Network probe = net;
  double max_err = 0.0;
  auto check_param = [&](double& param, double analytic_grad) {
    const double saved = param;
    param = saved + eps;
    const double lp = loss.value(forward(probe, batch).output());
    param = saved - eps;
    const double lm = loss.value(forward(probe, batch).output());
    param = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(analytic_grad) + std::abs(numeric));
    max_err = std::max(max_err, std::abs(analytic_grad - numeric) / denom);
  };

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != LayerKind::dense) continue;
    Matrix& w = probe.weights[i];
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) check_param(w(r, c), analytic.weights[i](r, c));
    Vector& b = probe.biases[i];
    for (Index c = 0; c < b.size(); ++c) check_param(b(c), analytic.biases[i](c));
  }
  return max_err;
}

}  // namespace ncl
