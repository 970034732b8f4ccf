#include "ncl/ensemble.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ncl/checkpoint.hpp"
#include "ncl/errors.hpp"
#include "ncl/log.hpp"

namespace ncl {

Aggregator Aggregator::weighted(Vector w) {
  if (w.size() == 0) throw DimensionError("weighted aggregator needs at least one weight");
  Aggregator a;
  a.mode = Mode::weighted;
  a.weights = std::move(w);
  return a;
}

NclEnsemble make_ncl_ensemble(const TrunkSpec& trunk, int k, Index output_dim, double lambda,
                              Rng& rng) {
  if (k < 1) throw DimensionError("ensemble needs K >= 1 heads");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (trunk.feature_dim % k != 0)
    throw DimensionError("trunk feature dim " + std::to_string(trunk.feature_dim) +
                         " is not divisible by K = " + std::to_string(k));

  std::vector<LayerSpec> layers;
  Index dim = trunk.input_dim;
  for (Index h : trunk.hidden) {
    layers.push_back(LayerSpec::dense(dim, h));
    layers.push_back(LayerSpec::act(trunk.activation));
    dim = h;
  }
  layers.push_back(LayerSpec::dense(dim, trunk.feature_dim));
  layers.push_back(LayerSpec::act(trunk.activation));

  NclEnsemble model;
  model.trunk = make_network(std::move(layers), rng);
  model.lambda = lambda;
  const Index block = trunk.feature_dim / k;
  model.heads.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    model.heads.push_back(make_network({LayerSpec::dense(block, output_dim)}, rng));
  return model;
}

HeadOutputs apply_heads(const NclEnsemble& model, const Matrix& features) {
  if (features.cols() != model.feature_dim())
    throw DimensionError("apply_heads: feature matrix has " + std::to_string(features.cols()) +
                         " columns, trunk produces " + std::to_string(model.feature_dim()));
  const Index block = model.block_dim();
  HeadOutputs out;
  out.per_head.reserve(model.heads.size());
  for (std::size_t k = 0; k < model.heads.size(); ++k) {
    const Matrix slice = features.middleCols(static_cast<Index>(k) * block, block);
    out.per_head.push_back(forward(model.heads[k], slice).output());
  }
  out.mean = out.per_head[0];
  for (std::size_t k = 1; k < out.per_head.size(); ++k) out.mean += out.per_head[k];
  out.mean /= static_cast<double>(out.per_head.size());
  return out;
}

HeadOutputs ensemble_forward(const NclEnsemble& model, const Matrix& batch) {
  return apply_heads(model, forward(model.trunk, batch).output());
}

namespace {

void check_loss_inputs(const std::vector<Matrix>& per_head, const Matrix& targets,
                       double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("ncl_loss: lambda must be >= 0");
  if (per_head.empty()) throw DimensionError("ncl_loss: no head outputs");
  for (const Matrix& g : per_head)
    if (g.rows() != targets.rows() || g.cols() != targets.cols())
      throw DimensionError("ncl_loss: head output shape does not match targets");
}

Matrix head_mean(const std::vector<Matrix>& per_head) {
  Matrix mean = per_head[0];
  for (std::size_t k = 1; k < per_head.size(); ++k) mean += per_head[k];
  return mean / static_cast<double>(per_head.size());
}

}  // namespace

NclLossResult ncl_loss(const std::vector<Matrix>& per_head, const Matrix& targets, double lambda,
                       MeanGradient mean_grad) {
  check_loss_inputs(per_head, targets, lambda);
  const int k_count = static_cast<int>(per_head.size());
  const Index n = targets.rows();
  const Index o_dim = targets.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_k = 1.0 / static_cast<double>(k_count);
  const Matrix mean = head_mean(per_head);

  NclLossResult res;
  res.per_head_loss = Vector::Zero(k_count);
  res.head_gradients.assign(per_head.size(), Matrix::Zero(n, o_dim));

  for (int k = 0; k < k_count; ++k) {
    const Matrix& g = per_head[static_cast<std::size_t>(k)];
    double loss = 0.0;
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < o_dim; ++c) {
        const double resid = g(r, c) - targets(r, c);
        const double dev = g(r, c) - mean(r, c);
        loss += 0.5 * resid * resid - lambda * dev * dev;
        if (mean_grad == MeanGradient::full) {
          // d L_k / d G_k carries the (1 - 1/K) factor; the deviation also
          // leaks into every other head's output through the mean.
          res.head_gradients[static_cast<std::size_t>(k)](r, c) +=
              inv_n * (resid - 2.0 * lambda * dev * (1.0 - inv_k));
          for (int j = 0; j < k_count; ++j) {
            if (j == k) continue;
            res.head_gradients[static_cast<std::size_t>(j)](r, c) +=
                inv_n * (2.0 * lambda * dev * inv_k);
          }
        } else {
          res.head_gradients[static_cast<std::size_t>(k)](r, c) +=
              inv_n * (resid - 2.0 * lambda * dev);
        }
      }
    }
    res.per_head_loss(k) = loss * inv_n;
  }
  return res;
}

NclLossResult generalized_ncl_loss(const LossKind& kind, const std::vector<Matrix>& per_head,
                                   const Matrix& targets, double lambda,
                                   MeanGradient mean_grad) {
  check_loss_inputs(per_head, targets, lambda);
  const int k_count = static_cast<int>(per_head.size());
  const Index n = targets.rows();
  const Index o_dim = targets.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_k = 1.0 / static_cast<double>(k_count);
  const Matrix mean = head_mean(per_head);
  const bool robust_scaling = kind.tag == LossKind::Tag::tukey;

  NclLossResult res;
  res.per_head_loss = Vector::Zero(k_count);
  res.head_gradients.assign(per_head.size(), Matrix::Zero(n, o_dim));

  for (int k = 0; k < k_count; ++k) {
    const Matrix& g = per_head[static_cast<std::size_t>(k)];
    // Tukey works on MAD-scaled residuals, scaled per output dimension over
    // the batch. The scale is treated as a constant in the gradient.
    Matrix scaled_resid(n, o_dim);
    Vector col_scale = Vector::Ones(o_dim);
    for (Index c = 0; c < o_dim; ++c) {
      Vector col = g.col(c) - targets.col(c);
      if (robust_scaling) {
        const ScaledResiduals sr = mad_scale(col);
        scaled_resid.col(c) = sr.scaled;
        col_scale(c) = sr.scale_factor();
      } else {
        scaled_resid.col(c) = col;
      }
    }

    double loss = 0.0;
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < o_dim; ++c) {
        const PointwiseLoss pl = pointwise_loss(kind, scaled_resid(r, c));
        const double dev = g(r, c) - mean(r, c);
        loss += pl.value - lambda * dev * dev;
        const double acc_grad = pl.derivative * col_scale(c);
        if (mean_grad == MeanGradient::full) {
          res.head_gradients[static_cast<std::size_t>(k)](r, c) +=
              inv_n * (acc_grad - 2.0 * lambda * dev * (1.0 - inv_k));
          for (int j = 0; j < k_count; ++j) {
            if (j == k) continue;
            res.head_gradients[static_cast<std::size_t>(j)](r, c) +=
                inv_n * (2.0 * lambda * dev * inv_k);
          }
        } else {
          res.head_gradients[static_cast<std::size_t>(k)](r, c) +=
              inv_n * (acc_grad - 2.0 * lambda * dev);
        }
      }
    }
    res.per_head_loss(k) = loss * inv_n;
  }
  return res;
}

Matrix aggregate(const HeadOutputs& outputs, const Aggregator& agg) {
  if (outputs.per_head.empty()) throw DimensionError("aggregate: no head outputs");
  if (agg.mode == Aggregator::Mode::uniform) return outputs.mean;
  if (agg.weights.size() != static_cast<Index>(outputs.per_head.size()))
    throw DimensionError("aggregate: " + std::to_string(agg.weights.size()) + " weights for " +
                         std::to_string(outputs.per_head.size()) + " heads");
  Matrix out = agg.weights(0) * outputs.per_head[0];
  for (std::size_t k = 1; k < outputs.per_head.size(); ++k)
    out += agg.weights(static_cast<Index>(k)) * outputs.per_head[k];
  return out;
}

void validate_train_config(const TrainConfig& config) {
  if (config.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(config.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (!(config.lambda >= 0.0 && config.lambda < 1.0))
    throw std::invalid_argument("train: lambda must lie in [0, 1)");
  if (config.lambda < 1e-3 || config.lambda > 1e-2)
    log_warn("lambda = " + std::to_string(config.lambda) +
             " is outside the recommended [1e-3, 1e-2] band");
}

namespace {

double mean_pairwise_distance(const std::vector<Matrix>& per_head) {
  const std::size_t k = per_head.size();
  if (k < 2) return 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j, ++pairs)
      sum += std::sqrt((per_head[i] - per_head[j]).squaredNorm());
  return sum / static_cast<double>(pairs);
}

struct EnsembleGradients {
  Gradients trunk;
  std::vector<Gradients> heads;
};

/// Forward + loss + full backward over one batch. Shared by train() and
/// ensemble_grad_check so the checked gradient is the trained gradient.
EnsembleGradients ensemble_backward(const NclEnsemble& model, const Matrix& batch,
                                    const Matrix& targets, const LossKind& kind, double lambda,
                                    MeanGradient mean_grad, Vector* per_head_loss) {
  const ActivationTrace trunk_trace = forward(model.trunk, batch);
  const Matrix& features = trunk_trace.output();
  const Index block = model.block_dim();

  std::vector<ActivationTrace> head_traces;
  std::vector<Matrix> per_head;
  head_traces.reserve(model.heads.size());
  per_head.reserve(model.heads.size());
  for (std::size_t k = 0; k < model.heads.size(); ++k) {
    head_traces.push_back(
        forward(model.heads[k], features.middleCols(static_cast<Index>(k) * block, block)));
    per_head.push_back(head_traces.back().output());
  }

  const NclLossResult loss = generalized_ncl_loss(kind, per_head, targets, lambda, mean_grad);
  if (per_head_loss != nullptr) *per_head_loss = loss.per_head_loss;

  EnsembleGradients grads;
  grads.heads.reserve(model.heads.size());
  Matrix feature_grad = Matrix::Zero(features.rows(), features.cols());
  for (std::size_t k = 0; k < model.heads.size(); ++k) {
    Gradients hg = backward(model.heads[k], head_traces[k], loss.head_gradients[k]);
    feature_grad.middleCols(static_cast<Index>(k) * block, block) = hg.input;
    grads.heads.push_back(std::move(hg));
  }
  grads.trunk = backward(model.trunk, trunk_trace, feature_grad);
  return grads;
}

double total_generalized_loss(const NclEnsemble& model, const Matrix& batch,
                              const Matrix& targets, const LossKind& kind, double lambda) {
  const HeadOutputs out = ensemble_forward(model, batch);
  return generalized_ncl_loss(kind, out.per_head, targets, lambda).per_head_loss.sum();
}

}  // namespace

TrainLog train(NclEnsemble& model, const Dataset& dataset, const TrainConfig& config) {
  validate_train_config(config);
  if (dataset.size() == 0) throw DimensionError("train: dataset is empty");
  if (dataset.feature_dim() != model.input_dim())
    throw DimensionError("train: dataset feature dim " + std::to_string(dataset.feature_dim()) +
                         " does not match trunk input dim " +
                         std::to_string(model.input_dim()));
  if (dataset.target_dim() != model.output_dim())
    throw DimensionError("train: dataset target dim does not match head output dim");

  model.lambda = config.lambda;
  if (config.learn_aggregation && model.aggregator.mode != Aggregator::Mode::weighted)
    model.aggregator = Aggregator::weighted(
        Vector::Constant(model.group_count(), 1.0 / static_cast<double>(model.group_count())));

  OptimState trunk_state = make_optim_state(model.trunk);
  std::vector<OptimState> head_states;
  head_states.reserve(model.heads.size());
  for (const Network& head : model.heads) head_states.push_back(make_optim_state(head));

  Rng shuffle_rng(Rng(config.seed).fork_seed());
  const Index n = dataset.size();
  NclEnsemble last_finite = model;

  auto abort_diverged = [&](const std::string& why) -> void {
    if (!config.divergence_checkpoint_path.empty())
      save_ensemble_file(config.divergence_checkpoint_path, last_finite);
    throw DivergenceError("training diverged: " + why +
                          (config.divergence_checkpoint_path.empty()
                               ? ""
                               : "; last finite model checkpointed to " +
                                     config.divergence_checkpoint_path));
  };

  TrainLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<Index> order = shuffled_indices(n, shuffle_rng);
    double loss_sum = 0.0;
    int batch_count = 0;
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index size = std::min<Index>(config.batch_size, n - start);
      Matrix bx(size, dataset.feature_dim());
      Matrix by(size, dataset.target_dim());
      for (Index i = 0; i < size; ++i) {
        bx.row(i) = dataset.features.row(order[static_cast<std::size_t>(start + i)]);
        by.row(i) = dataset.targets.row(order[static_cast<std::size_t>(start + i)]);
      }

      Vector per_head_loss;
      EnsembleGradients grads;
      try {
        grads = ensemble_backward(model, bx, by, config.loss, config.lambda,
                                  config.mean_gradient, &per_head_loss);
      } catch (const DivergenceError& e) {
        abort_diverged(e.what());
      }
      if (!per_head_loss.allFinite())
        abort_diverged("non-finite loss at epoch " + std::to_string(epoch));

      try {
        sgd_step(model.trunk, grads.trunk, trunk_state, config.lr, config.momentum,
                 config.weight_decay);
        for (std::size_t k = 0; k < model.heads.size(); ++k)
          sgd_step(model.heads[k], grads.heads[k], head_states[k], config.lr, config.momentum,
                   config.weight_decay);
      } catch (const DivergenceError& e) {
        abort_diverged(e.what());
      }

      if (config.learn_aggregation) {
        // Plain gradient descent on 1/2 (sum_k w_k G_k - Y)^2, batch mean;
        // only the combination weights move, the NCL objective keeps
        // driving trunk and heads.
        const HeadOutputs out = ensemble_forward(model, bx);
        const Matrix combined = aggregate(out, model.aggregator);
        const Matrix err = combined - by;
        for (Index k = 0; k < model.aggregator.weights.size(); ++k) {
          const double gw =
              (err.array() * out.per_head[static_cast<std::size_t>(k)].array()).sum() /
              static_cast<double>(size);
          model.aggregator.weights(k) -= config.lr * gw;
        }
      }

      loss_sum += per_head_loss.mean();
      ++batch_count;
      last_finite = model;
    }

    const HeadOutputs full = ensemble_forward(model, dataset.features);
    TrainLogRow row;
    row.epoch = epoch;
    row.mean_head_loss = batch_count > 0 ? loss_sum / batch_count : 0.0;
    row.ensemble_mse = (full.mean - dataset.targets).squaredNorm() / static_cast<double>(n);
    row.diversity = mean_pairwise_distance(full.per_head);
    log.rows.push_back(row);
  }
  return log;
}

Matrix scalar_ncl_dynamics(const Vector& init, double target, double lambda, double gamma,
                           int iterations) {
  if (init.size() < 1) throw DimensionError("scalar dynamics: need at least one regressor");
  if (lambda < 0.0) throw std::invalid_argument("scalar dynamics: lambda must be >= 0");
  if (iterations < 0) throw std::invalid_argument("scalar dynamics: iterations must be >= 0");

  const Index k = init.size();
  Matrix traj(iterations + 1, k);
  traj.row(0) = init.transpose();
  Vector f = init;
  for (int it = 1; it <= iterations; ++it) {
    const double mean = f.mean();
    Vector next(k);
    for (Index i = 0; i < k; ++i) {
      const double grad = (f(i) - target) - 2.0 * lambda * (f(i) - mean);
      next(i) = f(i) - gamma * grad;
    }
    f = next;
    traj.row(it) = f.transpose();
  }
  return traj;
}

double ensemble_grad_check(const NclEnsemble& model, const Matrix& batch, const Matrix& targets,
                           const LossKind& kind, double lambda) {
  const EnsembleGradients analytic =
      ensemble_backward(model, batch, targets, kind, lambda, MeanGradient::full, nullptr);

  constexpr double eps = 1e-6;
  NclEnsemble probe = model;
  double max_err = 0.0;
  auto check_param = [&](double& param, double analytic_grad) {
    const double saved = param;
    param = saved + eps;
    const double lp = total_generalized_loss(probe, batch, targets, kind, lambda);
    param = saved - eps;
    const double lm = total_generalized_loss(probe, batch, targets, kind, lambda);
    param = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(analytic_grad) + std::abs(numeric));
    max_err = std::max(max_err, std::abs(analytic_grad - numeric) / denom);
  };

  auto sweep_network = [&](Network& net, const Gradients& grads) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      if (net.layers[i].kind != LayerKind::dense) continue;
      Matrix& w = net.weights[i];
      for (Index r = 0; r < w.rows(); ++r)
        for (Index c = 0; c < w.cols(); ++c) check_param(w(r, c), grads.weights[i](r, c));
      Vector& b = net.biases[i];
      for (Index c = 0; c < b.size(); ++c) check_param(b(c), grads.biases[i](c));
    }
  };

  sweep_network(probe.trunk, analytic.trunk);
  for (std::size_t k = 0; k < probe.heads.size(); ++k)
    sweep_network(probe.heads[k], analytic.heads[k]);
  return max_err;
}

}  // namespace ncl
