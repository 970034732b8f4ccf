#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncl/data.hpp"
#include "ncl/losses.hpp"
#include "ncl/net.hpp"
#include "ncl/optim.hpp"

namespace ncl {

/// Output combiner. Uniform averaging is the canonical ensemble; weighted
/// mode learns one scalar weight per head during training.
struct Aggregator {
  enum class Mode { uniform, weighted };
  Mode mode = Mode::uniform;
  Vector weights;  // length K in weighted mode

  static Aggregator uniform() { return {}; }
  static Aggregator weighted(Vector w);
};

/// Whether the per-head loss treats the ensemble mean as a function of the
/// head outputs (full: d mean / d G_k = 1/K, with cross-head terms) or as a
/// constant. For uniform ensembles the summed head gradients coincide; the
/// switch exists so both derivations stay comparable.
enum class MeanGradient { full, constant };

/// Shared trunk + K linear heads on disjoint, contiguous trunk-feature
/// blocks, trained with the negative-correlation loss
///   L_k = 1/2 (G_k - Y)^2 - lambda (G_k - G_mean)^2.
/// lambda = 0 reduces exactly to training each head independently under L2.
struct NclEnsemble {
  Network trunk;               // output dim F, divisible by K
  std::vector<Network> heads;  // K single-dense networks, (F/K) -> O each
  double lambda = 5e-3;
  Aggregator aggregator = Aggregator::uniform();

  int group_count() const { return static_cast<int>(heads.size()); }
  Index feature_dim() const { return trunk.out_dim(); }
  Index block_dim() const { return feature_dim() / group_count(); }
  Index output_dim() const { return heads.empty() ? 0 : heads.front().out_dim(); }
  Index input_dim() const { return trunk.in_dim(); }
};

/// Architecture of the trunk: hidden widths, trunk feature dim F, and the
/// nonlinearity applied after every dense layer.
struct TrunkSpec {
  Index input_dim = 2;
  std::vector<Index> hidden;  // may be empty: trunk is a single dense layer
  Index feature_dim = 48;
  Activation activation = Activation::tanh;
};

/// Seeded construction. Throws DimensionError when feature_dim is not
/// divisible by K.
NclEnsemble make_ncl_ensemble(const TrunkSpec& trunk, int k, Index output_dim, double lambda,
                              Rng& rng);

struct HeadOutputs {
  std::vector<Matrix> per_head;  // K entries, N x O each
  Matrix mean;                   // N x O, arithmetic average over heads
};

/// Trunk forward + per-head forward. Head k reads only trunk feature
/// columns [k*F/K, (k+1)*F/K).
HeadOutputs ensemble_forward(const NclEnsemble& model, const Matrix& batch);

/// Head predictions from a precomputed trunk feature matrix (N x F).
HeadOutputs apply_heads(const NclEnsemble& model, const Matrix& features);

/// Per-head losses and the total gradient of sum_k L_k w.r.t. every head
/// output. Losses sum over output dims and average over the batch.
struct NclLossResult {
  Vector per_head_loss;               // length K
  std::vector<Matrix> head_gradients; // K entries, N x O
};

/// The negative-correlation loss of the ensemble (accuracy term 1/2 xi^2).
/// Rejects lambda < 0 and shape mismatches.
NclLossResult ncl_loss(const std::vector<Matrix>& per_head, const Matrix& targets, double lambda,
                       MeanGradient mean_grad = MeanGradient::full);

/// Same diversity term, accuracy term swapped for an arbitrary pointwise
/// loss. The Tukey path MAD-scales residuals per head and output dimension
/// first (recomputed per call, i.e. per mini-batch); degenerate MAD falls
/// back to unscaled residuals. kind = l2 reproduces ncl_loss exactly.
NclLossResult generalized_ncl_loss(const LossKind& kind, const std::vector<Matrix>& per_head,
                                   const Matrix& targets, double lambda,
                                   MeanGradient mean_grad = MeanGradient::full);

/// Combine head outputs: uniform -> mean, weighted -> sum_k w_k G_k.
Matrix aggregate(const HeadOutputs& outputs, const Aggregator& agg);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lambda = 5e-3;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::l2();
  MeanGradient mean_gradient = MeanGradient::full;
  bool learn_aggregation = false;  // train per-head combination weights
  /// When set, a divergence abort writes the last finite model here before
  /// throwing DivergenceError.
  std::string divergence_checkpoint_path;
};

/// One row per epoch: average per-head loss, full-train-set MSE of the
/// uniform ensemble, and mean pairwise distance between head predictions.
struct TrainLogRow {
  int epoch = 0;
  double mean_head_loss = 0.0;
  double ensemble_mse = 0.0;
  double diversity = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

/// Deterministic mini-batch training. Head gradients flow into the trunk
/// as the sum of all K backpropagated block gradients. Non-finite loss
/// aborts with DivergenceError after checkpointing the last finite state
/// (see TrainConfig::divergence_checkpoint_path).
TrainLog train(NclEnsemble& model, const Dataset& dataset, const TrainConfig& config);

/// Validate a TrainConfig: lambda must lie in [0, 1); values outside the
/// recommended [1e-3, 1e-2] band only log a warning.
void validate_train_config(const TrainConfig& config);

/// The scalar convergence toy: K scalar regressors f_i descend the NCL
/// objective against a constant target,
///   f_i <- f_i - gamma * [(f_i - y) - 2 lambda (f_i - f_mean)].
/// Returns an (iterations + 1) x K trajectory whose first row is `init`.
Matrix scalar_ncl_dynamics(const Vector& init, double target, double lambda, double gamma,
                           int iterations);

/// Finite-difference check of the full training gradient (trunk + heads)
/// under the generalized NCL loss; returns the max relative error.
double ensemble_grad_check(const NclEnsemble& model, const Matrix& batch, const Matrix& targets,
                           const LossKind& kind, double lambda);

}  // namespace ncl
