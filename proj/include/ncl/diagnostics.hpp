#pragma once

#include <cstdint>
#include <vector>

#include "ncl/types.hpp"

namespace ncl {

/// Empirical bias-variance-covariance split of an ensemble's squared error
/// over repeated training trials. Uses population (1/T) moments so that
/// bias_sq + variance + covariance == mse_of_mean holds as an exact
/// algebraic identity.
struct DecompositionReport {
  double bias_sq = 0.0;
  double variance = 0.0;
  double covariance = 0.0;
  double mse_of_mean = 0.0;
  int trials = 0;

  double residual() const { return mse_of_mean - (bias_sq + variance + covariance); }
};

/// predictions[t] holds trial t's K x N per-head prediction matrix; all
/// trials must share the same ensemble recipe. Per sample:
///   bias_sq    = ((1/K) sum_k (Ehat[G_k] - y))^2
///   variance   = (1/K^2) sum_k Varhat(G_k)
///   covariance = (1/K^2) sum_k sum_{j != k} Covhat(G_k, G_j)
///   mse        = Ehat[((1/K) sum_k G_k - y)^2]
/// with hat-moments over trials (divisor T), then averaged over samples.
/// Throws DimensionError when T < 2 (variance undefined) or on shape
/// mismatches.
DecompositionReport bvc_decompose(const std::vector<Matrix>& predictions, const Vector& targets);

/// Both sides of the ambiguity identity:
///   mean_n (Gbar - y)^2
///     == (1/K) sum_k mean_n (G_k - y)^2 - (1/K) sum_k mean_n (G_k - Gbar)^2.
struct AmbiguityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double ensemble_error = 0.0;    // lhs
  double mean_member_error = 0.0; // first rhs term
  double ambiguity = 0.0;         // second rhs term
};

AmbiguityResult ambiguity_identity(const Matrix& head_preds, const Vector& targets);

/// d(i, j) = Euclidean distance between head i's and head j's prediction
/// vectors. Symmetric, zero diagonal. Requires K >= 2.
Matrix pairwise_diversity(const Matrix& head_preds);

double mean_offdiagonal(const Matrix& distance);

/// Monte-Carlo estimate of the empirical Rademacher complexity of the
/// linear class {x -> w . phi(x) : ||w||_2 <= B}, where the supremum has
/// the closed form B * ||sum_i sigma_i phi(x_i)||_2:
///   value = E_sigma (2B/N) ||sum_i sigma_i phi(x_i)||_2.
/// mc_std is the standard error of the Monte-Carlo mean.
struct RademacherEstimate {
  double value = 0.0;
  double mc_std = 0.0;
  int trials = 0;
  // Class spec the estimate refers to.
  Index n = 0;
  Index feature_dim = 0;
  double bound = 0.0;
  int partition = 1;
};

RademacherEstimate rademacher_linear(const Matrix& features, double bound, int trials,
                                     std::uint64_t seed);

/// Compares the K-head averaged class on disjoint feature blocks against
/// the full class, sharing sigma draws per trial:
///   group value per draw = (2B/(NK)) sum_k ||sum_i sigma_i phi_k(x_i)||_2.
/// Per draw the ratio lies in [1/K, 1/sqrt(K)]; equality with 1/K needs all
/// feature mass in a single block.
struct GroupRatioResult {
  double ratio = 0.0;
  RademacherEstimate full;
  RademacherEstimate group;
  double ratio_std = 0.0;  // propagated Monte-Carlo error of the ratio
};

GroupRatioResult rademacher_group_ratio(const Matrix& features, int k, double bound, int trials,
                                        std::uint64_t seed);

struct RegressionMetrics {
  double mae = 0.0;
  double rmse = 0.0;
};

RegressionMetrics regression_metrics(const Vector& preds, const Vector& targets);

/// Mean accuracy A = 1 - mean |y - p| (targets expected in [0, 1]) and the
/// coefficient of determination R^2 = 1 - SS_res / SS_tot. Constant targets
/// leave R^2 undefined: r2_defined is false and r2 is NaN.
struct TraitMetrics {
  double a = 0.0;
  double r2 = 0.0;
  bool r2_defined = true;
};

TraitMetrics trait_metrics(const Vector& preds, const Vector& targets);

/// Cumulative score: percentage of samples with |pred - target| <= l
/// (boundary included).
double cumulative_score(const Vector& preds, const Vector& targets, double l);

}  // namespace ncl
