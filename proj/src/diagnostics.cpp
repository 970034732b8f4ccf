#include "ncl/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ncl/errors.hpp"
#include "ncl/rng.hpp"

namespace ncl {

DecompositionReport bvc_decompose(const std::vector<Matrix>& predictions, const Vector& targets) {
  const int t_count = static_cast<int>(predictions.size());
  if (t_count < 2)
    throw DimensionError("bvc_decompose: need >= 2 trials, got " + std::to_string(t_count) +
                         " (variance undefined)");
  const Index k = predictions[0].rows();
  const Index n = predictions[0].cols();
  if (n != targets.size())
    throw DimensionError("bvc_decompose: predictions have " + std::to_string(n) +
                         " samples, targets " + std::to_string(targets.size()));
  for (const Matrix& p : predictions)
    if (p.rows() != k || p.cols() != n)
      throw DimensionError("bvc_decompose: inconsistent prediction shapes across trials");

  const double inv_t = 1.0 / static_cast<double>(t_count);
  const double inv_k = 1.0 / static_cast<double>(k);

  DecompositionReport report;
  report.trials = t_count;
  for (Index s = 0; s < n; ++s) {
    // Per-head trial means.
    Vector head_mean = Vector::Zero(k);
    for (const Matrix& p : predictions) head_mean += p.col(s);
    head_mean *= inv_t;

    double bias = 0.0;
    for (Index h = 0; h < k; ++h) bias += head_mean(h) - targets(s);
    bias *= inv_k;
    report.bias_sq += bias * bias;

    double var = 0.0, cov = 0.0;
    for (Index h = 0; h < k; ++h) {
      for (Index j = 0; j < k; ++j) {
        double acc = 0.0;
        for (const Matrix& p : predictions)
          acc += (p(h, s) - head_mean(h)) * (p(j, s) - head_mean(j));
        acc *= inv_t;
        if (h == j)
          var += acc;
        else
          cov += acc;
      }
    }
    report.variance += var * inv_k * inv_k;
    report.covariance += cov * inv_k * inv_k;

    double mse = 0.0;
    for (const Matrix& p : predictions) {
      const double mean_pred = p.col(s).mean();
      mse += (mean_pred - targets(s)) * (mean_pred - targets(s));
    }
    report.mse_of_mean += mse * inv_t;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  report.bias_sq *= inv_n;
  report.variance *= inv_n;
  report.covariance *= inv_n;
  report.mse_of_mean *= inv_n;
  return report;
}

AmbiguityResult ambiguity_identity(const Matrix& head_preds, const Vector& targets) {
  const Index k = head_preds.rows();
  const Index n = head_preds.cols();
  if (k < 1) throw DimensionError("ambiguity_identity: need K >= 1 heads");
  if (n != targets.size())
    throw DimensionError("ambiguity_identity: predictions/targets length mismatch");

  const Vector mean = head_preds.colwise().mean().transpose();

  AmbiguityResult res;
  res.lhs = (mean - targets).squaredNorm() / static_cast<double>(n);
  double member_err = 0.0, ambiguity = 0.0;
  for (Index h = 0; h < k; ++h) {
    member_err += (head_preds.row(h).transpose() - targets).squaredNorm();
    ambiguity += (head_preds.row(h).transpose() - mean).squaredNorm();
  }
  member_err /= static_cast<double>(k * n);
  ambiguity /= static_cast<double>(k * n);
  res.mean_member_error = member_err;
  res.ambiguity = ambiguity;
  res.ensemble_error = res.lhs;
  res.rhs = member_err - ambiguity;
  return res;
}

Matrix pairwise_diversity(const Matrix& head_preds) {
  const Index k = head_preds.rows();
  if (k < 2) throw DimensionError("pairwise_diversity: need K >= 2 heads");
  Matrix d = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = i + 1; j < k; ++j) {
      const double dist = (head_preds.row(i) - head_preds.row(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  return d;
}

double mean_offdiagonal(const Matrix& distance) {
  const Index k = distance.rows();
  if (k < 2) return 0.0;
  double sum = 0.0;
  for (Index i = 0; i < k; ++i)
    for (Index j = i + 1; j < k; ++j) sum += distance(i, j);
  return sum / (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
}

namespace {

struct McAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return count > 0 ? sum / count : 0.0; }
  /// Standard error of the mean (sample variance, zero for a single draw).
  double std_error() const {
    if (count < 2) return 0.0;
    const double m = mean();
    double var = (sum_sq - static_cast<double>(count) * m * m) / (count - 1);
    if (var < 0.0) var = 0.0;
    return std::sqrt(var / count);
  }
};

}  // namespace

RademacherEstimate rademacher_linear(const Matrix& features, double bound, int trials,
                                     std::uint64_t seed) {
  if (!(bound > 0.0)) throw std::invalid_argument("rademacher: bound must be > 0");
  if (trials < 1) throw std::invalid_argument("rademacher: trials must be >= 1");
  if (features.rows() < 1) throw DimensionError("rademacher: need at least one sample");

  const Index n = features.rows();
  // One derived seed per trial; reduction order is fixed (trial-ascending).
  Rng seeder(seed);
  McAccumulator acc;
  for (int t = 0; t < trials; ++t) {
    Rng trial_rng(seeder.fork_seed());
    Vector s = Vector::Zero(features.cols());
    for (Index i = 0; i < n; ++i) {
      const double sigma = (trial_rng.next_u64() & 1u) != 0 ? 1.0 : -1.0;
      s += sigma * features.row(i).transpose();
    }
    acc.add(2.0 * bound / static_cast<double>(n) * s.norm());
  }

  RademacherEstimate est;
  est.value = acc.mean();
  est.mc_std = acc.std_error();
  est.trials = trials;
  est.n = n;
  est.feature_dim = features.cols();
  est.bound = bound;
  est.partition = 1;
  return est;
}

GroupRatioResult rademacher_group_ratio(const Matrix& features, int k, double bound, int trials,
                                        std::uint64_t seed) {
  if (!(bound > 0.0)) throw std::invalid_argument("rademacher: bound must be > 0");
  if (trials < 1) throw std::invalid_argument("rademacher: trials must be >= 1");
  if (k < 1) throw std::invalid_argument("rademacher: K must be >= 1");
  if (features.cols() % k != 0)
    throw DimensionError("rademacher: feature dim " + std::to_string(features.cols()) +
                         " not divisible by K = " + std::to_string(k));

  const Index n = features.rows();
  const Index block = features.cols() / k;
  Rng seeder(seed);
  McAccumulator full_acc, group_acc, ratio_acc;
  for (int t = 0; t < trials; ++t) {
    // The same sigma draw serves both classes, which pins the per-draw
    // ratio inside [1/K, 1/sqrt(K)] exactly.
    Rng trial_rng(seeder.fork_seed());
    Vector s = Vector::Zero(features.cols());
    for (Index i = 0; i < n; ++i) {
      const double sigma = (trial_rng.next_u64() & 1u) != 0 ? 1.0 : -1.0;
      s += sigma * features.row(i).transpose();
    }
    const double full_draw = 2.0 * bound / static_cast<double>(n) * s.norm();
    double block_norm_sum = 0.0;
    for (int b = 0; b < k; ++b) block_norm_sum += s.segment(b * block, block).norm();
    const double group_draw =
        2.0 * bound / (static_cast<double>(n) * static_cast<double>(k)) * block_norm_sum;
    full_acc.add(full_draw);
    group_acc.add(group_draw);
    if (full_draw > 0.0) ratio_acc.add(group_draw / full_draw);
  }

  GroupRatioResult res;
  res.full.value = full_acc.mean();
  res.full.mc_std = full_acc.std_error();
  res.full.trials = trials;
  res.full.n = n;
  res.full.feature_dim = features.cols();
  res.full.bound = bound;
  res.full.partition = 1;

  res.group = res.full;
  res.group.value = group_acc.mean();
  res.group.mc_std = group_acc.std_error();
  res.group.partition = k;

  res.ratio = res.full.value > 0.0 ? res.group.value / res.full.value : 0.0;
  res.ratio_std = ratio_acc.std_error();
  return res;
}

RegressionMetrics regression_metrics(const Vector& preds, const Vector& targets) {
  if (preds.size() != targets.size() || preds.size() == 0)
    throw DimensionError("regression_metrics: length mismatch or empty input");
  const Vector err = preds - targets;
  RegressionMetrics m;
  m.mae = err.array().abs().mean();
  m.rmse = std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
  return m;
}

TraitMetrics trait_metrics(const Vector& preds, const Vector& targets) {
  if (preds.size() != targets.size() || preds.size() == 0)
    throw DimensionError("trait_metrics: length mismatch or empty input");
  TraitMetrics m;
  m.a = 1.0 - (targets - preds).array().abs().mean();
  const double target_mean = targets.mean();
  const double ss_tot = (targets.array() - target_mean).matrix().squaredNorm();
  const double ss_res = (targets - preds).squaredNorm();
  if (ss_tot < 1e-300) {
    m.r2_defined = false;
    m.r2 = std::numeric_limits<double>::quiet_NaN();
  } else {
    m.r2 = 1.0 - ss_res / ss_tot;
  }
  return m;
}

double cumulative_score(const Vector& preds, const Vector& targets, double l) {
  if (preds.size() != targets.size() || preds.size() == 0)
    throw DimensionError("cumulative_score: length mismatch or empty input");
  Index within = 0;
  for (Index i = 0; i < preds.size(); ++i)
    if (std::abs(preds(i) - targets(i)) <= l) ++within;
  return 100.0 * static_cast<double>(within) / static_cast<double>(preds.size());
}

}  // namespace ncl
