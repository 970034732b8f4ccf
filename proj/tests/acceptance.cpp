// Acceptance suite: one pass/fail line per criterion, exit code 0 only if
// every criterion holds. Tolerances are pinned in the checks themselves.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ncl/cli/commands.hpp"
#include "ncl/cli/config.hpp"
#include "ncl/diagnostics.hpp"
#include "ncl/ensemble.hpp"
#include "ncl/losses.hpp"
#include "ncl/net.hpp"
#include "ncl/rng.hpp"

using namespace ncl;
using ncl::cli::DynamicsResult;
using ncl::cli::ResolvedConfig;
using ncl::cli::SurfaceParams;
using ncl::test::random_matrix;
using ncl::test::random_vector;
using ncl::test::read_file;
using ncl::test::TempDir;

namespace {

struct Harness {
  int failures = 0;

  void run(int number, const std::string& name, double budget_seconds,
           const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > budget_seconds) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string("over time budget");
    }
    std::printf("[%s] criterion %d: %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                elapsed, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

bool check(bool cond, const std::string& what, std::string& detail) {
  if (!cond && detail.size() < 500) detail += (detail.empty() ? "" : "; ") + what;
  return cond;
}

// --------------------------------------------------------------------------
// 1. Algebraic identities

bool criterion_identities(std::string& detail) {
  bool ok = true;
  Rng rng(101);
  for (int rep = 0; rep < 1000; ++rep) {
    const Index k = 1 + static_cast<Index>(rng.below(16));
    const Index n = 1 + static_cast<Index>(rng.below(1000));
    const Matrix preds = random_matrix(k, n, rng, -5.0, 5.0);
    const Vector y = random_vector(n, rng, -5.0, 5.0);
    const AmbiguityResult r = ambiguity_identity(preds, y);
    ok &= check(std::abs(r.lhs - r.rhs) < 1e-10, "ambiguity identity broke", detail);
    if (!ok) break;
  }

  Rng rng2(102);
  for (int rep = 0; rep < 1000 && ok; ++rep) {
    const int t_count = 2 + static_cast<int>(rng2.below(5));
    const Index k = 1 + static_cast<Index>(rng2.below(8));
    const Index n = 1 + static_cast<Index>(rng2.below(40));
    std::vector<Matrix> preds;
    for (int t = 0; t < t_count; ++t) preds.push_back(random_matrix(k, n, rng2, -5.0, 5.0));
    const DecompositionReport report = bvc_decompose(preds, random_vector(n, rng2, -5.0, 5.0));
    ok &= check(std::abs(report.residual()) < 1e-9, "bvc residual exceeded 1e-9", detail);
  }

  Rng rng3(103);
  for (int rep = 0; rep < 1000 && ok; ++rep) {
    const int k = 1 + static_cast<int>(rng3.below(10));
    const Index n = 1 + static_cast<Index>(rng3.below(12));
    std::vector<Matrix> heads;
    for (int i = 0; i < k; ++i) heads.push_back(random_matrix(n, 1, rng3, -4.0, 4.0));
    const Matrix targets = random_matrix(n, 1, rng3, -4.0, 4.0);
    const NclLossResult r = ncl_loss(heads, targets, 0.5);
    Matrix mean = Matrix::Zero(n, 1);
    for (const Matrix& h : heads) mean += h;
    mean /= k;
    const double expected = (k / 2.0) * (mean - targets).squaredNorm() / static_cast<double>(n);
    ok &= check(std::abs(r.per_head_loss.sum() - expected) < 1e-10,
                "NCL sum identity broke at lambda = 0.5", detail);
  }
  return ok;
}

// --------------------------------------------------------------------------
// 2. Gradient correctness

bool criterion_gradients(std::string& detail) {
  bool ok = true;

  // Pointwise losses against central differences, away from branch points.
  Rng rng(201);
  const LossKind kinds[] = {LossKind::l2(), LossKind::smooth_l1(1.0), LossKind::smooth_l1(2.3),
                            LossKind::tukey()};
  for (const LossKind& kind : kinds) {
    int checked = 0;
    while (checked < 200) {
      const double xi = rng.uniform(-6.0, 6.0);
      if (kind.tag == LossKind::Tag::smooth_l1 && std::abs(std::abs(xi) - kind.threshold) < 1e-3)
        continue;
      if (kind.tag == LossKind::Tag::tukey && std::abs(std::abs(xi) - kind.c) < 1e-3) continue;
      ++checked;
      const double analytic = pointwise_loss(kind, xi).derivative;
      const double numeric =
          (pointwise_loss(kind, xi + 1e-6).value - pointwise_loss(kind, xi - 1e-6).value) / 2e-6;
      const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ok &= check(std::abs(analytic - numeric) / denom < 1e-5,
                  "pointwise " + kind.name() + " derivative off", detail);
    }
  }

  // ncl_loss joint gradient, cross-head terms included.
  Rng rng2(202);
  for (int k : {2, 4}) {
    std::vector<Matrix> heads;
    for (int i = 0; i < k; ++i) heads.push_back(random_matrix(3, 1, rng2, -2.0, 2.0));
    const Matrix targets = random_matrix(3, 1, rng2, -2.0, 2.0);
    const double lambda = 0.3;
    const NclLossResult r = ncl_loss(heads, targets, lambda);
    for (int kk = 0; kk < k && ok; ++kk) {
      for (Index row = 0; row < 3; ++row) {
        double& cell = heads[static_cast<std::size_t>(kk)](row, 0);
        const double saved = cell;
        cell = saved + 1e-6;
        const double lp = ncl_loss(heads, targets, lambda).per_head_loss.sum();
        cell = saved - 1e-6;
        const double lm = ncl_loss(heads, targets, lambda).per_head_loss.sum();
        cell = saved;
        const double numeric = (lp - lm) / 2e-6;
        const double analytic = r.head_gradients[static_cast<std::size_t>(kk)](row, 0);
        const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        ok &= check(std::abs(analytic - numeric) / denom < 1e-5, "ncl_loss gradient off", detail);
      }
    }
  }

  // Full backprop across a grid of small architectures (depths 1-3, dims <= 16).
  Rng rng3(203);
  const std::vector<std::vector<LayerSpec>> grid = {
      {LayerSpec::dense(2, 1)},
      {LayerSpec::dense(3, 8), LayerSpec::act(Activation::tanh), LayerSpec::dense(8, 2)},
      {LayerSpec::dense(4, 16), LayerSpec::act(Activation::relu), LayerSpec::dense(16, 8),
       LayerSpec::act(Activation::tanh), LayerSpec::dense(8, 1)},
  };
  for (const auto& spec : grid) {
    Network net = make_network(spec, rng3);
    const Matrix x = random_matrix(5, net.in_dim(), rng3, 0.4, 1.3);
    const Matrix targets = random_matrix(5, net.out_dim(), rng3);
    const LossOnOutput l2{
        [&](const Matrix& y) { return 0.5 * (y - targets).squaredNorm(); },
        [&](const Matrix& y) { return Matrix(y - targets); },
    };
    ok &= check(grad_check(net, x, l2) < 1e-5, "network grad_check off", detail);
  }

  // Whole-ensemble gradient (trunk + heads) for the NCL loss.
  for (int k : {1, 2, 4}) {
    TrunkSpec trunk;
    trunk.input_dim = 3;
    trunk.hidden = {6};
    trunk.feature_dim = 4 * k;
    Rng init(204 + static_cast<std::uint64_t>(k));
    NclEnsemble model = make_ncl_ensemble(trunk, k, 1, 5e-3, init);
    Rng data_rng(205);
    const Matrix x = random_matrix(4, 3, data_rng, 0.3, 1.2);
    const Matrix y = random_matrix(4, 1, data_rng);
    ok &= check(ensemble_grad_check(model, x, y, LossKind::l2(), 5e-3) < 1e-5,
                "ensemble backprop off (l2)", detail);
    ok &= check(ensemble_grad_check(model, x, y, LossKind::smooth_l1(5.0), 5e-3) < 1e-5,
                "ensemble backprop off (smoothl1)", detail);
  }
  return ok;
}

// --------------------------------------------------------------------------
// 3. Scalar convergence reproduction

bool criterion_dynamics(std::string& detail) {
  const ResolvedConfig cfg = ncl::cli::resolve_config({}, ncl::cli::schema_for("dynamics"));
  ScalarToySpec spec = ncl::cli::scalar_spec_from(cfg);
  Rng root(static_cast<std::uint64_t>(cfg.get_int("seed")));
  spec.seed = root.fork_seed();

  bool ok = true;
  ok &= check(spec.target == -1.5 && spec.regressors == 6 && spec.iterations == 30 &&
                  spec.learning_rate == 0.1,
              "defaults drifted from the published setting", detail);

  const DynamicsResult res = ncl::cli::dynamics_comparison(spec, 5e-3);
  ok &= check(res.conventional_final_error <= 0.01,
              "conventional final error " + std::to_string(res.conventional_final_error), detail);
  ok &= check(res.ncl_final_error <= 0.01,
              "ncl final error " + std::to_string(res.ncl_final_error), detail);
  ok &= check(res.ncl_spread > res.conventional_spread, "ncl spread not larger", detail);

  // Mean trajectory matches the lambda = 0 mean recurrence at every lambda.
  const ScalarToy toy = gen_scalar_toy(spec);
  for (double lambda : {0.0, 1e-3, 5e-3, 1e-2, 0.3}) {
    const Matrix traj = scalar_ncl_dynamics(toy.initial_values, spec.target, lambda,
                                            spec.learning_rate, spec.iterations);
    double mean = toy.initial_values.mean();
    for (int n = 1; n <= spec.iterations; ++n) {
      mean += spec.learning_rate * (spec.target - mean);
      ok &= check(std::abs(traj.row(n).mean() - mean) < 1e-9,
                  "mean recurrence broke at lambda " + std::to_string(lambda), detail);
    }
  }
  return ok;
}

// --------------------------------------------------------------------------
// 4. Spirals comparative reproduction

bool criterion_spirals(std::string& detail) {
  const ResolvedConfig cfg = ncl::cli::resolve_config({}, ncl::cli::schema_for("surface"));
  const SurfaceParams params = ncl::cli::surface_params_from(cfg);

  bool ok = true;
  int wins_or_ties = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ncl::cli::SurfaceOutcome out = ncl::cli::surface_comparison(params, seed);
    ok &= check(out.ncl_train_accuracy >= 0.95,
                "seed " + std::to_string(seed) + ": ncl train accuracy " +
                    std::to_string(out.ncl_train_accuracy),
                detail);
    ok &= check(out.conventional_train_accuracy >= 0.95,
                "seed " + std::to_string(seed) + ": conventional train accuracy " +
                    std::to_string(out.conventional_train_accuracy),
                detail);
    if (out.ncl_test_accuracy >= out.conventional_test_accuracy) ++wins_or_ties;
  }
  ok &= check(wins_or_ties >= 4,
              "ncl won or tied on only " + std::to_string(wins_or_ties) + "/5 seeds", detail);
  return ok;
}

// --------------------------------------------------------------------------
// 5. Rademacher group-ratio probe

bool criterion_rademacher(std::string& detail) {
  bool ok = true;
  const int trials = 10000;
  Rng frng(501);
  for (int k : {2, 4, 8}) {
    Matrix features(64, 64);
    for (Index r = 0; r < 64; ++r)
      for (Index c = 0; c < 64; ++c) features(r, c) = frng.gaussian();
    const GroupRatioResult res = rademacher_group_ratio(features, k, 1.0, trials, 502);
    const double lo = 1.0 / k - 3.0 * res.ratio_std;
    const double hi = 1.0 / std::sqrt(static_cast<double>(k)) + 3.0 * res.ratio_std;
    ok &= check(res.ratio >= lo && res.ratio <= hi,
                "K=" + std::to_string(k) + " ratio " + std::to_string(res.ratio) +
                    " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                detail);

    // All feature mass in one block: the paper's 1/K equality is attained.
    Matrix one_block = Matrix::Zero(64, 64);
    const Index block = 64 / k;
    for (Index r = 0; r < 64; ++r)
      for (Index c = 0; c < block; ++c) one_block(r, c) = frng.gaussian();
    const GroupRatioResult attained = rademacher_group_ratio(one_block, k, 1.0, trials, 503);
    ok &= check(std::abs(attained.ratio - 1.0 / k) <= 3.0 * attained.ratio_std + 1e-12,
                "one-block configuration missed 1/K for K=" + std::to_string(k), detail);
  }
  return ok;
}

// --------------------------------------------------------------------------
// 6. Robust-loss behavior

bool criterion_robust_losses(std::string& detail) {
  bool ok = true;
  const double c = 4.6851;
  const LossKind tukey = LossKind::tukey(c);
  for (double xi : {c + 1e-9, c + 0.5, 2.0 * c, 100.0, -c - 1e-9, -10.0})
    ok &= check(pointwise_loss(tukey, xi).derivative == 0.0, "tukey derivative not zero", detail);

  for (double t : {1.0, 2.0}) {
    const LossKind k = LossKind::smooth_l1(t);
    const auto inside = pointwise_loss(k, t - 1e-9);
    const auto outside = pointwise_loss(k, t + 1e-9);
    ok &= check(std::abs(inside.value - outside.value) < 1e-8, "smoothl1 value jump", detail);
    ok &= check(std::abs(inside.derivative - outside.derivative) < 1e-8,
                "smoothl1 derivative jump", detail);
  }

  Vector xi(3);
  xi << 1.0, 2.0, 3.0;
  const ScaledResiduals s = mad_scale(xi);
  ok &= check(s.mad == 1.0, "mad([1,2,3]) != 1", detail);
  for (int i = 0; i < 3; ++i)
    ok &= check(std::abs(s.scaled(i) - xi(i) / 1.4826) < 1e-14, "1.4826 scaling off", detail);
  return ok;
}

// --------------------------------------------------------------------------
// 7. Metric oracles

bool criterion_metrics(std::string& detail) {
  bool ok = true;
  Rng rng(701);
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(30));
    const Vector p = random_vector(n, rng, -3.0, 3.0);
    const Vector y = random_vector(n, rng, -3.0, 3.0);

    double abs_sum = 0.0, sq_sum = 0.0, y_mean = 0.0;
    for (Index i = 0; i < n; ++i) {
      abs_sum += std::abs(p(i) - y(i));
      sq_sum += (p(i) - y(i)) * (p(i) - y(i));
      y_mean += y(i);
    }
    y_mean /= static_cast<double>(n);
    double ss_tot = 0.0;
    for (Index i = 0; i < n; ++i) ss_tot += (y(i) - y_mean) * (y(i) - y_mean);

    const RegressionMetrics rm = regression_metrics(p, y);
    ok &= check(std::abs(rm.mae - abs_sum / static_cast<double>(n)) < 1e-12, "mae oracle", detail);
    ok &= check(std::abs(rm.rmse - std::sqrt(sq_sum / static_cast<double>(n))) < 1e-12,
                "rmse oracle", detail);
    ok &= check(rm.rmse >= rm.mae - 1e-12, "rmse < mae", detail);

    const TraitMetrics tm = trait_metrics(p, y);
    ok &= check(std::abs(tm.a - (1.0 - abs_sum / static_cast<double>(n))) < 1e-12, "A oracle",
                detail);
    ok &= check(std::abs(tm.r2 - (1.0 - sq_sum / ss_tot)) < 1e-12, "R^2 oracle", detail);

    double cs_l = rng.uniform(0.0, 5.0);
    Index within = 0;
    for (Index i = 0; i < n; ++i)
      if (std::abs(p(i) - y(i)) <= cs_l) ++within;
    ok &= check(std::abs(cumulative_score(p, y, cs_l) -
                         100.0 * static_cast<double>(within) / static_cast<double>(n)) < 1e-12,
                "CS oracle", detail);

    double prev = -1.0;
    for (double l = 0.0; l < 8.0; l += 0.5) {
      const double cs = cumulative_score(p, y, l);
      ok &= check(cs >= prev, "CS not monotone", detail);
      prev = cs;
    }
  }
  return ok;
}

// --------------------------------------------------------------------------
// 8. CLI determinism

bool criterion_determinism(std::string& detail) {
  namespace fs = std::filesystem;
  bool ok = true;
  TempDir dir("acceptance_det");

  auto compare_runs = [&](const std::vector<std::string>& base_args, const std::string& tag,
                          const std::vector<std::string>& files) {
    std::vector<std::string> a = base_args, b = base_args;
    a.insert(a.end(), {"--out", dir.str(tag + "_a")});
    b.insert(b.end(), {"--out", dir.str(tag + "_b")});
    ok &= check(ncl::cli::run_cli(a) == 0, tag + " run A failed", detail);
    ok &= check(ncl::cli::run_cli(b) == 0, tag + " run B failed", detail);
    for (const std::string& f : files) {
      const std::string fa = read_file(dir.str(tag + "_a") + "/" + f);
      const std::string fb = read_file(dir.str(tag + "_b") + "/" + f);
      ok &= check(!fa.empty() && fa == fb, tag + ": " + f + " differs between runs", detail);
    }
  };

  compare_runs({"dynamics", "--seed", "7"}, "dyn", {"conventional.csv", "ncl.csv"});

  ncl::test::write_file(dir.str("train.cfg"),
                        "spirals.points_per_arm = 20\nepochs = 8\nbatch_size = 10\n"
                        "trunk.hidden = 6\ntrunk.features = 6\nK = 3\ntrials = 2\n"
                        "split.test_fraction = 0.25\n");
  compare_runs({"train", "--config", dir.str("train.cfg"), "--seed", "3"}, "train",
               {"checkpoint_t0.nclf", "checkpoint_t1.nclf", "trainlog_t0.csv", "predictions.csv",
                "metrics.csv", "diversity.csv", "decomposition.csv"});

  ncl::test::write_file(dir.str("rad.cfg"),
                        "rademacher.n = 32\nrademacher.f = 16\nrademacher.k = 4\n"
                        "rademacher.trials = 500\n");
  compare_runs({"rademacher", "--config", dir.str("rad.cfg"), "--seed", "11"}, "rad",
               {"rademacher.csv"});
  return ok;
}

// --------------------------------------------------------------------------
// 9. Diversity is nondecreasing in lambda

bool criterion_lambda_sweep(std::string& detail) {
  const ResolvedConfig cfg = ncl::cli::resolve_config({}, ncl::cli::schema_for("dynamics"));
  ScalarToySpec spec = ncl::cli::scalar_spec_from(cfg);
  Rng root(static_cast<std::uint64_t>(cfg.get_int("seed")));
  spec.seed = root.fork_seed();
  const ScalarToy toy = gen_scalar_toy(spec);

  bool ok = true;
  double prev = -1.0;
  for (double lambda : {0.0, 1e-3, 5e-3, 1e-2}) {
    const Matrix traj = scalar_ncl_dynamics(toy.initial_values, spec.target, lambda,
                                            spec.learning_rate, spec.iterations);
    const Vector finals = traj.row(traj.rows() - 1).transpose();
    const double spread = mean_offdiagonal(pairwise_diversity(Matrix(finals)));
    ok &= check(spread >= prev,
                "diversity decreased at lambda = " + std::to_string(lambda), detail);
    prev = spread;
  }
  return ok;
}

}  // namespace

int main() {
  Harness h;
  h.run(1, "algebraic identities (ambiguity, bvc, ncl sum)", 5.0, criterion_identities);
  h.run(2, "gradient correctness vs central finite differences", 30.0, criterion_gradients);
  h.run(3, "scalar convergence dynamics (target -1.5, 6 regressors)", 1.0, criterion_dynamics);
  h.run(4, "spirals: ncl vs conventional ensembles over 5 seeds", 120.0, criterion_spirals);
  h.run(5, "rademacher group ratio within [1/K, 1/sqrt(K)]", 30.0, criterion_rademacher);
  h.run(6, "robust-loss behavior (tukey cutoff, smoothl1 continuity, mad)", 5.0,
        criterion_robust_losses);
  h.run(7, "metric oracles (mae, rmse, a, r2, cs)", 5.0, criterion_metrics);
  h.run(8, "cli determinism: byte-identical csv and checkpoints", 60.0, criterion_determinism);
  h.run(9, "diversity nondecreasing across the lambda grid", 5.0, criterion_lambda_sweep);

  if (h.failures > 0) {
    std::printf("%d criterion(s) failed\n", h.failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
