#include "ncl/cli/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncl/checkpoint.hpp"
#include "ncl/cli/manifest.hpp"
#include "ncl/csv.hpp"
#include "ncl/diagnostics.hpp"
#include "ncl/errors.hpp"
#include "ncl/log.hpp"
#include "ncl/version.hpp"

namespace fs = std::filesystem;

namespace ncl::cli {

namespace {

// ---------------------------------------------------------------------------
// Schemas

const std::vector<KeyDef> kScalarKeys = {
    {"scalar.target", ValueType::real, "-1.5"},
    {"scalar.k", ValueType::integer, "6"},
    {"scalar.iterations", ValueType::integer, "30"},
    {"scalar.gamma", ValueType::real, "0.1"},
    {"scalar.init_lo", ValueType::real, "-4"},
    {"scalar.init_hi", ValueType::real, "1"},
};

const std::vector<KeyDef> kSpiralsKeys = {
    {"spirals.points_per_arm", ValueType::integer, "200"},
    {"spirals.turns", ValueType::real, "2"},
    {"spirals.noise", ValueType::real, "0.05"},
};

const std::vector<KeyDef> kTrainKeys = {
    {"K", ValueType::integer, "3"},
    {"lambda", ValueType::real, "0.005"},
    {"loss", ValueType::text, "l2", false, {"l2", "smoothl1", "tukey"}},
    {"smoothl1.t", ValueType::real, "1"},
    {"tukey.c", ValueType::real, "4.6851"},
    {"epochs", ValueType::integer, "400"},
    {"batch_size", ValueType::integer, "25"},
    {"lr", ValueType::real, "0.05"},
    {"momentum", ValueType::real, "0.9"},
    {"weight_decay", ValueType::real, "0.0005"},
    {"trunk.hidden", ValueType::text, "24"},
    {"trunk.features", ValueType::integer, "24"},
    {"trunk.activation", ValueType::text, "tanh", false, {"relu", "tanh", "identity"}},
    {"heads.weighted", ValueType::boolean, "false"},
    {"gbar_gradient", ValueType::text, "full", false, {"full", "constant"}},
};

const std::vector<KeyDef> kCsvKeys = {
    {"csv.path", ValueType::text, ""},
    {"csv.features", ValueType::text, ""},
    {"csv.targets", ValueType::text, ""},
};

std::vector<KeyDef> with_common(std::string command, std::vector<KeyDef> keys) {
  std::vector<KeyDef> schema = {
      {"experiment", ValueType::text, std::move(command)},
      {"seed", ValueType::integer, "1"},
  };
  schema.insert(schema.end(), keys.begin(), keys.end());
  return schema;
}

void append(std::vector<KeyDef>& dst, const std::vector<KeyDef>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

LossKind loss_from(const ResolvedConfig& cfg) {
  const std::string& name = cfg.get_text("loss");
  if (name == "l2") return LossKind::l2();
  if (name == "smoothl1") return LossKind::smooth_l1(cfg.get_real("smoothl1.t"));
  return LossKind::tukey(cfg.get_real("tukey.c"));
}

Activation activation_from(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  return Activation::identity;
}

std::vector<Index> parse_hidden(const std::string& text) {
  std::vector<Index> dims;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    dims.push_back(static_cast<Index>(std::stoll(cur)));
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ',')
      flush();
    else if (ch != ' ')
      cur.push_back(ch);
  }
  flush();
  return dims;
}

TrunkSpec trunk_spec_from(const ResolvedConfig& cfg, Index input_dim) {
  TrunkSpec spec;
  spec.input_dim = input_dim;
  spec.hidden = parse_hidden(cfg.get_text("trunk.hidden"));
  spec.feature_dim = cfg.get_int("trunk.features");
  spec.activation = activation_from(cfg.get_text("trunk.activation"));
  return spec;
}

TrainConfig train_config_from(const ResolvedConfig& cfg) {
  TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int("epochs"));
  tc.batch_size = static_cast<int>(cfg.get_int("batch_size"));
  tc.lr = cfg.get_real("lr");
  tc.momentum = cfg.get_real("momentum");
  tc.weight_decay = cfg.get_real("weight_decay");
  tc.lambda = cfg.get_real("lambda");
  tc.loss = loss_from(cfg);
  tc.mean_gradient =
      cfg.get_text("gbar_gradient") == "constant" ? MeanGradient::constant : MeanGradient::full;
  tc.learn_aggregation = cfg.get_bool("heads.weighted");
  return tc;
}

SpiralsSpec spirals_spec_from(const ResolvedConfig& cfg) {
  SpiralsSpec spec;
  spec.points_per_arm = static_cast<int>(cfg.get_int("spirals.points_per_arm"));
  spec.turns = cfg.get_real("spirals.turns");
  spec.noise_std = cfg.get_real("spirals.noise");
  return spec;
}

}  // namespace

std::vector<KeyDef> schema_for(const std::string& command) {
  if (command == "dynamics") {
    std::vector<KeyDef> keys = kScalarKeys;
    keys.push_back({"lambda", ValueType::real, "0.005"});
    return with_common(command, std::move(keys));
  }
  if (command == "surface") {
    std::vector<KeyDef> keys = kSpiralsKeys;
    append(keys, kTrainKeys);
    keys.push_back({"split.test_fraction", ValueType::real, "0.5"});
    keys.push_back({"grid.resolution", ValueType::integer, "200"});
    return with_common(command, std::move(keys));
  }
  if (command == "train") {
    std::vector<KeyDef> keys = {
        {"data.kind", ValueType::text, "spirals", false, {"spirals", "csv"}},
    };
    append(keys, kSpiralsKeys);
    append(keys, kCsvKeys);
    append(keys, kTrainKeys);
    keys.push_back({"split.test_fraction", ValueType::real, "0"});
    keys.push_back({"trials", ValueType::integer, "1"});
    keys.push_back({"decompose", ValueType::text, "auto", false, {"auto", "true", "false"}});
    keys.push_back({"cs.l", ValueType::real, "5"});
    return with_common(command, std::move(keys));
  }
  if (command == "eval") {
    std::vector<KeyDef> keys = {
        {"checkpoint", ValueType::text, "", true},
        {"data.kind", ValueType::text, "spirals", false, {"spirals", "csv"}},
    };
    append(keys, kSpiralsKeys);
    append(keys, kCsvKeys);
    keys.push_back({"cs.l", ValueType::real, "5"});
    return with_common(command, std::move(keys));
  }
  if (command == "decompose") {
    return with_common(command, {
                                    {"preds.path", ValueType::text, "", true},
                                    {"targets.path", ValueType::text, "", true},
                                });
  }
  if (command == "rademacher") {
    return with_common(
        command,
        {
            {"rademacher.n", ValueType::integer, "64"},
            {"rademacher.f", ValueType::integer, "64"},
            {"rademacher.k", ValueType::integer, "4"},
            {"rademacher.bound", ValueType::real, "1"},
            {"rademacher.trials", ValueType::integer, "10000"},
            {"rademacher.features", ValueType::text, "gaussian", false,
             {"gaussian", "one_block", "csv"}},
            {"rademacher.csv_path", ValueType::text, ""},
        });
  }
  if (command == "gen-data") {
    std::vector<KeyDef> keys = {
        {"data.kind", ValueType::text, "spirals", false, {"spirals", "scalar"}},
    };
    append(keys, kSpiralsKeys);
    append(keys, kScalarKeys);
    return with_common(command, std::move(keys));
  }
  throw ConfigError("unknown subcommand '" + command + "'");
}

// ---------------------------------------------------------------------------
// Experiment cores

DynamicsResult dynamics_comparison(const ScalarToySpec& spec, double lambda) {
  const ScalarToy toy = gen_scalar_toy(spec);
  const double target = spec.target;

  DynamicsResult res;
  res.conventional =
      scalar_ncl_dynamics(toy.initial_values, target, 0.0, spec.learning_rate, spec.iterations);
  res.ncl =
      scalar_ncl_dynamics(toy.initial_values, target, lambda, spec.learning_rate, spec.iterations);

  auto summarize = [&](const Matrix& traj, double& err, double& spread) {
    const Vector finals = traj.row(traj.rows() - 1).transpose();
    err = std::abs(finals.mean() - target);
    if (finals.size() < 2) {
      spread = 0.0;
      return;
    }
    spread = mean_offdiagonal(pairwise_diversity(Matrix(finals)));
  };
  summarize(res.conventional, res.conventional_final_error, res.conventional_spread);
  summarize(res.ncl, res.ncl_final_error, res.ncl_spread);
  return res;
}

double sign_accuracy(const NclEnsemble& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const HeadOutputs out = ensemble_forward(model, data.features);
  const Matrix pred = aggregate(out, model.aggregator);
  Index correct = 0;
  for (Index i = 0; i < data.size(); ++i) {
    const double p = pred(i, 0) >= 0.0 ? 1.0 : -1.0;
    if (p == data.targets(i, 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

SurfaceOutcome surface_comparison(const SurfaceParams& params, std::uint64_t seed) {
  Rng root(seed);
  SpiralsSpec spirals = params.spirals;
  spirals.seed = root.fork_seed();
  const std::uint64_t split_seed = root.fork_seed();
  const std::uint64_t init_seed = root.fork_seed();
  const std::uint64_t train_seed = root.fork_seed();

  const Dataset full = gen_spirals(spirals);
  SurfaceOutcome outcome;
  std::tie(outcome.train_set, outcome.test_set) = split(full, params.test_fraction, split_seed);

  auto run_regime = [&](double lambda) {
    Rng init_rng(init_seed);
    NclEnsemble model =
        make_ncl_ensemble(params.trunk, params.k, params.output_dim, lambda, init_rng);
    TrainConfig cfg = params.train;
    cfg.lambda = lambda;
    cfg.seed = train_seed;
    train(model, outcome.train_set, cfg);
    return model;
  };

  outcome.ncl_model = run_regime(params.train.lambda);
  outcome.conventional_model = run_regime(0.0);
  outcome.ncl_train_accuracy = sign_accuracy(outcome.ncl_model, outcome.train_set);
  outcome.ncl_test_accuracy = sign_accuracy(outcome.ncl_model, outcome.test_set);
  outcome.conventional_train_accuracy = sign_accuracy(outcome.conventional_model, outcome.train_set);
  outcome.conventional_test_accuracy = sign_accuracy(outcome.conventional_model, outcome.test_set);
  return outcome;
}

ScalarToySpec scalar_spec_from(const ResolvedConfig& cfg) {
  ScalarToySpec spec;
  spec.target = cfg.get_real("scalar.target");
  spec.regressors = static_cast<int>(cfg.get_int("scalar.k"));
  spec.iterations = static_cast<int>(cfg.get_int("scalar.iterations"));
  spec.learning_rate = cfg.get_real("scalar.gamma");
  spec.init_lo = cfg.get_real("scalar.init_lo");
  spec.init_hi = cfg.get_real("scalar.init_hi");
  return spec;
}

SurfaceParams surface_params_from(const ResolvedConfig& cfg) {
  SurfaceParams params;
  params.spirals = spirals_spec_from(cfg);
  params.test_fraction = cfg.get_real("split.test_fraction");
  params.trunk = trunk_spec_from(cfg, 2);
  params.k = static_cast<int>(cfg.get_int("K"));
  params.train = train_config_from(cfg);
  return params;
}

// ---------------------------------------------------------------------------
// Shared command plumbing

namespace {

struct CommandContext {
  std::string command;
  ResolvedConfig config;
  fs::path out_dir;
  std::vector<std::string> outputs;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(config.get_int("seed")); }

  std::string out_path(const std::string& name) { return (out_dir / name).string(); }

  void record(const std::string& name) { outputs.push_back(name); }
};

Dataset dataset_from(const ResolvedConfig& cfg, std::uint64_t data_seed) {
  const std::string& kind = cfg.get_text("data.kind");
  if (kind == "spirals") {
    SpiralsSpec spec = spirals_spec_from(cfg);
    spec.seed = data_seed;
    return gen_spirals(spec);
  }
  const std::string& path = cfg.get_text("csv.path");
  if (path.empty()) throw ConfigError("data.kind = csv requires csv.path");
  const std::string& feats = cfg.get_text("csv.features");
  const std::string& targs = cfg.get_text("csv.targets");
  if (feats.empty() || targs.empty())
    throw ConfigError("data.kind = csv requires csv.features and csv.targets");
  return load_csv(path, parse_columns(feats), parse_columns(targs));
}

void write_trajectory_csv(const std::string& path, const Matrix& traj, double final_error,
                          double spread) {
  CsvWriter csv(path);
  csv.write_row({"iteration", "regressor", "value"});
  for (Index it = 0; it < traj.rows(); ++it)
    for (Index k = 0; k < traj.cols(); ++k)
      csv.write_row({std::to_string(it), std::to_string(k), format_double(traj(it, k))});
  csv.write_row({"summary", "mean_final_error", format_double(final_error)});
  csv.write_row({"summary", "mean_pairwise_spread", format_double(spread)});
}

void write_metrics_rows(CsvWriter& csv, const std::string& split_name, const Vector& preds,
                        const Vector& targets, double cs_l) {
  const RegressionMetrics rm = regression_metrics(preds, targets);
  const TraitMetrics tm = trait_metrics(preds, targets);
  const double cs = cumulative_score(preds, targets, cs_l);
  csv.write_row({split_name, "mae", format_double(rm.mae)});
  csv.write_row({split_name, "rmse", format_double(rm.rmse)});
  csv.write_row({split_name, "a", format_double(tm.a)});
  csv.write_row({split_name, "r2", tm.r2_defined ? format_double(tm.r2) : "nan"});
  csv.write_row({split_name, "cs", format_double(cs)});
}

Vector flatten(const Matrix& m) {
  Vector v(m.size());
  Index at = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v(at++) = m(r, c);
  return v;
}

// Head predictions flattened over (sample, output-dim), matching the
// predictions dump schema: one value per (trial, head, sample) triple.
Matrix head_rows(const HeadOutputs& out) {
  const Index k = static_cast<Index>(out.per_head.size());
  Matrix rows(k, out.per_head[0].size());
  for (Index h = 0; h < k; ++h) rows.row(h) = flatten(out.per_head[static_cast<std::size_t>(h)]).transpose();
  return rows;
}

void write_diversity_csv(const std::string& path, const Matrix& head_preds) {
  const Matrix d = head_preds.rows() >= 2 ? pairwise_diversity(head_preds)
                                          : Matrix::Zero(head_preds.rows(), head_preds.rows());
  CsvWriter csv(path);
  csv.write_row({"head_i", "head_j", "distance"});
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = 0; j < d.cols(); ++j)
      csv.write_row({std::to_string(i), std::to_string(j), format_double(d(i, j))});
}

void write_decomposition(CommandContext& ctx, const DecompositionReport& report) {
  {
    CsvWriter csv(ctx.out_path("decomposition.csv"));
    csv.write_row({"bias_sq", "variance", "covariance", "mse_of_mean", "residual", "trials"});
    csv.write_row({format_double(report.bias_sq), format_double(report.variance),
                   format_double(report.covariance), format_double(report.mse_of_mean),
                   format_double(report.residual()), std::to_string(report.trials)});
  }
  ctx.record("decomposition.csv");
  nlohmann::json j;
  j["bias_sq"] = report.bias_sq;
  j["variance"] = report.variance;
  j["covariance"] = report.covariance;
  j["mse_of_mean"] = report.mse_of_mean;
  j["residual"] = report.residual();
  j["trials"] = report.trials;
  std::ofstream out(ctx.out_path("decomposition.json"));
  out << j.dump(2) << '\n';
  ctx.record("decomposition.json");
}

// ---------------------------------------------------------------------------
// Subcommand bodies

void cmd_dynamics(CommandContext& ctx) {
  ScalarToySpec spec = scalar_spec_from(ctx.config);
  Rng root(ctx.seed());
  spec.seed = root.fork_seed();
  const DynamicsResult res = dynamics_comparison(spec, ctx.config.get_real("lambda"));

  write_trajectory_csv(ctx.out_path("conventional.csv"), res.conventional,
                       res.conventional_final_error, res.conventional_spread);
  ctx.record("conventional.csv");
  write_trajectory_csv(ctx.out_path("ncl.csv"), res.ncl, res.ncl_final_error, res.ncl_spread);
  ctx.record("ncl.csv");
}

void cmd_surface(CommandContext& ctx) {
  const SurfaceParams params = surface_params_from(ctx.config);
  const SurfaceOutcome outcome = surface_comparison(params, ctx.seed());

  const Index res = ctx.config.get_int("grid.resolution");
  if (res < 2) throw ConfigError("grid.resolution must be >= 2");

  // Lattice over the bounding box of the generated points.
  const Dataset& train_set = outcome.train_set;
  double lo_x = train_set.features.col(0).minCoeff(), hi_x = train_set.features.col(0).maxCoeff();
  double lo_y = train_set.features.col(1).minCoeff(), hi_y = train_set.features.col(1).maxCoeff();
  if (outcome.test_set.size() > 0) {
    lo_x = std::min(lo_x, outcome.test_set.features.col(0).minCoeff());
    hi_x = std::max(hi_x, outcome.test_set.features.col(0).maxCoeff());
    lo_y = std::min(lo_y, outcome.test_set.features.col(1).minCoeff());
    hi_y = std::max(hi_y, outcome.test_set.features.col(1).maxCoeff());
  }

  Matrix grid(res * res, 2);
  Index at = 0;
  for (Index iy = 0; iy < res; ++iy) {
    const double y = lo_y + (hi_y - lo_y) * static_cast<double>(iy) / static_cast<double>(res - 1);
    for (Index ix = 0; ix < res; ++ix, ++at) {
      grid(at, 0) =
          lo_x + (hi_x - lo_x) * static_cast<double>(ix) / static_cast<double>(res - 1);
      grid(at, 1) = y;
    }
  }

  auto write_surface = [&](const std::string& name, const NclEnsemble& model) {
    const HeadOutputs out = ensemble_forward(model, grid);
    const Matrix combined = aggregate(out, model.aggregator);
    CsvWriter csv(ctx.out_path(name));
    csv.write_row({"x", "y", "head", "head_output", "ensemble_output"});
    for (std::size_t h = 0; h < out.per_head.size(); ++h)
      for (Index i = 0; i < grid.rows(); ++i)
        csv.write_row({format_double(grid(i, 0)), format_double(grid(i, 1)), std::to_string(h),
                       format_double(out.per_head[h](i, 0)), format_double(combined(i, 0))});
    ctx.record(name);
  };
  write_surface("surface_ncl.csv", outcome.ncl_model);
  write_surface("surface_conventional.csv", outcome.conventional_model);

  {
    CsvWriter csv(ctx.out_path("accuracy.csv"));
    csv.write_row({"regime", "train_accuracy", "test_accuracy"});
    csv.write_row({"ncl", format_double(outcome.ncl_train_accuracy),
                   format_double(outcome.ncl_test_accuracy)});
    csv.write_row({"conventional", format_double(outcome.conventional_train_accuracy),
                   format_double(outcome.conventional_test_accuracy)});
  }
  ctx.record("accuracy.csv");
}

void cmd_train(CommandContext& ctx) {
  const auto trials = static_cast<int>(ctx.config.get_int("trials"));
  if (trials < 1) throw ConfigError("trials must be >= 1");
  const std::string& decompose_mode = ctx.config.get_text("decompose");
  if (decompose_mode == "true" && trials < 2)
    throw ConfigError("decomposition needs >= 2 trials (got trials = " + std::to_string(trials) +
                      ")");

  Rng root(ctx.seed());
  const std::uint64_t data_seed = root.fork_seed();
  const std::uint64_t split_seed = root.fork_seed();

  const Dataset full = dataset_from(ctx.config, data_seed);
  const double test_fraction = ctx.config.get_real("split.test_fraction");
  Dataset train_set, test_set;
  std::tie(train_set, test_set) = split(full, test_fraction, split_seed);
  // The evaluation set also feeds the predictions dump; it is identical
  // across trials because data and split seeds are shared.
  const Dataset& eval_set = test_set.size() > 0 ? test_set : train_set;

  const TrunkSpec trunk = trunk_spec_from(ctx.config, full.feature_dim());
  const auto k = static_cast<int>(ctx.config.get_int("K"));
  TrainConfig base_config = train_config_from(ctx.config);

  std::vector<Matrix> trial_preds;
  std::optional<NclEnsemble> first_model;
  for (int t = 0; t < trials; ++t) {
    Rng trial_root(root.fork_seed());
    Rng init_rng(trial_root.fork_seed());
    NclEnsemble model =
        make_ncl_ensemble(trunk, k, full.target_dim(), base_config.lambda, init_rng);
    TrainConfig cfg = base_config;
    cfg.seed = trial_root.fork_seed();
    const std::string ckpt_name =
        trials == 1 ? "checkpoint.nclf" : "checkpoint_t" + std::to_string(t) + ".nclf";
    cfg.divergence_checkpoint_path = ctx.out_path(ckpt_name + ".diverged");

    const TrainLog log = train(model, train_set, cfg);

    save_ensemble_file(ctx.out_path(ckpt_name), model);
    ctx.record(ckpt_name);

    const std::string log_name =
        trials == 1 ? "trainlog.csv" : "trainlog_t" + std::to_string(t) + ".csv";
    {
      CsvWriter csv(ctx.out_path(log_name));
      csv.write_row({"epoch", "mean_head_loss", "ensemble_mse", "diversity"});
      for (const TrainLogRow& row : log.rows)
        csv.write_row({std::to_string(row.epoch), format_double(row.mean_head_loss),
                       format_double(row.ensemble_mse), format_double(row.diversity)});
    }
    ctx.record(log_name);

    trial_preds.push_back(head_rows(ensemble_forward(model, eval_set.features)));
    if (t == 0) first_model = std::move(model);
  }

  {
    CsvWriter csv(ctx.out_path("predictions.csv"));
    csv.write_row({"trial", "head", "sample", "value"});
    for (int t = 0; t < trials; ++t)
      for (Index h = 0; h < trial_preds[static_cast<std::size_t>(t)].rows(); ++h)
        for (Index s = 0; s < trial_preds[static_cast<std::size_t>(t)].cols(); ++s)
          csv.write_row({std::to_string(t), std::to_string(h), std::to_string(s),
                         format_double(trial_preds[static_cast<std::size_t>(t)](h, s))});
  }
  ctx.record("predictions.csv");

  const double cs_l = ctx.config.get_real("cs.l");
  {
    CsvWriter csv(ctx.out_path("metrics.csv"));
    csv.write_row({"split", "metric", "value"});
    const HeadOutputs train_out = ensemble_forward(*first_model, train_set.features);
    write_metrics_rows(csv, "train", flatten(aggregate(train_out, first_model->aggregator)),
                       flatten(train_set.targets), cs_l);
    if (test_set.size() > 0) {
      const HeadOutputs test_out = ensemble_forward(*first_model, test_set.features);
      write_metrics_rows(csv, "test", flatten(aggregate(test_out, first_model->aggregator)),
                         flatten(test_set.targets), cs_l);
    }
  }
  ctx.record("metrics.csv");

  write_diversity_csv(ctx.out_path("diversity.csv"),
                      head_rows(ensemble_forward(*first_model, eval_set.features)));
  ctx.record("diversity.csv");

  if (decompose_mode != "false" && trials >= 2) {
    const DecompositionReport report = bvc_decompose(trial_preds, flatten(eval_set.targets));
    write_decomposition(ctx, report);
  }
}

void cmd_eval(CommandContext& ctx) {
  const NclEnsemble model = load_ensemble_file(ctx.config.get_text("checkpoint"));
  Rng root(ctx.seed());
  const Dataset data = dataset_from(ctx.config, root.fork_seed());

  const HeadOutputs out = ensemble_forward(model, data.features);
  const Vector preds = flatten(aggregate(out, model.aggregator));
  const Vector targets = flatten(data.targets);

  {
    CsvWriter csv(ctx.out_path("metrics.csv"));
    csv.write_row({"split", "metric", "value"});
    write_metrics_rows(csv, "eval", preds, targets, ctx.config.get_real("cs.l"));
  }
  ctx.record("metrics.csv");

  {
    CsvWriter csv(ctx.out_path("predictions.csv"));
    csv.write_row({"trial", "head", "sample", "value"});
    const Matrix rows = head_rows(out);
    for (Index h = 0; h < rows.rows(); ++h)
      for (Index s = 0; s < rows.cols(); ++s)
        csv.write_row({"0", std::to_string(h), std::to_string(s), format_double(rows(h, s))});
  }
  ctx.record("predictions.csv");

  write_diversity_csv(ctx.out_path("diversity.csv"), head_rows(out));
  ctx.record("diversity.csv");
}

void cmd_decompose(CommandContext& ctx) {
  const CsvTable preds = read_csv(ctx.config.get_text("preds.path"));
  const CsvTable targets_table = read_csv(ctx.config.get_text("targets.path"));

  // Dump schema: trial, head, sample, value. The grid must be dense.
  std::map<std::tuple<long, long, long>, double> cells;
  long t_max = -1, h_max = -1, s_max = -1;
  for (std::size_t r = 0; r < preds.rows.size(); ++r) {
    const long t = static_cast<long>(parse_cell(preds, r, 0));
    const long h = static_cast<long>(parse_cell(preds, r, 1));
    const long s = static_cast<long>(parse_cell(preds, r, 2));
    const double v = parse_cell(preds, r, 3);
    cells[{t, h, s}] = v;
    t_max = std::max(t_max, t);
    h_max = std::max(h_max, h);
    s_max = std::max(s_max, s);
  }
  const long t_count = t_max + 1, k_count = h_max + 1, n_count = s_max + 1;
  if (t_count < 2)
    throw DimensionError("decompose: need >= 2 trials in the predictions dump, got " +
                         std::to_string(t_count));
  if (static_cast<long>(cells.size()) != t_count * k_count * n_count)
    throw CsvError("decompose: predictions dump is not a dense trial x head x sample grid");

  std::vector<Matrix> trials(static_cast<std::size_t>(t_count));
  for (long t = 0; t < t_count; ++t) {
    Matrix m(k_count, n_count);
    for (long h = 0; h < k_count; ++h)
      for (long s = 0; s < n_count; ++s) m(h, s) = cells.at({t, h, s});
    trials[static_cast<std::size_t>(t)] = std::move(m);
  }

  Vector targets(n_count);
  if (static_cast<long>(targets_table.rows.size()) != n_count)
    throw CsvError("decompose: targets file has " + std::to_string(targets_table.rows.size()) +
                   " rows, predictions cover " + std::to_string(n_count) + " samples");
  for (std::size_t r = 0; r < targets_table.rows.size(); ++r) {
    const long s = static_cast<long>(parse_cell(targets_table, r, 0));
    if (s < 0 || s >= n_count)
      throw CsvError("decompose: target sample index " + std::to_string(s) + " out of range");
    targets(s) = parse_cell(targets_table, r, 1);
  }

  write_decomposition(ctx, bvc_decompose(trials, targets));
}

void cmd_rademacher(CommandContext& ctx) {
  Rng root(ctx.seed());
  const std::uint64_t feature_seed = root.fork_seed();
  const std::uint64_t mc_seed = root.fork_seed();

  const Index n = ctx.config.get_int("rademacher.n");
  const Index f = ctx.config.get_int("rademacher.f");
  const auto k = static_cast<int>(ctx.config.get_int("rademacher.k"));
  const double bound = ctx.config.get_real("rademacher.bound");
  const auto trials = static_cast<int>(ctx.config.get_int("rademacher.trials"));

  Matrix features;
  const std::string& kind = ctx.config.get_text("rademacher.features");
  if (kind == "csv") {
    const std::string& path = ctx.config.get_text("rademacher.csv_path");
    if (path.empty()) throw ConfigError("rademacher.features = csv requires rademacher.csv_path");
    const CsvTable table = read_csv(path);
    features.resize(static_cast<Index>(table.rows.size()),
                    static_cast<Index>(table.column_count()));
    for (Index r = 0; r < features.rows(); ++r)
      for (Index c = 0; c < features.cols(); ++c)
        features(r, c) =
            parse_cell(table, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  } else {
    Rng frng(feature_seed);
    features = Matrix::Zero(n, f);
    if (kind == "gaussian") {
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < f; ++c) features(r, c) = frng.gaussian();
    } else {  // one_block: all mass in the first feature block
      const Index block = f / k;
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < block; ++c) features(r, c) = frng.gaussian();
    }
  }

  const GroupRatioResult res = rademacher_group_ratio(features, k, bound, trials, mc_seed);

  {
    CsvWriter csv(ctx.out_path("rademacher.csv"));
    csv.write_row({"quantity", "value"});
    csv.write_row({"full_value", format_double(res.full.value)});
    csv.write_row({"full_mc_std", format_double(res.full.mc_std)});
    csv.write_row({"group_value", format_double(res.group.value)});
    csv.write_row({"group_mc_std", format_double(res.group.mc_std)});
    csv.write_row({"ratio", format_double(res.ratio)});
    csv.write_row({"ratio_std", format_double(res.ratio_std)});
    csv.write_row({"lower_bound", format_double(1.0 / static_cast<double>(k))});
    csv.write_row({"upper_bound", format_double(1.0 / std::sqrt(static_cast<double>(k)))});
    csv.write_row({"trials", std::to_string(trials)});
    csv.write_row({"n", std::to_string(features.rows())});
    csv.write_row({"f", std::to_string(features.cols())});
    csv.write_row({"k", std::to_string(k)});
  }
  ctx.record("rademacher.csv");

  nlohmann::json j;
  j["full"] = {{"value", res.full.value}, {"mc_std", res.full.mc_std}};
  j["group"] = {{"value", res.group.value}, {"mc_std", res.group.mc_std}};
  j["ratio"] = res.ratio;
  j["ratio_std"] = res.ratio_std;
  j["lower_bound"] = 1.0 / static_cast<double>(k);
  j["upper_bound"] = 1.0 / std::sqrt(static_cast<double>(k));
  j["trials"] = trials;
  std::ofstream out(ctx.out_path("rademacher.json"));
  out << j.dump(2) << '\n';
  ctx.record("rademacher.json");
}

void cmd_gendata(CommandContext& ctx) {
  Rng root(ctx.seed());
  const std::uint64_t data_seed = root.fork_seed();
  const std::string& kind = ctx.config.get_text("data.kind");

  if (kind == "spirals") {
    SpiralsSpec spec = spirals_spec_from(ctx.config);
    spec.seed = data_seed;
    const Dataset ds = gen_spirals(spec);
    CsvWriter csv(ctx.out_path("dataset.csv"));
    csv.write_row({"x", "y", "label"});
    for (Index i = 0; i < ds.size(); ++i)
      csv.write_row({format_double(ds.features(i, 0)), format_double(ds.features(i, 1)),
                     format_double(ds.targets(i, 0))});
    ctx.record("dataset.csv");
    return;
  }

  ScalarToySpec spec = scalar_spec_from(ctx.config);
  spec.seed = data_seed;
  const ScalarToy toy = gen_scalar_toy(spec);
  {
    CsvWriter csv(ctx.out_path("dataset.csv"));
    csv.write_row({"bias", "target"});
    csv.write_row({format_double(toy.dataset.features(0, 0)),
                   format_double(toy.dataset.targets(0, 0))});
  }
  ctx.record("dataset.csv");
  {
    CsvWriter csv(ctx.out_path("initial_values.csv"));
    csv.write_row({"regressor", "value"});
    for (Index i = 0; i < toy.initial_values.size(); ++i)
      csv.write_row({std::to_string(i), format_double(toy.initial_values(i))});
  }
  ctx.record("initial_values.csv");
}

// ---------------------------------------------------------------------------

int run_command(const std::string& command, const std::string& config_path,
                std::optional<std::int64_t> seed_override, const std::string& out_dir) {
  const auto started = std::chrono::steady_clock::now();
  CommandContext ctx;
  ctx.command = command;
  ctx.out_dir = out_dir;

  RawConfig raw = config_path.empty() ? RawConfig{} : parse_config_file(config_path);
  if (seed_override) raw["seed"] = canonical_int(*seed_override);
  ctx.config = resolve_config(raw, schema_for(command));
  if (ctx.config.get_text("experiment") != command)
    throw ConfigError("config says experiment = " + ctx.config.get_text("experiment") +
                      " but the subcommand is " + command);

  fs::create_directories(ctx.out_dir);
  {
    std::ofstream cfg(ctx.out_path("resolved.cfg"));
    cfg << ctx.config.canonical_text();
  }
  ctx.record("resolved.cfg");

  RunManifest manifest;
  manifest.config_hash = ctx.config.hash();
  manifest.seed = ctx.seed();
  manifest.tool_version = kToolVersion;
  manifest.config = ctx.config;

  try {
    if (command == "dynamics")
      cmd_dynamics(ctx);
    else if (command == "surface")
      cmd_surface(ctx);
    else if (command == "train")
      cmd_train(ctx);
    else if (command == "eval")
      cmd_eval(ctx);
    else if (command == "decompose")
      cmd_decompose(ctx);
    else if (command == "rademacher")
      cmd_rademacher(ctx);
    else if (command == "gen-data")
      cmd_gendata(ctx);
    else
      throw ConfigError("unknown subcommand '" + command + "'");
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.failed_stage = command;
    manifest.outputs = ctx.outputs;
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    try {
      write_manifest(ctx.out_dir.string(), manifest);
    } catch (...) {
      // The original failure is the one worth reporting.
    }
    throw;
  }

  manifest.outputs = ctx.outputs;
  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  // Completeness gate: every recorded artifact must exist on disk.
  for (const std::string& name : manifest.outputs)
    if (!fs::exists(ctx.out_dir / name))
      throw ConfigError("output " + name + " was not written");
  write_manifest(ctx.out_dir.string(), manifest);
  ctx.record("manifest.json");
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Negative-correlation ensemble trainer and diagnostics"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config_path;
    std::int64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
  };

  const std::vector<std::string> commands = {"dynamics",  "surface",    "train",   "eval",
                                             "decompose", "rademacher", "gen-data"};
  std::map<std::string, SubArgs> sub_args;
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    SubArgs& sa = sub_args[name];
    sub->add_option("--config", sa.config_path, "path to a key = value config file");
    sub->add_option("--seed", sa.seed, "override the config seed")
        ->each([&sa](const std::string&) { sa.seed_set = true; });
    sub->add_option("--out", sa.out_dir, "output directory")->default_val("out");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (const std::string& name : commands) {
    if (!app.got_subcommand(name)) continue;
    const SubArgs& sa = sub_args.at(name);
    try {
      return run_command(name, sa.config_path,
                         sa.seed_set ? std::optional<std::int64_t>(sa.seed) : std::nullopt,
                         sa.out_dir.empty() ? "out" : sa.out_dir);
    } catch (const std::exception& e) {
      std::cerr << "ncl " << name << ": " << e.what() << '\n';
      return 1;
    }
  }
  std::cerr << "ncl: no subcommand given\n";
  return 1;
}

}  // namespace ncl::cli
