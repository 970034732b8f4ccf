#pragma once

#include <string>
#include <vector>

#include "ncl/cli/config.hpp"
#include "ncl/data.hpp"
#include "ncl/ensemble.hpp"

namespace ncl::cli {

/// Config schema of one subcommand (dynamics, surface, train, eval,
/// decompose, rademacher, gen-data).
std::vector<KeyDef> schema_for(const std::string& command);

/// Scalar convergence experiment: the same seeded initial regressors
/// descended once with lambda = 0 (conventional) and once with the given
/// lambda (NCL).
struct DynamicsResult {
  Matrix conventional;  // (iterations + 1) x K
  Matrix ncl;
  double conventional_final_error = 0.0;  // |final ensemble mean - target|
  double ncl_final_error = 0.0;
  double conventional_spread = 0.0;  // mean pairwise distance, final row
  double ncl_spread = 0.0;
};

DynamicsResult dynamics_comparison(const ScalarToySpec& spec, double lambda);

/// Spirals comparison: identical data, identical initialization, identical
/// batch schedule; only lambda differs between the two regimes.
struct SurfaceParams {
  SpiralsSpec spirals;
  double test_fraction = 0.5;
  TrunkSpec trunk;
  int k = 3;
  Index output_dim = 1;
  TrainConfig train;
};

struct SurfaceOutcome {
  NclEnsemble ncl_model;
  NclEnsemble conventional_model;
  Dataset train_set;
  Dataset test_set;
  double ncl_train_accuracy = 0.0;
  double ncl_test_accuracy = 0.0;
  double conventional_train_accuracy = 0.0;
  double conventional_test_accuracy = 0.0;
};

SurfaceOutcome surface_comparison(const SurfaceParams& params, std::uint64_t seed);

/// Fraction of samples whose predicted sign matches the +/-1 target.
double sign_accuracy(const NclEnsemble& model, const Dataset& data);

/// Builders from a resolved config (defaults come from schema_for).
ScalarToySpec scalar_spec_from(const ResolvedConfig& cfg);
SurfaceParams surface_params_from(const ResolvedConfig& cfg);

/// Entry point used by the binary and by tests. args excludes argv[0].
/// Returns the process exit code; errors are printed to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace ncl::cli
