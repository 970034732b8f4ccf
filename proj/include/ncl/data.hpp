#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ncl/rng.hpp"
#include "ncl/types.hpp"

namespace ncl {

struct Dataset {
  Matrix features;  // N x D
  Matrix targets;   // N x O
  std::string name;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  Index size() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  Index target_dim() const { return targets.cols(); }
};

/// Two interleaved spiral arms with binary +/-1 targets. Arm s contributes
/// points r(t) * (cos(t + s*pi), sin(t + s*pi)) with t uniform in
/// [0, turns*2*pi], r(t) = t / (turns*2*pi), plus Gaussian noise.
struct SpiralsSpec {
  int points_per_arm = 200;
  double turns = 2.0;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
};

/// Noise-free geometry of one spiral point; arm 1 is the arm-0 point
/// reflected through the origin.
Eigen::Vector2d spiral_point(int arm, double t, double turns);

/// Deterministic per seed. Arm 0 ('+1') points come first, then arm 1
/// ('-1'); each point draws t, then noise x, then noise y.
Dataset gen_spirals(const SpiralsSpec& spec);

/// The scalar convergence toy: K independent scalar regressors pulled
/// toward one constant target by gradient descent on the NCL objective.
struct ScalarToySpec {
  double target = -1.5;
  int regressors = 6;
  int iterations = 30;
  double learning_rate = 0.1;
  double init_lo = -4.0;
  double init_hi = 1.0;
  std::uint64_t seed = 0;
};

struct ScalarToy {
  Dataset dataset;        // single sample: feature 1.0, target as configured
  Vector initial_values;  // K seeded initial scalars
};

ScalarToy gen_scalar_toy(const ScalarToySpec& spec);

/// Column selector: a header name or a 0-based index.
struct ColumnRef {
  std::string name;  // used when by_name
  Index index = -1;  // used otherwise
  bool by_name = false;

  static ColumnRef by_index(Index i) { return {{}, i, false}; }
  static ColumnRef named(std::string n) { return {std::move(n), -1, true}; }
};

/// Parse a comma-separated column list; integer tokens become indices,
/// anything else a header name.
std::vector<ColumnRef> parse_columns(const std::string& spec);

/// Strict CSV ingestion: declared columns must exist, every referenced cell
/// must be numeric, and the file must contain at least one data row.
/// Failures raise CsvError with row/column coordinates.
Dataset load_csv(const std::string& path, const std::vector<ColumnRef>& feature_cols,
                 const std::vector<ColumnRef>& target_cols);

/// Seeded permutation split. Test size is round(N * test_fraction); the
/// two halves are disjoint and exhaustive.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                  std::uint64_t seed);

}  // namespace ncl
