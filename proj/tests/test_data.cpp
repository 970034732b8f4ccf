#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <utility>

#include "helpers.hpp"
#include "ncl/data.hpp"
#include "ncl/ensemble.hpp"
#include "ncl/errors.hpp"

using namespace ncl;
using ncl::test::TempDir;
using ncl::test::write_file;

TEST_CASE("spiral geometry: t = 0 sits at radius zero") {
  const Eigen::Vector2d p = spiral_point(0, 0.0, 2.0);
  CHECK(p.norm() == 0.0);
}

TEST_CASE("spiral geometry: the two arms are reflections through the origin") {
  for (double t : {0.1, 1.0, 3.5, 7.0, 12.0}) {
    const Eigen::Vector2d a = spiral_point(0, t, 2.0);
    const Eigen::Vector2d b = spiral_point(1, t, 2.0);
    CHECK(b.x() == doctest::Approx(-a.x()).epsilon(1e-12));
    CHECK(b.y() == doctest::Approx(-a.y()).epsilon(1e-12));
  }
}

TEST_CASE("gen_spirals: exact class balance and reproducibility") {
  SpiralsSpec spec;
  spec.points_per_arm = 57;
  spec.seed = 42;
  const Dataset a = gen_spirals(spec);
  CHECK(a.size() == 114);
  Index pos = 0, neg = 0;
  for (Index i = 0; i < a.size(); ++i) (a.targets(i, 0) > 0 ? pos : neg)++;
  CHECK(pos == 57);
  CHECK(neg == 57);

  const Dataset b = gen_spirals(spec);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);

  SpiralsSpec other = spec;
  other.seed = 43;
  const Dataset c = gen_spirals(other);
  CHECK((a.features - c.features).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gen_spirals: noiseless points lie on the parametric curve") {
  SpiralsSpec spec;
  spec.points_per_arm = 40;
  spec.noise_std = 0.0;
  spec.seed = 7;
  const Dataset ds = gen_spirals(spec);
  for (Index i = 0; i < ds.size(); ++i) {
    const double r = ds.features.row(i).norm();
    // Radius determines the parameter: t = r * span. Reconstruct and compare.
    const double span = spec.turns * 2.0 * std::numbers::pi;
    const double t = r * span;
    const int arm = ds.targets(i, 0) > 0 ? 0 : 1;
    const Eigen::Vector2d p = spiral_point(arm, t, spec.turns);
    CHECK(p.x() == doctest::Approx(ds.features(i, 0)).epsilon(1e-9));
    CHECK(p.y() == doctest::Approx(ds.features(i, 1)).epsilon(1e-9));
  }
}

TEST_CASE("scalar toy: lambda = 0 follows the closed-form contraction") {
  ScalarToySpec spec;
  spec.seed = 5;
  const ScalarToy toy = gen_scalar_toy(spec);
  const Matrix traj = scalar_ncl_dynamics(toy.initial_values, spec.target, 0.0,
                                          spec.learning_rate, spec.iterations);
  // |f_n - y| = (1 - gamma)^n |f_0 - y|, per regressor.
  const double contraction = std::pow(1.0 - spec.learning_rate, spec.iterations);
  for (Index i = 0; i < toy.initial_values.size(); ++i) {
    const double expected = contraction * std::abs(toy.initial_values(i) - spec.target);
    CHECK(std::abs(traj(spec.iterations, i) - spec.target) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("scalar toy: K = 1 sees no diversity force") {
  Vector init(1);
  init << 2.0;
  const Matrix with_lambda = scalar_ncl_dynamics(init, -1.5, 0.4, 0.1, 20);
  const Matrix without = scalar_ncl_dynamics(init, -1.5, 0.0, 0.1, 20);
  CHECK((with_lambda - without).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar toy: ensemble mean obeys the lambda = 0 recurrence for any lambda") {
  ScalarToySpec spec;
  spec.seed = 11;
  const ScalarToy toy = gen_scalar_toy(spec);
  for (double lambda : {0.0, 1e-3, 5e-3, 1e-2, 0.25}) {
    const Matrix traj = scalar_ncl_dynamics(toy.initial_values, spec.target, lambda,
                                            spec.learning_rate, spec.iterations);
    double mean = toy.initial_values.mean();
    for (int n = 1; n <= spec.iterations; ++n) {
      mean = mean - spec.learning_rate * (mean - spec.target);
      CHECK(traj.row(n).mean() == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("scalar toy: seeded inits are inside the range and reproducible") {
  ScalarToySpec spec;
  spec.seed = 123;
  const ScalarToy a = gen_scalar_toy(spec);
  const ScalarToy b = gen_scalar_toy(spec);
  CHECK((a.initial_values - b.initial_values).cwiseAbs().maxCoeff() == 0.0);
  for (Index i = 0; i < a.initial_values.size(); ++i) {
    CHECK(a.initial_values(i) >= spec.init_lo);
    CHECK(a.initial_values(i) < spec.init_hi);
  }
  CHECK(a.dataset.targets(0, 0) == -1.5);
}

TEST_CASE("load_csv: plain two-row numeric file") {
  TempDir dir("csv");
  write_file(dir.str("d.csv"), "1.0,2.0,3.0\n4.0,5.0,6.0\n");
  const Dataset ds = load_csv(dir.str("d.csv"), parse_columns("0,1"), parse_columns("2"));
  CHECK(ds.size() == 2);
  CHECK(ds.feature_dim() == 2);
  CHECK(ds.targets(1, 0) == 6.0);
}

TEST_CASE("load_csv: header names select columns") {
  TempDir dir("csv_hdr");
  write_file(dir.str("d.csv"), "x,y,label\n0.5,1.5,1\n-0.5,-1.5,-1\n");
  const Dataset ds = load_csv(dir.str("d.csv"), parse_columns("x,y"), parse_columns("label"));
  CHECK(ds.size() == 2);
  CHECK(ds.features(0, 1) == 1.5);
  CHECK(ds.target_names == std::vector<std::string>{"label"});
  CHECK_THROWS_AS(load_csv(dir.str("d.csv"), parse_columns("x,nope"), parse_columns("label")),
                  CsvError);
}

TEST_CASE("load_csv: missing cell error carries row and column") {
  TempDir dir("csv_missing");
  write_file(dir.str("d.csv"), "x,y\n1.0,2.0\n3.0,\n");
  try {
    load_csv(dir.str("d.csv"), parse_columns("x"), parse_columns("y"));
    FAIL("expected CsvError");
  } catch (const CsvError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
}

TEST_CASE("load_csv: non-numeric cell error carries coordinates") {
  TempDir dir("csv_bad");
  write_file(dir.str("d.csv"), "1.0,2.0\n3.0,oops\n");
  try {
    load_csv(dir.str("d.csv"), parse_columns("0"), parse_columns("1"));
    FAIL("expected CsvError");
  } catch (const CsvError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("oops") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
  }
}

TEST_CASE("load_csv: header-only file is an empty-dataset error") {
  TempDir dir("csv_empty");
  write_file(dir.str("d.csv"), "x,y\n");
  CHECK_THROWS_AS(load_csv(dir.str("d.csv"), parse_columns("x"), parse_columns("y")), CsvError);
}

TEST_CASE("split: fraction 0 leaves the test side empty") {
  SpiralsSpec spec;
  spec.points_per_arm = 10;
  const Dataset ds = gen_spirals(spec);
  const auto [train, test] = split(ds, 0.0, 1);
  CHECK(test.size() == 0);
  CHECK(train.size() == 20);
}

TEST_CASE("split: 0.5 on ten samples gives five and five") {
  SpiralsSpec spec;
  spec.points_per_arm = 5;
  const Dataset ds = gen_spirals(spec);
  const auto [train, test] = split(ds, 0.5, 9);
  CHECK(train.size() == 5);
  CHECK(test.size() == 5);
}

TEST_CASE("split: same seed, identical partition; partition is exhaustive") {
  SpiralsSpec spec;
  spec.points_per_arm = 16;
  spec.seed = 3;
  const Dataset ds = gen_spirals(spec);
  const auto [train_a, test_a] = split(ds, 0.3, 77);
  const auto [train_b, test_b] = split(ds, 0.3, 77);
  CHECK((train_a.features - train_b.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK((test_a.features - test_b.features).cwiseAbs().maxCoeff() == 0.0);

  // Disjoint and exhaustive: every original row appears exactly once.
  std::multiset<std::pair<double, double>> original, recovered;
  for (Index i = 0; i < ds.size(); ++i)
    original.insert({ds.features(i, 0), ds.features(i, 1)});
  for (Index i = 0; i < train_a.size(); ++i)
    recovered.insert({train_a.features(i, 0), train_a.features(i, 1)});
  for (Index i = 0; i < test_a.size(); ++i)
    recovered.insert({test_a.features(i, 0), test_a.features(i, 1)});
  CHECK(original == recovered);
}

TEST_CASE("generator validation errors") {
  SpiralsSpec bad;
  bad.points_per_arm = 0;
  CHECK_THROWS_AS(gen_spirals(bad), std::invalid_argument);
  ScalarToySpec bad_toy;
  bad_toy.iterations = 0;
  CHECK_THROWS_AS(gen_scalar_toy(bad_toy), std::invalid_argument);
}
