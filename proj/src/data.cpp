#include "ncl/data.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ncl/csv.hpp"
#include "ncl/errors.hpp"

namespace ncl {

Eigen::Vector2d spiral_point(int arm, double t, double turns) {
  const double span = turns * 2.0 * std::numbers::pi;
  const double r = span > 0.0 ? t / span : 0.0;
  const double phase = t + (arm == 0 ? 0.0 : std::numbers::pi);
  return {r * std::cos(phase), r * std::sin(phase)};
}

Dataset gen_spirals(const SpiralsSpec& spec) {
  if (spec.points_per_arm < 1) throw std::invalid_argument("spirals: points_per_arm must be >= 1");
  if (spec.noise_std < 0.0) throw std::invalid_argument("spirals: noise_std must be >= 0");

  const int n = 2 * spec.points_per_arm;
  Dataset ds;
  ds.name = "spirals";
  ds.feature_names = {"x", "y"};
  ds.target_names = {"label"};
  ds.features.resize(n, 2);
  ds.targets.resize(n, 1);

  Rng rng(spec.seed);
  const double span = spec.turns * 2.0 * std::numbers::pi;
  Index row = 0;
  for (int arm = 0; arm < 2; ++arm) {
    for (int i = 0; i < spec.points_per_arm; ++i, ++row) {
      const double t = rng.uniform(0.0, span);
      Eigen::Vector2d p = spiral_point(arm, t, spec.turns);
      p.x() += spec.noise_std * rng.gaussian();
      p.y() += spec.noise_std * rng.gaussian();
      ds.features(row, 0) = p.x();
      ds.features(row, 1) = p.y();
      ds.targets(row, 0) = arm == 0 ? 1.0 : -1.0;
    }
  }
  return ds;
}

ScalarToy gen_scalar_toy(const ScalarToySpec& spec) {
  if (spec.regressors < 1) throw std::invalid_argument("scalar toy: regressors must be >= 1");
  if (spec.iterations < 1) throw std::invalid_argument("scalar toy: iterations must be >= 1");
  if (!(spec.init_lo <= spec.init_hi))
    throw std::invalid_argument("scalar toy: init range is empty");

  ScalarToy toy;
  toy.dataset.name = "scalar_toy";
  toy.dataset.feature_names = {"bias"};
  toy.dataset.target_names = {"target"};
  toy.dataset.features = Matrix::Ones(1, 1);
  toy.dataset.targets = Matrix::Constant(1, 1, spec.target);

  Rng rng(spec.seed);
  toy.initial_values.resize(spec.regressors);
  for (int i = 0; i < spec.regressors; ++i)
    toy.initial_values(i) = rng.uniform(spec.init_lo, spec.init_hi);
  return toy;
}

std::vector<ColumnRef> parse_columns(const std::string& spec) {
  std::vector<ColumnRef> cols;
  std::string cur;
  auto flush = [&] {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    std::string token = b == std::string::npos ? std::string() : cur.substr(b, e - b + 1);
    cur.clear();
    if (token.empty()) return;
    bool numeric = true;
    for (char ch : token)
      if (ch < '0' || ch > '9') numeric = false;
    if (numeric)
      cols.push_back(ColumnRef::by_index(std::stoll(token)));
    else
      cols.push_back(ColumnRef::named(token));
  };
  for (char ch : spec) {
    if (ch == ',')
      flush();
    else
      cur.push_back(ch);
  }
  flush();
  return cols;
}

namespace {

Index resolve_column(const CsvTable& table, const ColumnRef& ref, const std::string& path) {
  if (!ref.by_name) {
    if (ref.index < 0 || static_cast<std::size_t>(ref.index) >= table.column_count())
      throw CsvError(path + ": column index " + std::to_string(ref.index) +
                     " out of range (file has " + std::to_string(table.column_count()) +
                     " columns)");
    return ref.index;
  }
  for (std::size_t i = 0; i < table.header.size(); ++i)
    if (table.header[i] == ref.name) return static_cast<Index>(i);
  throw CsvError(path + ": no column named '" + ref.name + "'" +
                 (table.header.empty() ? " (file has no header row)" : ""));
}

std::string column_label(const CsvTable& table, Index col) {
  if (!table.header.empty()) return table.header[static_cast<std::size_t>(col)];
  return "col" + std::to_string(col);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<ColumnRef>& feature_cols,
                 const std::vector<ColumnRef>& target_cols) {
  if (feature_cols.empty() || target_cols.empty())
    throw CsvError(path + ": feature and target column lists must be non-empty");
  const CsvTable table = read_csv(path);
  if (table.rows.empty()) throw CsvError(path + ": no data rows (empty dataset)");

  std::vector<Index> fidx, tidx;
  for (const auto& ref : feature_cols) fidx.push_back(resolve_column(table, ref, path));
  for (const auto& ref : target_cols) tidx.push_back(resolve_column(table, ref, path));

  Dataset ds;
  ds.name = path;
  const Index n = static_cast<Index>(table.rows.size());
  ds.features.resize(n, static_cast<Index>(fidx.size()));
  ds.targets.resize(n, static_cast<Index>(tidx.size()));
  for (Index r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < fidx.size(); ++c)
      ds.features(r, static_cast<Index>(c)) =
          parse_cell(table, static_cast<std::size_t>(r), static_cast<std::size_t>(fidx[c]));
    for (std::size_t c = 0; c < tidx.size(); ++c)
      ds.targets(r, static_cast<Index>(c)) =
          parse_cell(table, static_cast<std::size_t>(r), static_cast<std::size_t>(tidx[c]));
  }
  for (Index c : fidx) ds.feature_names.push_back(column_label(table, c));
  for (Index c : tidx) ds.target_names.push_back(column_label(table, c));
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw std::invalid_argument("split: test_fraction must be in [0, 1]");
  const Index n = dataset.size();
  const Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * test_fraction));

  Rng rng(seed);
  const std::vector<Index> order = shuffled_indices(n, rng);

  auto take = [&](Index begin, Index count) {
    Dataset part;
    part.name = dataset.name;
    part.feature_names = dataset.feature_names;
    part.target_names = dataset.target_names;
    part.features.resize(count, dataset.features.cols());
    part.targets.resize(count, dataset.targets.cols());
    for (Index i = 0; i < count; ++i) {
      part.features.row(i) = dataset.features.row(order[static_cast<std::size_t>(begin + i)]);
      part.targets.row(i) = dataset.targets.row(order[static_cast<std::size_t>(begin + i)]);
    }
    return part;
  };

  Dataset test = take(0, n_test);
  Dataset train = take(n_test, n - n_test);
  return {std::move(train), std::move(test)};
}

}  // namespace ncl
