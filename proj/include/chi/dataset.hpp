#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chi/types.hpp"

namespace chi {

enum class Transform { Linear, Log1p };

auto transform_name(Transform t) -> std::string;
auto transform_from_name(const std::string& name) -> Transform;

// Tabular configuration data: N rows of M CV values plus one observed metric.
// Missing CV cells are stored as NaN until fill_missing runs.
struct ConfigDataset {
  std::vector<std::string> columns;  // M CV names
  Matrix values;                     // N x M
  Vector observed;                   // N
  std::string source_id;
  bool transformed = false;  // apply_transform already ran; it must run at most once
  bool normalized = false;
  Index dropped_missing_observed = 0;  // rows rejected at load

  [[nodiscard]] auto rows() const -> Index { return values.rows(); }
  [[nodiscard]] auto cols() const -> Index { return values.cols(); }
  [[nodiscard]] auto column_index(const std::string& name) const -> Index;  // -1 if absent
};

struct CsvOptions {
  char delimiter = ',';
  std::string target;     // observed column name; empty selects the last column
  bool no_target = false;  // score-only data: every column is a CV, observed = NaN
};

auto load_csv(const std::filesystem::path& path, const CsvOptions& opts = {}) -> ConfigDataset;
// Normalized datasets are written with a `# chi-normalized v1` provenance line.
void write_csv(const ConfigDataset& ds, const std::filesystem::path& path);

enum class FillStrategy { Median, Constant };

auto column_fill_values(const ConfigDataset& ds, FillStrategy strategy, Scalar constant = 0.0)
    -> std::vector<Scalar>;
auto fill_missing(const ConfigDataset& ds, const std::vector<Scalar>& fills) -> ConfigDataset;
auto fill_missing(const ConfigDataset& ds, FillStrategy strategy, Scalar constant = 0.0)
    -> ConfigDataset;

// Drops rows whose observed metric is exactly zero (trace-data cleaning).
auto drop_zero_observed(const ConfigDataset& ds) -> ConfigDataset;

struct ColumnStats {
  Scalar raw_min = 0.0;  // post-transform units
  Scalar raw_max = 1.0;
  Transform transform = Transform::Linear;
  Scalar fill = 0.0;        // raw units, applied before the transform
  bool degenerate = false;  // raw_min == raw_max; the column normalizes to 1.0
};

// Affine normalization [raw_min, raw_max] -> [eps, 1], frozen on the training split.
struct NormStats {
  std::vector<std::string> columns;
  std::vector<ColumnStats> cvs;
  Scalar observed_min = 0.0;
  Scalar observed_max = 1.0;
  bool observed_degenerate = false;
  Scalar eps = kEpsNorm;

  [[nodiscard]] auto normalize_value(Index col, Scalar post_transform) const -> Scalar;
  [[nodiscard]] auto denormalize_value(Index col, Scalar normalized) const -> Scalar;
  [[nodiscard]] auto normalize_observed(Scalar raw) const -> Scalar;
  [[nodiscard]] auto column(const std::string& name) const -> Index;
};

// Stats that make normalize a no-op on data already in [eps, 1].
auto identity_stats(const ConfigDataset& ds) -> NormStats;

auto apply_transform_value(Scalar v, Transform t) -> Scalar;
// tags align with ds.columns; errors on negative values in log1p columns.
auto apply_transform(const ConfigDataset& ds, const std::vector<Transform>& tags) -> ConfigDataset;
auto fit_stats(const ConfigDataset& ds, const std::vector<Transform>& tags,
               const std::vector<Scalar>& fills = {}) -> NormStats;
auto normalize(const ConfigDataset& ds, const NormStats& stats) -> ConfigDataset;

}  // namespace chi
