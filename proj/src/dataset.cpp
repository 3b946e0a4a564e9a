#include "chi/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace chi {

namespace {

constexpr const char* kNormalizedMark = "# chi-normalized v1";

auto trim(std::string s) -> std::string {
  auto notspace = [](unsigned char c) { return std::isspace(c) == 0; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

auto split_fields(const std::string& line, char delim) -> std::vector<std::string> {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

auto parse_number(const std::string& field, bool& ok) -> Scalar {
  const char* begin = field.c_str();
  char* end = nullptr;
  Scalar v = std::strtod(begin, &end);
  ok = end != begin && *end == '\0';
  return v;
}

auto median_of(std::vector<Scalar> v) -> Scalar {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

auto transform_name(Transform t) -> std::string {
  return t == Transform::Log1p ? "log1p" : "linear";
}

auto transform_from_name(const std::string& name) -> Transform {
  if (name == "linear") return Transform::Linear;
  if (name == "log1p") return Transform::Log1p;
  throw InputError("unknown transform '" + name + "' (expected linear or log1p)");
}

auto ConfigDataset::column_index(const std::string& name) const -> Index {
  for (Index j = 0; j < static_cast<Index>(columns.size()); ++j) {
    if (columns[static_cast<size_t>(j)] == name) return j;
  }
  return -1;
}

auto load_csv(const std::filesystem::path& path, const CsvOptions& opts) -> ConfigDataset {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file: " + path.string());

  ConfigDataset ds;
  ds.source_id = path.stem().string();

  std::string line;
  bool header_done = false;
  std::vector<std::string> header;
  std::vector<std::vector<Scalar>> value_rows;
  std::vector<Scalar> observed;
  Index target_col = -1;
  Index data_row = 0;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (trim(line) == kNormalizedMark) {
        ds.normalized = true;
        ds.transformed = true;
      }
      continue;
    }
    if (!header_done) {
      header = split_fields(line, opts.delimiter);
      if (header.size() < (opts.no_target ? 1u : 2u)) {
        throw InputError("header must name at least one CV and the observed column");
      }
      for (size_t i = 0; i < header.size(); ++i) {
        for (size_t j = i + 1; j < header.size(); ++j) {
          if (header[i] == header[j]) throw InputError("duplicate column name '" + header[i] + "'");
        }
      }
      if (opts.no_target) {
        target_col = -1;
      } else if (opts.target.empty()) {
        target_col = static_cast<Index>(header.size()) - 1;
      } else {
        for (size_t i = 0; i < header.size(); ++i) {
          if (header[i] == opts.target) target_col = static_cast<Index>(i);
        }
        if (target_col < 0) throw InputError("target column '" + opts.target + "' not found");
      }
      for (size_t i = 0; i < header.size(); ++i) {
        if (static_cast<Index>(i) != target_col) ds.columns.push_back(header[i]);
      }
      header_done = true;
      continue;
    }

    ++data_row;
    auto fields = split_fields(line, opts.delimiter);
    if (fields.size() != header.size()) {
      throw InputError("row " + std::to_string(data_row) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }

    Scalar o = std::numeric_limits<Scalar>::quiet_NaN();
    if (target_col >= 0) {
      const std::string& target_field = fields[static_cast<size_t>(target_col)];
      if (target_field.empty()) {
        ++ds.dropped_missing_observed;  // rows without the observed metric are rejected
        continue;
      }
      bool ok = false;
      o = parse_number(target_field, ok);
      if (!ok || !std::isfinite(o)) {
        throw InputError("row " + std::to_string(data_row) + ": observed column '" +
                         header[static_cast<size_t>(target_col)] + "' is not numeric: '" +
                         target_field + "'");
      }
    }

    std::vector<Scalar> row;
    row.reserve(header.size() - 1);
    for (size_t i = 0; i < fields.size(); ++i) {
      if (static_cast<Index>(i) == target_col) continue;
      if (fields[i].empty()) {
        row.push_back(std::numeric_limits<Scalar>::quiet_NaN());
        continue;
      }
      bool ok = false;
      Scalar v = parse_number(fields[i], ok);
      if (!ok) {
        throw InputError("row " + std::to_string(data_row) + ", column '" + header[i] +
                         "': not numeric: '" + fields[i] + "'");
      }
      row.push_back(v);
    }
    value_rows.push_back(std::move(row));
    observed.push_back(o);
  }

  if (!header_done) throw InputError("empty dataset file: " + path.string());
  if (value_rows.empty()) throw InputError("dataset has no usable rows: " + path.string());

  const auto n = static_cast<Index>(value_rows.size());
  const auto m = static_cast<Index>(ds.columns.size());
  ds.values.resize(n, m);
  ds.observed.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) ds.values(i, j) = value_rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    ds.observed(i) = observed[static_cast<size_t>(i)];
  }
  return ds;
}

void write_csv(const ConfigDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write dataset file: " + path.string());
  if (ds.normalized) out << kNormalizedMark << "\n";
  for (const auto& c : ds.columns) out << c << ",";
  out << "observed\n";
  for (Index i = 0; i < ds.rows(); ++i) {
    for (Index j = 0; j < ds.cols(); ++j) {
      Scalar v = ds.values(i, j);
      if (!std::isnan(v)) out << fmt6(v);
      out << ",";
    }
    out << fmt6(ds.observed(i)) << "\n";
  }
}

auto column_fill_values(const ConfigDataset& ds, FillStrategy strategy, Scalar constant)
    -> std::vector<Scalar> {
  std::vector<Scalar> fills(static_cast<size_t>(ds.cols()), constant);
  if (strategy == FillStrategy::Constant) return fills;
  for (Index j = 0; j < ds.cols(); ++j) {
    std::vector<Scalar> present;
    for (Index i = 0; i < ds.rows(); ++i) {
      if (!std::isnan(ds.values(i, j))) present.push_back(ds.values(i, j));
    }
    if (present.empty()) {
      throw InputError("column '" + ds.columns[static_cast<size_t>(j)] +
                       "' has no values to take a median from");
    }
    fills[static_cast<size_t>(j)] = median_of(std::move(present));
  }
  return fills;
}

auto fill_missing(const ConfigDataset& ds, const std::vector<Scalar>& fills) -> ConfigDataset {
  if (static_cast<Index>(fills.size()) != ds.cols()) {
    throw InputError("fill vector length does not match column count");
  }
  ConfigDataset out = ds;
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < out.rows(); ++i) {
      if (std::isnan(out.values(i, j))) out.values(i, j) = fills[static_cast<size_t>(j)];
    }
  }
  return out;
}

auto fill_missing(const ConfigDataset& ds, FillStrategy strategy, Scalar constant) -> ConfigDataset {
  return fill_missing(ds, column_fill_values(ds, strategy, constant));
}

auto drop_zero_observed(const ConfigDataset& ds) -> ConfigDataset {
  std::vector<Index> keep;
  for (Index i = 0; i < ds.rows(); ++i) {
    if (ds.observed(i) != 0.0) keep.push_back(i);
  }
  if (keep.empty()) throw InputError("all rows have zero observed metric");
  if (static_cast<Index>(keep.size()) == ds.rows()) return ds;
  ConfigDataset out = ds;
  out.values.resize(static_cast<Index>(keep.size()), ds.cols());
  out.observed.resize(static_cast<Index>(keep.size()));
  for (Index i = 0; i < static_cast<Index>(keep.size()); ++i) {
    out.values.row(i) = ds.values.row(keep[static_cast<size_t>(i)]);
    out.observed(i) = ds.observed(keep[static_cast<size_t>(i)]);
  }
  return out;
}

auto identity_stats(const ConfigDataset& ds) -> NormStats {
  NormStats stats;
  stats.columns = ds.columns;
  ColumnStats cs;
  cs.raw_min = kEpsNorm;
  cs.raw_max = 1.0;
  cs.fill = 0.5;
  stats.cvs.assign(static_cast<size_t>(ds.cols()), cs);
  stats.observed_min = kEpsNorm;
  stats.observed_max = 1.0;
  return stats;
}

auto apply_transform_value(Scalar v, Transform t) -> Scalar {
  if (t == Transform::Linear || std::isnan(v)) return v;
  return std::log1p(v);
}

auto apply_transform(const ConfigDataset& ds, const std::vector<Transform>& tags) -> ConfigDataset {
  if (ds.transformed) throw InputError("transform already applied to this dataset");
  if (static_cast<Index>(tags.size()) != ds.cols()) {
    throw InputError("transform tag count does not match column count");
  }
  ConfigDataset out = ds;
  for (Index j = 0; j < out.cols(); ++j) {
    if (tags[static_cast<size_t>(j)] == Transform::Linear) continue;
    for (Index i = 0; i < out.rows(); ++i) {
      Scalar v = out.values(i, j);
      if (std::isnan(v)) continue;
      if (v < 0) {
        throw InputError("row " + std::to_string(i + 1) + ", column '" +
                         out.columns[static_cast<size_t>(j)] +
                         "': negative value in a log1p column");
      }
      out.values(i, j) = std::log1p(v);
    }
  }
  out.transformed = true;
  return out;
}

auto fit_stats(const ConfigDataset& ds, const std::vector<Transform>& tags,
               const std::vector<Scalar>& fills) -> NormStats {
  if (ds.rows() < 1) throw InputError("cannot fit normalization stats on an empty dataset");
  if (static_cast<Index>(tags.size()) != ds.cols()) {
    throw InputError("transform tag count does not match column count");
  }
  NormStats stats;
  stats.columns = ds.columns;
  stats.cvs.resize(static_cast<size_t>(ds.cols()));
  for (Index j = 0; j < ds.cols(); ++j) {
    auto& cs = stats.cvs[static_cast<size_t>(j)];
    cs.transform = tags[static_cast<size_t>(j)];
    cs.fill = fills.empty() ? 0.0 : fills[static_cast<size_t>(j)];
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Index i = 0; i < ds.rows(); ++i) {
      Scalar v = ds.values(i, j);
      if (std::isnan(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) throw InputError("column '" + ds.columns[static_cast<size_t>(j)] + "' is entirely missing");
    cs.raw_min = lo;
    cs.raw_max = hi;
    cs.degenerate = lo == hi;
  }
  stats.observed_min = ds.observed.minCoeff();
  stats.observed_max = ds.observed.maxCoeff();
  stats.observed_degenerate = stats.observed_min == stats.observed_max;
  return stats;
}

auto NormStats::column(const std::string& name) const -> Index {
  for (Index j = 0; j < static_cast<Index>(columns.size()); ++j) {
    if (columns[static_cast<size_t>(j)] == name) return j;
  }
  return -1;
}

auto NormStats::normalize_value(Index col, Scalar post_transform) const -> Scalar {
  const auto& cs = cvs.at(static_cast<size_t>(col));
  if (cs.degenerate) return 1.0;
  Scalar s = (post_transform - cs.raw_min) / (cs.raw_max - cs.raw_min);
  Scalar v = eps + (1.0 - eps) * s;
  return std::clamp(v, eps, 1.0);
}

auto NormStats::denormalize_value(Index col, Scalar normalized) const -> Scalar {
  const auto& cs = cvs.at(static_cast<size_t>(col));
  if (cs.degenerate) return cs.raw_min;
  Scalar s = (normalized - eps) / (1.0 - eps);
  return cs.raw_min + s * (cs.raw_max - cs.raw_min);
}

auto NormStats::normalize_observed(Scalar raw) const -> Scalar {
  if (observed_degenerate) return 1.0;
  Scalar s = (raw - observed_min) / (observed_max - observed_min);
  return std::clamp(eps + (1.0 - eps) * s, eps, 1.0);
}

auto normalize(const ConfigDataset& ds, const NormStats& stats) -> ConfigDataset {
  if (ds.normalized) throw InputError("dataset is already normalized");
  if (stats.columns != ds.columns) throw InputError("normalization stats do not match dataset columns");
  ConfigDataset out = ds;
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < out.rows(); ++i) {
      Scalar v = out.values(i, j);
      if (std::isnan(v)) {
        throw InputError("missing value at row " + std::to_string(i + 1) + ", column '" +
                         out.columns[static_cast<size_t>(j)] + "'; fill_missing must run first");
      }
      out.values(i, j) = stats.normalize_value(j, v);
    }
  }
  for (Index i = 0; i < out.rows(); ++i) out.observed(i) = stats.normalize_observed(out.observed(i));
  out.normalized = true;
  out.transformed = true;
  return out;
}

}  // namespace chi
