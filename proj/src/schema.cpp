#include "chi/schema.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace chi {

using nlohmann::json;

auto shape_name(CvShape s) -> std::string {
  return s == CvShape::Unimodal ? "unimodal" : "monotonic";
}

auto shape_from_name(const std::string& name) -> CvShape {
  if (name == "monotonic") return CvShape::Monotonic;
  if (name == "unimodal") return CvShape::Unimodal;
  throw InputError("unknown shape '" + name + "' (expected monotonic or unimodal)");
}

auto role_name(CvRole r) -> std::string {
  switch (r) {
    case CvRole::Strong: return "strong";
    case CvRole::Weak: return "weak";
    case CvRole::Unimportant: return "unimportant";
    default: return "dominant";
  }
}

auto role_from_name(const std::string& name) -> CvRole {
  if (name == "dominant") return CvRole::Dominant;
  if (name == "strong") return CvRole::Strong;
  if (name == "weak") return CvRole::Weak;
  if (name == "unimportant") return CvRole::Unimportant;
  throw InputError("unknown role '" + name + "' (expected dominant, strong, weak or unimportant)");
}

auto severity_name(Severity s) -> std::string {
  switch (s) {
    case Severity::Error: return "error";
    case Severity::Warning: return "warning";
    default: return "info";
  }
}

auto CvSchema::find(const std::string& name) const -> const CvSpec* {
  for (const auto& cv : cvs) {
    if (cv.name == name) return &cv;
  }
  return nullptr;
}

auto CvSchema::transforms_for(const std::vector<std::string>& columns) const
    -> std::vector<Transform> {
  std::vector<Transform> tags;
  tags.reserve(columns.size());
  for (const auto& c : columns) {
    const CvSpec* spec = find(c);
    tags.push_back(spec != nullptr ? spec->transform : Transform::Linear);
  }
  return tags;
}

auto load_schema(const std::filesystem::path& path) -> CvSchema {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schema file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("schema parse error in " + path.string() + ": " + e.what());
  }
  if (!j.contains("cvs") || !j["cvs"].is_array()) {
    throw InputError("schema file must carry a top-level 'cvs' array");
  }
  CvSchema schema;
  for (const auto& item : j["cvs"]) {
    CvSpec cv;
    if (!item.contains("name")) throw InputError("schema entry missing 'name'");
    cv.name = item["name"].get<std::string>();
    if (item.contains("min")) cv.min = item["min"].get<Scalar>();
    if (item.contains("max")) cv.max = item["max"].get<Scalar>();
    if (item.contains("shape")) cv.shape = shape_from_name(item["shape"].get<std::string>());
    if (item.contains("transform")) cv.transform = transform_from_name(item["transform"].get<std::string>());
    if (item.contains("role")) cv.role = role_from_name(item["role"].get<std::string>());
    if (item.contains("parent")) cv.parent = item["parent"].get<std::string>();
    if (item.contains("a")) cv.a = item["a"].get<Scalar>();
    if (item.contains("b")) cv.b = item["b"].get<Scalar>();
    if (item.contains("R")) cv.radius = item["R"].get<Scalar>();
    schema.cvs.push_back(std::move(cv));
  }
  return schema;
}

void save_schema(const CvSchema& schema, const std::filesystem::path& path) {
  json j;
  j["cvs"] = json::array();
  for (const auto& cv : schema.cvs) {
    json item;
    item["name"] = cv.name;
    if (cv.min) item["min"] = *cv.min;
    if (cv.max) item["max"] = *cv.max;
    item["shape"] = shape_name(cv.shape);
    item["transform"] = transform_name(cv.transform);
    item["role"] = role_name(cv.role);
    if (!cv.parent.empty()) item["parent"] = cv.parent;
    if (cv.role == CvRole::Strong || cv.role == CvRole::Weak) {
      item["a"] = cv.a;
      item["b"] = cv.b;
    }
    if (cv.role == CvRole::Weak) item["R"] = cv.radius;
    j["cvs"].push_back(std::move(item));
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write schema file: " + path.string());
  out << j.dump(2) << "\n";
}

namespace {

// Follows parent edges from every node; repeats inside one walk mean a cycle.
auto find_cycle(const CvSchema& schema) -> std::string {
  for (const auto& start : schema.cvs) {
    std::set<std::string> seen;
    const CvSpec* cur = &start;
    while (cur != nullptr && !cur->parent.empty()) {
      if (!seen.insert(cur->name).second) return start.name;
      cur = schema.find(cur->parent);
    }
    if (cur != nullptr && seen.count(cur->name) > 0) return start.name;
  }
  return {};
}

}  // namespace

auto validate_schema(const CvSchema& schema, const ConfigDataset& ds) -> std::vector<Finding> {
  std::vector<Finding> findings;
  auto add = [&findings](Severity s, std::string msg) {
    findings.push_back({s, std::move(msg)});
  };

  for (const auto& cv : schema.cvs) {
    if (ds.column_index(cv.name) < 0) {
      add(Severity::Error, "schema CV '" + cv.name + "' is absent from the data");
    }
    if (cv.min && cv.max && !(*cv.min < *cv.max)) {
      add(Severity::Error, "CV '" + cv.name + "': min must be strictly below max");
    }
    if (cv.role == CvRole::Strong || cv.role == CvRole::Weak) {
      if (cv.parent.empty()) {
        add(Severity::Error, "dependent CV '" + cv.name + "' names no parent");
      } else {
        const CvSpec* parent = schema.find(cv.parent);
        if (parent == nullptr) {
          add(Severity::Error, "CV '" + cv.name + "': parent '" + cv.parent + "' is not in the schema");
        } else if (parent->role != CvRole::Dominant) {
          add(Severity::Error, "CV '" + cv.name + "': parent '" + cv.parent + "' must be dominant");
        }
      }
    }
    if (cv.role == CvRole::Weak && (cv.radius < 0.0 || cv.radius > 1.0)) {
      add(Severity::Error, "CV '" + cv.name + "': uncertainty radius must lie in [0,1]");
    }
  }

  if (auto where = find_cycle(schema); !where.empty()) {
    add(Severity::Error, "dependency cycle through CV '" + where + "'");
  }

  for (const auto& col : ds.columns) {
    if (schema.find(col) == nullptr) {
      add(Severity::Warning, "CV '" + col + "' defaulted: dominant, monotonic, data-derived bounds");
    }
  }

  for (const auto& cv : schema.cvs) {
    Index j = ds.column_index(cv.name);
    if (j < 0 || (!cv.min && !cv.max)) continue;
    Index outside = 0;
    for (Index i = 0; i < ds.rows(); ++i) {
      Scalar v = ds.values(i, j);
      if (std::isnan(v)) continue;
      if ((cv.min && v < *cv.min) || (cv.max && v > *cv.max)) ++outside;
    }
    if (outside > 0) {
      add(Severity::Warning, "CV '" + cv.name + "': " + std::to_string(outside) +
                                 " value(s) outside the expert bounds");
    }
  }

  return findings;
}

auto effective_schema(const CvSchema& schema, const ConfigDataset& ds,
                      std::vector<Finding>* findings) -> CvSchema {
  auto found = validate_schema(schema, ds);
  if (findings != nullptr) *findings = found;
  std::string errors;
  for (const auto& f : found) {
    if (f.severity == Severity::Error) {
      if (!errors.empty()) errors += "; ";
      errors += f.message;
    }
  }
  if (!errors.empty()) throw InputError("schema validation failed: " + errors);

  CvSchema out;
  out.cvs.reserve(ds.columns.size());
  for (const auto& col : ds.columns) {
    const CvSpec* spec = schema.find(col);
    if (spec != nullptr) {
      out.cvs.push_back(*spec);
    } else {
      CvSpec def;
      def.name = col;
      out.cvs.push_back(std::move(def));
    }
  }
  return out;
}

auto build_layout(const CvSchema& schema, const NormStats& stats) -> ModelLayout {
  ModelLayout layout;
  for (Index j = 0; j < static_cast<Index>(stats.columns.size()); ++j) {
    const std::string& name = stats.columns[static_cast<size_t>(j)];
    const CvSpec* spec = schema.find(name);
    CvRole role = spec != nullptr ? spec->role : CvRole::Dominant;
    if (role != CvRole::Dominant && role != CvRole::Weak) continue;

    LayoutEntry e;
    e.name = name;
    e.column = j;
    e.shape = spec != nullptr ? spec->shape : CvShape::Monotonic;
    e.role = role;
    const auto& cs = stats.cvs[static_cast<size_t>(j)];
    e.degenerate = cs.degenerate;
    if (spec != nullptr && spec->min) {
      e.lo = stats.normalize_value(j, apply_transform_value(*spec->min, cs.transform));
    }
    if (spec != nullptr && spec->max) {
      e.hi = stats.normalize_value(j, apply_transform_value(*spec->max, cs.transform));
    }
    if (!(e.lo < e.hi)) e.degenerate = true;

    if (role == CvRole::Weak) {
      e.parent_column = stats.column(spec->parent);
      if (e.parent_column < 0) {
        throw InputError("weak CV '" + name + "': parent column '" + spec->parent + "' not found");
      }
      e.a = spec->a;
      e.b = spec->b;
      e.radius = spec->radius;
      e.weak_slot = layout.weak_count++;
    }
    layout.entries.push_back(std::move(e));
  }
  if (layout.entries.empty()) throw InputError("no participating CVs: schema leaves nothing to model");
  return layout;
}

auto resolve_dependents(const Vector& norm_row, const ModelLayout& layout, const Vector& offsets)
    -> Vector {
  if (offsets.size() != layout.weak_count) {
    throw InputError("offset vector length does not match the weak CV count");
  }
  Vector out(layout.size());
  for (Index i = 0; i < layout.size(); ++i) {
    const auto& e = layout.entries[static_cast<size_t>(i)];
    if (e.role == CvRole::Dominant) {
      out(i) = norm_row(e.column);
      continue;
    }
    Scalar r = offsets(e.weak_slot);
    if (std::abs(r) > e.radius + 1e-12) {
      throw InputError("weak CV '" + e.name + "': offset " + std::to_string(r) +
                       " outside [-R, R] with R=" + std::to_string(e.radius));
    }
    Scalar predicted = (e.a * norm_row(e.parent_column) + e.b) * (1.0 + r);
    out(i) = std::clamp(predicted, kEpsNorm, 1.0);
  }
  return out;
}

auto pca_rank(const ConfigDataset& ds) -> ReductionReport {
  if (!ds.normalized) throw InputError("pca_rank expects normalized data");
  ReductionReport report;
  const Index n = ds.rows();
  const Index m = ds.cols();
  if (n <= m) {
    report.warnings.push_back("row count " + std::to_string(n) +
                              " does not exceed CV count " + std::to_string(m) +
                              "; ranking may be unstable");
  }

  Vector scores = Vector::Zero(m);
  if (n >= 2) {
    Matrix centered = ds.values.rowwise() - ds.values.colwise().mean();
    Matrix cov = centered.transpose() * centered / static_cast<Scalar>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    Vector lambda = eig.eigenvalues().cwiseMax(0.0);
    Scalar total = lambda.sum();
    if (total > 0.0) {
      for (Index j = 0; j < m; ++j) {
        scores += (lambda(j) / total) * eig.eigenvectors().col(j).cwiseAbs();
      }
    } else {
      report.warnings.push_back("zero-variance matrix; all importance scores are 0");
    }
  } else {
    report.warnings.push_back("single-row dataset; all importance scores are 0");
  }

  std::vector<Index> order(static_cast<size_t>(m));
  for (Index j = 0; j < m; ++j) order[static_cast<size_t>(j)] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&scores](Index a, Index b) { return scores(a) > scores(b); });

  std::vector<Scalar> sorted(scores.data(), scores.data() + m);
  std::sort(sorted.begin(), sorted.end());
  Scalar median = m % 2 == 1 ? sorted[static_cast<size_t>(m / 2)]
                             : 0.5 * (sorted[static_cast<size_t>(m / 2 - 1)] +
                                      sorted[static_cast<size_t>(m / 2)]);

  for (size_t rank = 0; rank < order.size(); ++rank) {
    Index j = order[rank];
    CvImportance entry;
    entry.cv = ds.columns[static_cast<size_t>(j)];
    entry.score = scores(j);
    entry.rank = static_cast<int>(rank) + 1;
    entry.recommendation = (scores(j) == 0.0 || scores(j) < 0.5 * median) ? "drop" : "keep";
    report.entries.push_back(std::move(entry));
  }
  return report;
}

void write_reduction_csv(const ReductionReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write reduction report: " + path.string());
  out << "cv,score,rank,recommendation\n";
  for (const auto& e : report.entries) {
    out << e.cv << "," << fmt6(e.score) << "," << e.rank << "," << e.recommendation << "\n";
  }
}

}  // namespace chi
