#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chi/dataset.hpp"
#include "chi/types.hpp"

namespace chi {

enum class CvShape { Monotonic, Unimodal };
enum class CvRole { Dominant, Strong, Weak, Unimportant };

auto shape_name(CvShape s) -> std::string;
auto shape_from_name(const std::string& name) -> CvShape;
auto role_name(CvRole r) -> std::string;
auto role_from_name(const std::string& name) -> CvRole;

// Expert knowledge for one CV. Dependents follow f(p) = a*p + b on their
// parent's normalized value; weak dependents add a learned offset bounded by radius.
struct CvSpec {
  std::string name;
  std::optional<Scalar> min;  // expert bound, raw units (pre-transform)
  std::optional<Scalar> max;
  CvShape shape = CvShape::Monotonic;
  Transform transform = Transform::Linear;
  CvRole role = CvRole::Dominant;
  std::string parent;   // strong/weak dependents only
  Scalar a = 1.0;
  Scalar b = 0.0;
  Scalar radius = 0.0;  // R_k, weak dependents only, in [0,1]
};

struct CvSchema {
  std::vector<CvSpec> cvs;

  [[nodiscard]] auto find(const std::string& name) const -> const CvSpec*;
  [[nodiscard]] auto transforms_for(const std::vector<std::string>& columns) const
      -> std::vector<Transform>;
};

auto load_schema(const std::filesystem::path& path) -> CvSchema;
void save_schema(const CvSchema& schema, const std::filesystem::path& path);

enum class Severity { Info, Warning, Error };

struct Finding {
  Severity severity = Severity::Info;
  std::string message;
};

auto severity_name(Severity s) -> std::string;

// Non-throwing check of schema against data; hard problems come back as Error findings.
auto validate_schema(const CvSchema& schema, const ConfigDataset& ds) -> std::vector<Finding>;

// Validated schema covering every data column; unknown CVs default to
// dominant/monotonic. Throws InputError when validation finds errors.
auto effective_schema(const CvSchema& schema, const ConfigDataset& ds,
                      std::vector<Finding>* findings = nullptr) -> CvSchema;

// One participating CV (dominant or weak dependent) bound to its data column.
struct LayoutEntry {
  std::string name;
  Index column = -1;
  CvShape shape = CvShape::Monotonic;
  CvRole role = CvRole::Dominant;
  Scalar lo = kEpsNorm;  // curve bounds, normalized units
  Scalar hi = 1.0;
  bool degenerate = false;
  Index parent_column = -1;  // weak only
  Scalar a = 1.0;
  Scalar b = 0.0;
  Scalar radius = 0.0;
  Index weak_slot = -1;  // index into the offset vector, -1 for dominant CVs
};

struct ModelLayout {
  std::vector<LayoutEntry> entries;  // participating CVs in data-column order
  Index weak_count = 0;

  [[nodiscard]] auto size() const -> Index { return static_cast<Index>(entries.size()); }
};

auto build_layout(const CvSchema& schema, const NormStats& stats) -> ModelLayout;

// Participating values for one normalized row: dominant CVs pass through,
// weak dependents become f(parent)*(1+r), clamped into the normalized band.
auto resolve_dependents(const Vector& norm_row, const ModelLayout& layout, const Vector& offsets)
    -> Vector;

struct CvImportance {
  std::string cv;
  Scalar score = 0.0;
  int rank = 0;
  std::string recommendation;  // keep | drop
  std::string decision;        // expert decision, initially empty
};

struct ReductionReport {
  std::vector<CvImportance> entries;  // sorted by descending score
  std::vector<std::string> warnings;
};

// Advisory PCA ranking; never drops CVs on its own.
auto pca_rank(const ConfigDataset& ds) -> ReductionReport;
void write_reduction_csv(const ReductionReport& report, const std::filesystem::path& path);

}  // namespace chi
