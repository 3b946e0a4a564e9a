#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "chi/dataset.hpp"
#include "chi/evaluation.hpp"
#include "chi/schema.hpp"
#include "chi/training.hpp"
#include "chi/types.hpp"

namespace chi {

struct LinearModel {
  Vector beta;                 // [intercept, slope per column], length L+1
  std::vector<Index> dropped;  // zero-variance columns pinned to slope 0
  std::vector<std::string> warnings;
};

// Normal equations with 1e-8 diagonal jitter for rank safety.
auto ols_fit(const Matrix& X, const Vector& Y) -> LinearModel;
auto ols_predict(const LinearModel& model, const Matrix& X) -> Vector;

struct HingeTerm {
  Index cv = 0;
  Scalar knot = 0.0;
  int sign = 1;  // +1: max(0, x-K), -1: max(0, K-x)
  Scalar coef = 0.0;
};

// MARS-lite: forward pass only, mirrored hinge pairs, no interactions.
struct HingeModel {
  std::vector<HingeTerm> terms;
  Scalar intercept = 0.0;
  std::vector<Scalar> train_mse;  // after each accepted pair; non-increasing
};

auto hinge_fit(const Matrix& X, const Vector& Y, Index max_terms = 16,
               Scalar min_improvement = 1e-5) -> HingeModel;
auto hinge_predict(const HingeModel& model, const Matrix& X) -> Vector;

struct MethodRow {
  std::string method;  // chi | ols | hinge
  Scalar train_mse = 0.0;
  Scalar test_mse = 0.0;
  Scalar variance = 0.0;             // of per-row squared test residuals
  std::vector<std::string> ignored;  // CVs with |influence| < 1e-6
  std::uint64_t split_hash = 0;
};

struct ComparisonReport {
  std::vector<MethodRow> rows;  // chi, ols, hinge
};

struct CompareOptions {
  TrainOptions train;
  Scalar ratio = 0.8;
  std::uint64_t split_seed = 0;
  Index max_terms = 16;
  Scalar min_improvement = 1e-5;
};

// Per-CV reach of each learned curve: h at the top of the normalized range
// minus h at the bottom (inert curves report 0).
auto chi_influence(const HealthModel& model) -> std::vector<std::pair<std::string, Scalar>>;

// All three methods on one shared split and normalization.
auto compare(const ConfigDataset& ds, const CvSchema& schema, const CompareOptions& opts)
    -> ComparisonReport;

void write_comparison_csv(const ComparisonReport& report, const std::filesystem::path& path);

}  // namespace chi
