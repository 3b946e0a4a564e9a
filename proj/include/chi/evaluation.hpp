#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "chi/dataset.hpp"
#include "chi/model.hpp"
#include "chi/schema.hpp"
#include "chi/training.hpp"
#include "chi/types.hpp"

namespace chi {

struct SplitSpec {
  Scalar ratio = 0.8;  // train fraction
  std::uint64_t seed = 0;
  bool shuffle = true;
};

// Seeded Fisher-Yates shuffle, then the first ceil(ratio*N) rows train; both
// sides come back in ascending row order.
auto split_indices(Index n, const SplitSpec& spec)
    -> std::pair<std::vector<Index>, std::vector<Index>>;
auto take_rows(const ConfigDataset& ds, const std::vector<Index>& rows) -> ConfigDataset;
auto split(const ConfigDataset& ds, const SplitSpec& spec)
    -> std::pair<ConfigDataset, ConfigDataset>;
auto index_hash(const std::vector<Index>& rows) -> std::uint64_t;

// Protocol: drop zero-observed rows, split, then freeze fills, transforms and
// normalization on the train side and apply them to both. Pre-normalized data
// only gets the split.
struct PreparedSplit {
  ConfigDataset train;
  ConfigDataset test;
  NormStats stats;
  std::uint64_t train_hash = 0;
  std::uint64_t test_hash = 0;
};

auto prepare_split(const ConfigDataset& raw, const CvSchema& schema, const SplitSpec& spec)
    -> PreparedSplit;

struct ExperimentReport {
  EvalReport eval;
  Index n_train = 0;
  Index n_test = 0;
  Scalar runtime_ms = 0.0;
};

struct ExperimentResult {
  ExperimentReport report;
  HealthModel model;
  TrainTrace trace;
};

auto run_experiment(const ConfigDataset& raw, const CvSchema& schema,
                    const TrainOptions& train_opts, const SplitSpec& split_spec)
    -> ExperimentResult;

auto report_filename(const std::string& dataset, Scalar ratio, std::uint64_t seed) -> std::string;
auto curve_filename(const std::string& dataset, const std::string& cv) -> std::string;

void write_experiment_report(const ExperimentReport& report, const std::filesystem::path& path);

struct ArtifactPaths {
  std::filesystem::path report;
  std::filesystem::path model;
  std::filesystem::path trace;
  std::vector<std::filesystem::path> curves;
};

// Report, model, trace and per-CV curve samples under out_dir.
auto emit_artifacts(const ExperimentResult& result, const std::string& dataset, Scalar ratio,
                    std::uint64_t seed, const std::filesystem::path& out_dir,
                    Index curve_points = 101, bool svg = false) -> ArtifactPaths;

// Self-contained SVG line chart of one curve.
void write_curve_svg(const CvCurve& curve, Index n_points, const std::filesystem::path& path);

}  // namespace chi
