#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chi/dataset.hpp"
#include "chi/model.hpp"
#include "chi/schema.hpp"
#include "chi/types.hpp"

namespace chi {

enum class Objective { Plain, Log };

auto objective_name(Objective o) -> std::string;
auto objective_from_name(const std::string& name) -> Objective;

struct TrainOptions {
  Scalar alpha = 0.5;
  Index max_epochs = 500;
  std::optional<Scalar> target_mse;  // early stop once epoch MSE falls to this
  Objective objective = Objective::Plain;
  std::uint64_t seed = 0;
  Index mode_grid = 9;  // p_mode candidates per refresh
  Scalar eta_lo = kEtaLo;
  Scalar eta_hi = kEtaHi;
  Scalar gamma_hi = kGammaHi;
};

struct TrainTrace {
  std::vector<Scalar> mse;       // per epoch, after that epoch's updates
  std::vector<Scalar> max_grad;  // per epoch, max |batch gradient| entry
  Vector params;                 // best parameters seen, packed [eta.. gamma.. r..]
  Scalar duration_seconds = 0.0;
};

auto mse(const Vector& H, const Vector& O, Objective objective) -> Scalar;

// Parameter vector layout shared by grad_params and TrainTrace::params:
// [eta_0..eta_{P-1}, gamma_0..gamma_{P-1}, r_0..r_{W-1}] with P curves in
// layout order and W weak slots. Monotonic CVs keep a zero gamma gradient.
auto pack_params(const std::vector<CvCurve>& curves, const ModelLayout& layout,
                 const Vector& offsets) -> Vector;

// Training MSE of the given parameters over normalized rows.
auto training_mse(const Matrix& values, const Vector& observed,
                  const std::vector<CvCurve>& curves, const ModelLayout& layout,
                  const Vector& offsets, Objective objective) -> Scalar;

// Batch MSE gradient: per-row chain products summed with the (2/N) factor.
// Floored health values contribute through the leaky slope.
auto grad_params(const Matrix& values, const Vector& observed,
                 const std::vector<CvCurve>& curves, const ModelLayout& layout,
                 const Vector& offsets, Objective objective) -> Vector;

// Gradient-descent fit of eta/gamma/weak offsets with periodic p_mode grid
// refresh. Expects normalized data; stats (identity when omitted) are stored
// in the returned model for later raw-data scoring.
auto fit(const ConfigDataset& ds, const CvSchema& schema, const TrainOptions& opts = {},
         const NormStats* stats = nullptr) -> std::pair<HealthModel, TrainTrace>;

struct EvalReport {
  Scalar mse = 0.0;
  Scalar variance = 0.0;  // population variance of per-row squared residuals
  Vector H;
  Vector O;
  Objective objective = Objective::Plain;
};

auto evaluate_holdout(const HealthModel& model, const ConfigDataset& test,
                      Objective objective = Objective::Plain) -> EvalReport;

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);
void write_eval_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace chi
