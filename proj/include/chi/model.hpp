#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "chi/dataset.hpp"
#include "chi/schema.hpp"
#include "chi/types.hpp"

namespace chi {

// Saturating growth curve on s in [0,1]: (1 - e^{-eta s}) / (1 - e^{-eta}).
// Hits 0 at s=0 and 1 at s=1 for every eta; the analytic eta->0 limit is s.
template <typename T>
auto rising_health(T s, T eta) -> T {
  if (std::abs(eta) < T(1e-6)) return s;
  return std::expm1(-eta * s) / std::expm1(-eta);
}

// d rising_health / d s.
template <typename T>
auto rising_slope(T s, T eta) -> T {
  if (std::abs(eta) < T(1e-6)) return T(1);
  return eta * std::exp(-eta * s) / (-std::expm1(-eta));
}

// d rising_health / d eta; vanishes at both endpoints of s.
template <typename T>
auto rising_grad_eta(T s, T eta) -> T {
  if (std::abs(eta) < T(1e-6)) return s * (T(1) - s) / T(2);
  T em = -std::expm1(-eta);       // 1 - e^{-eta}
  T ems = -std::expm1(-eta * s);  // 1 - e^{-eta s}
  return (s * std::exp(-eta * s) * em - ems * std::exp(-eta)) / (em * em);
}

// Health curve of one CV over its normalized range [lo, hi].
struct CvCurve {
  std::string cv;
  CvShape shape = CvShape::Monotonic;
  Scalar eta = 1.0;
  Scalar gamma = 0.1;   // unimodal falling branch: maximum fractional drop
  Scalar p_mode = 0.5;  // unimodal peak position, normalized units
  Scalar lo = kEpsNorm;
  Scalar hi = 1.0;
  bool inert = false;  // degenerate column: h == 1 and no vote in the mean
};

// Curve value before the floor. Unimodal curves rise to exactly 1 at p_mode
// and fall linearly to 1 - gamma at hi.
auto curve_health_raw(const CvCurve& c, Scalar p) -> Scalar;
// max(kEpsHealth, curve_health_raw).
auto curve_health(const CvCurve& c, Scalar p) -> Scalar;
// Partials of the raw curve; zero outside the branch that owns the parameter.
auto curve_grad_eta(const CvCurve& c, Scalar p) -> Scalar;
auto curve_grad_gamma(const CvCurve& c, Scalar p) -> Scalar;
auto curve_slope(const CvCurve& c, Scalar p) -> Scalar;  // d raw / d p

// Geometric mean in log space; errors on any h <= 0.
auto aggregate(const Vector& h) -> Scalar;

// n_points uniform samples of p over [0, 1]; unimodal curves get an exact
// sample at p_mode as well.
auto curve_samples(const CvCurve& c, Index n_points)
    -> std::vector<std::pair<Scalar, Scalar>>;
void write_curve_csv(const CvCurve& c, Index n_points, const std::filesystem::path& path);

// Learned linear link of a weak CV to its dominant parent.
struct WeakLink {
  std::string cv;
  std::string parent;
  Scalar a = 1.0;
  Scalar b = 0.0;
  Scalar radius = 0.0;
  Scalar r = 0.0;  // learned offset, |r| <= radius
};

struct ModelMeta {
  Index epochs = 0;
  Scalar final_mse = 0.0;
  std::uint64_t seed = 0;
};

// Immutable after training; scoring is pure and thread-safe.
struct HealthModel {
  std::vector<CvCurve> curves;  // participating CVs, data-column order
  std::vector<WeakLink> weak;   // weak links in offset-slot order
  NormStats stats;
  ModelMeta meta;
};

void save_model(const HealthModel& model, const std::filesystem::path& path);
auto load_model(const std::filesystem::path& path) -> HealthModel;

// H for one row of resolved participating values; h_out receives the per-CV
// breakdown (inert CVs report 1 and do not vote). All-inert rows score 1.
auto score_resolved(const std::vector<CvCurve>& curves, const Vector& resolved,
                    Vector* h_out = nullptr) -> Scalar;

// Column bindings of the model against a concrete dataset layout.
auto bind_layout(const HealthModel& model, const std::vector<std::string>& columns) -> ModelLayout;
auto weak_offset_vector(const HealthModel& model) -> Vector;

struct ScoreResult {
  Vector H;
  Matrix h;                      // rows x participating CVs
  std::vector<std::string> cvs;  // breakdown column order
};

// Full inference pipeline: raw data gets the stored fill/transform/normalize
// treatment; pre-normalized data is scored as-is.
auto score(const HealthModel& model, const ConfigDataset& ds) -> ScoreResult;

}  // namespace chi
