#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace chi {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

// Lower edge of the normalized value band [kEpsNorm, 1].
inline constexpr Scalar kEpsNorm = 1e-3;
// Health output floor; keeps logs finite.
inline constexpr Scalar kEpsHealth = 1e-3;
// Gradient pass-through slope while the health floor is active.
inline constexpr Scalar kLeakSlope = 1e-3;

inline constexpr Scalar kEtaLo = 0.01;
inline constexpr Scalar kEtaHi = 50.0;
inline constexpr Scalar kGammaHi = 0.999;

// Bad inputs: files, schemas, flags, contract violations. CLI exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures while computing: divergence, singular systems. CLI exit code 1.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed 6-decimal rendering used by every text artifact.
inline auto fmt6(Scalar v) -> std::string {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace chi
