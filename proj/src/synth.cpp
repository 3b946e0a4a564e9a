#include "chi/synth.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace chi {

namespace {

auto splitmix64(std::uint64_t& x) -> std::uint64_t {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

auto uniform01(std::uint64_t& state) -> Scalar {
  return static_cast<Scalar>(splitmix64(state) >> 11) * 0x1.0p-53;  // [0, 1)
}

auto row_state(std::uint64_t seed, Index row) -> std::uint64_t {
  return seed ^ (0xD1B54A32D192ED03ull * (static_cast<std::uint64_t>(row) + 1));
}

auto gaussian(std::uint64_t& state) -> Scalar {
  Scalar u1 = uniform01(state);
  Scalar u2 = uniform01(state);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

auto generate(const SynthSpec& spec) -> std::pair<ConfigDataset, HealthModel> {
  if (spec.cvs < 1) throw InputError("synth: need at least one CV");
  if (spec.rows < 1) throw InputError("synth: need at least one row");
  if (spec.noise_sigma < 0.0) throw InputError("synth: noise_sigma must be non-negative");
  if (!spec.shapes.empty() && static_cast<Index>(spec.shapes.size()) != spec.cvs) {
    throw InputError("synth: shapes list must match the CV count");
  }

  ConfigDataset ds;
  ds.source_id = "synth:seed=" + std::to_string(spec.seed);
  ds.transformed = true;
  ds.normalized = true;
  for (Index m = 0; m < spec.cvs; ++m) ds.columns.push_back("cv" + std::to_string(m + 1));
  ds.values.resize(spec.rows, spec.cvs);
  ds.observed.resize(spec.rows);

  HealthModel truth;
  std::uint64_t param_state = spec.seed;
  for (Index m = 0; m < spec.cvs; ++m) {
    CvCurve c;
    c.cv = ds.columns[static_cast<size_t>(m)];
    c.shape = spec.shapes.empty()
                  ? (m % 2 == 0 ? CvShape::Monotonic : CvShape::Unimodal)
                  : spec.shapes[static_cast<size_t>(m)];
    c.eta = 1.0 + 7.0 * uniform01(param_state);
    c.gamma = 0.05 + 0.25 * uniform01(param_state);
    c.p_mode = 0.5 + 0.4 * uniform01(param_state);
    truth.curves.push_back(std::move(c));
  }
  truth.stats = identity_stats(ds);
  truth.meta.seed = spec.seed;

  Vector row(spec.cvs);
  for (Index n = 0; n < spec.rows; ++n) {
    std::uint64_t state = row_state(spec.seed, n);
    for (Index m = 0; m < spec.cvs; ++m) {
      row(m) = kEpsNorm + (1.0 - kEpsNorm) * uniform01(state);
    }
    ds.values.row(n) = row.transpose();
    Scalar O = score_resolved(truth.curves, row);
    if (spec.noise_sigma > 0.0) {
      O = std::clamp(O + spec.noise_sigma * gaussian(state), kEpsNorm, 1.0);
    }
    ds.observed(n) = O;
  }

  return {std::move(ds), std::move(truth)};
}

}  // namespace chi
