#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "chi/dataset.hpp"
#include "chi/model.hpp"
#include "chi/types.hpp"

namespace chi {

struct SynthSpec {
  Index cvs = 6;
  Index rows = 200;
  Scalar noise_sigma = 0.0;  // Gaussian noise on O, normalized units
  std::uint64_t seed = 0;
  std::vector<CvShape> shapes;  // per CV; empty alternates monotonic/unimodal
};

// Seed-deterministic dataset drawn from a random ground-truth model. O runs
// through the same forward path the scorer uses, so at zero noise scoring the
// returned dataset with the returned model reproduces O exactly.
auto generate(const SynthSpec& spec) -> std::pair<ConfigDataset, HealthModel>;

}  // namespace chi
