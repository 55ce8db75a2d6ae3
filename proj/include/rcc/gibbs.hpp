#pragma once

// Single-site Gibbs sampling of a lattice MRF in raster scan order.

#include <cstdint>
#include <random>
#include <vector>

#include "rcc/lattice.hpp"

namespace rcc {

// Recorded in manifests so a stream can be regenerated elsewhere: 64-bit
// Mersenne Twister, doubles from the top 53 bits of one output.
inline constexpr const char* kGeneratorId = "mt19937_64/u53";

struct SamplerConfig {
  int burn_in = 1000;  // sweeps before the first retained sample
  int thinning = 10;   // sweeps between retained samples
  std::uint64_t seed = 1;
  int sample_count = 1;

  void validate() const;
};

class GibbsSampler {
 public:
  // Initial state is uniform random.
  GibbsSampler(LatticeModel model, std::uint64_t seed);

  void sweep();
  const SymbolGrid& state() const { return state_; }
  const LatticeModel& model() const { return model_; }

 private:
  LatticeModel model_;
  std::mt19937_64 rng_;
  SymbolGrid state_;
  Eigen::VectorXd weights_;
};

std::vector<SymbolGrid> gibbs_sample(const LatticeModel& model, const SamplerConfig& config);

// CRC-64 of the family tables and parameters, for manifests.
std::uint64_t model_hash(const LatticeModel& model);

}  // namespace rcc
