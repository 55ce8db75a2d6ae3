#pragma once

// Moment matching for reduced MRFs on row blocks.
//
// The objective over a block parameter theta is the empirical cross entropy
// up to a sample-independent constant,
//
//   H(theta) = Phi_U(theta) - <target, theta>,
//
// with gradient mu(theta) - target. Minimized by plain gradient descent with
// a backtracking line search.

#include <span>
#include <string>
#include <vector>

#include "rcc/chain.hpp"
#include "rcc/lattice.hpp"

namespace rcc {

struct FitOptions {
  double tolerance = 1e-6;  // stop when max |gradient| < tolerance
  int max_iter = 10000;
  double armijo = 1e-4;
  double shrink = 0.5;
  double initial_step = 1.0;
  std::size_t state_cap = default_state_cap();
};

struct FitResult {
  BlockParameters theta;
  MomentField target;
  MomentField achieved;
  double gradient_norm = 0.0;  // max |achieved - target|
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective at every accepted iterate
  std::vector<std::string> warnings;
  // line search settings actually used
  double armijo = 0.0;
  double shrink = 0.0;
  double initial_step = 0.0;
  int round_off_steps = 0;  // steps accepted by the round-off fallback
};

class DidNotConverge : public Error {
 public:
  DidNotConverge(const std::string& what, FitResult best) : Error(what), best_(std::move(best)) {}
  const FitResult& best() const { return best_; }

 private:
  FitResult best_;
};

// Mean of t_U over samples. Each sample is a configuration of the block.
MomentField empirical_moment(std::span<const SymbolGrid> samples, const PairwiseFamily& family);

// Pools over images and over equally sized row blocks within each image.
MomentField empirical_moment(std::span<const SymbolGrid> images, std::span<const RowRange> blocks,
                             const PairwiseFamily& family);

struct ObjectiveValue {
  double value = 0.0;
  double log_partition = 0.0;
  MomentField moments;  // mu(theta)
};

// One forward-backward pass gives both the objective and the moments.
ObjectiveValue evaluate_objective(const MomentField& target, const LatticeModel& reduced,
                                  std::size_t state_cap = default_state_cap());

double objective(const MomentField& target, const LatticeModel& reduced, std::size_t state_cap = default_state_cap());
MomentField objective_gradient(const MomentField& target, const LatticeModel& reduced,
                               std::size_t state_cap = default_state_cap());

// Throws HullBoundary when a target component is on or outside the interval
// of its statistic table, DidNotConverge after max_iter iterations.
FitResult fit(const PairwiseFamily& family, const MomentField& target, const BlockParameters& init,
              const FitOptions& options = {});

// (1 - factor) target + factor uniform moments; pulls a degenerate empirical
// target off the hull boundary.
MomentField shrink_toward_uniform(const MomentField& target, const PairwiseFamily& family, double factor = 1e-6);

}  // namespace rcc
