#include "rcc/moment_match.hpp"

#include <cmath>
#include <limits>

namespace rcc {

MomentField empirical_moment(std::span<const SymbolGrid> samples, const PairwiseFamily& family) {
  if (samples.empty()) throw FormatError("empirical moment needs at least one sample");
  const LatticeShape shape(samples[0].rows(), samples[0].cols());
  MomentField sum = MomentField::zeros(shape);
  for (const auto& x : samples) {
    if (x.rows() != shape.rows || x.cols() != shape.cols) throw LayoutMismatch("samples differ in shape");
    sum += statistic_field(x, family);
  }
  sum *= 1.0 / static_cast<double>(samples.size());
  return sum;
}

MomentField empirical_moment(std::span<const SymbolGrid> images, std::span<const RowRange> blocks,
                             const PairwiseFamily& family) {
  if (images.empty() || blocks.empty()) throw FormatError("empirical moment needs at least one block");
  const Index height = blocks[0].size();
  const Index cols = images[0].cols();
  MomentField sum = MomentField::zeros(LatticeShape(height, cols));
  for (const auto& x : images) {
    if (x.cols() != cols) throw LayoutMismatch("images differ in width");
    for (const auto& b : blocks) {
      if (b.size() != height || b.begin < 0 || b.end > x.rows()) throw LayoutMismatch("block outside image");
      sum += statistic_field(x.middleRows(b.begin, height), family);
    }
  }
  sum *= 1.0 / static_cast<double>(images.size() * blocks.size());
  return sum;
}

ObjectiveValue evaluate_objective(const MomentField& target, const LatticeModel& reduced, std::size_t state_cap) {
  if (!(target.shape() == reduced.shape())) throw LayoutMismatch("target and block shapes differ");
  ObjectiveValue out;
  const LatticeShape s = reduced.shape();
  if (s.rows <= s.cols) {
    const ChainPosterior post(column_chain(reduced, nullptr, state_cap));
    out.log_partition = post.log_partition();
    out.moments = column_chain_moments(reduced, post);
  } else {
    const ChainPosterior post(row_chain(reduced, state_cap));
    out.log_partition = post.log_partition();
    out.moments = row_chain_moments(reduced, post);
  }
  out.value = out.log_partition - target.dot(reduced.theta);
  return out;
}

double objective(const MomentField& target, const LatticeModel& reduced, std::size_t state_cap) {
  return evaluate_objective(target, reduced, state_cap).value;
}

MomentField objective_gradient(const MomentField& target, const LatticeModel& reduced, std::size_t state_cap) {
  return evaluate_objective(target, reduced, state_cap).moments - target;
}

MomentField shrink_toward_uniform(const MomentField& target, const PairwiseFamily& family, double factor) {
  if (!(factor >= 0.0 && factor <= 1.0)) throw FormatError("shrink factor must lie in [0, 1]");
  return (1.0 - factor) * target + factor * uniform_moments(family, target.shape());
}

FitResult fit(const PairwiseFamily& family, const MomentField& target, const BlockParameters& init,
              const FitOptions& options) {
  if (!(init.shape() == target.shape())) throw LayoutMismatch("initial parameter and target shapes differ");
  if (!(options.tolerance > 0.0) || options.max_iter < 0 || !(options.shrink > 0.0 && options.shrink < 1.0) ||
      !(options.armijo > 0.0 && options.armijo < 0.5) || !(options.initial_step > 0.0)) {
    throw FormatError("invalid fit options");
  }

  FitResult result;
  result.target = target;
  result.armijo = options.armijo;
  result.shrink = options.shrink;
  result.initial_step = options.initial_step;

  const double margin = hull_margin(target, family);
  if (margin <= 0.0) {
    throw HullBoundary("target moment lies on or outside the moment hull (margin " + std::to_string(margin) + ")");
  }
  if (margin < 1e-9) result.warnings.push_back("target moment within 1e-9 of the hull boundary");

  LatticeModel model(family, init);
  ObjectiveValue cur = evaluate_objective(target, model, options.state_cap);
  MomentField grad = cur.moments - target;
  result.objective_trace.push_back(cur.value);

  auto finish = [&](bool converged) {
    result.theta = model.theta;
    result.achieved = cur.moments;
    result.gradient_norm = grad.max_abs();
    result.converged = converged;
    return result;
  };

  // Changes below this are indistinguishable from evaluation noise.
  auto round_off = [](double f) { return 1e-13 * (1.0 + std::abs(f)); };

  for (int it = 0; it < options.max_iter; ++it) {
    if (grad.max_abs() < options.tolerance) return finish(true);
    const double g2 = grad.dot(grad);
    double step = options.initial_step;
    bool accepted = false;
    while (step > 1e-30) {
      LatticeModel trial(family, model.theta - step * grad);
      ObjectiveValue next = evaluate_objective(target, trial, options.state_cap);
      bool ok = next.value <= cur.value - options.armijo * step * g2;
      if (!ok && next.value <= cur.value + round_off(cur.value)) {
        // Measured decrease is below evaluation noise. The objective is
        // convex, so a non-positive directional derivative at the trial point
        // certifies descent over the whole step.
        const MomentField next_grad = next.moments - target;
        if (next_grad.dot(grad) >= 0.0) {
          ok = true;
          ++result.round_off_steps;
        }
      }
      if (ok) {
        model = std::move(trial);
        cur = std::move(next);
        grad = cur.moments - target;
        accepted = true;
        break;
      }
      step *= options.shrink;
    }
    ++result.iterations;
    result.objective_trace.push_back(cur.value);
    if (!accepted) break;  // line search exhausted: stuck at round-off level
  }
  if (grad.max_abs() < options.tolerance) return finish(true);
  FitResult best = finish(false);
  throw DidNotConverge("moment matching stopped after " + std::to_string(best.iterations) +
                           " iterations with gradient " + std::to_string(best.gradient_norm),
                       best);
}

}  // namespace rcc
