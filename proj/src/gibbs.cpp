#include "rcc/gibbs.hpp"

#include <cmath>

#include "rcc/chain.hpp"
#include "rcc/checksum.hpp"

namespace rcc {

void SamplerConfig::validate() const {
  if (burn_in < 0 || thinning < 1 || sample_count < 1) {
    throw FormatError("sampler needs burn_in >= 0, thinning >= 1 and sample_count >= 1");
  }
}

GibbsSampler::GibbsSampler(LatticeModel model, std::uint64_t seed)
    : model_(std::move(model)), rng_(seed), weights_(model_.alphabet_size()) {
  const LatticeShape s = model_.shape();
  const int q = model_.alphabet_size();
  state_.resize(s.rows, s.cols);
  for (Index r = 0; r < s.rows; ++r)
    for (Index c = 0; c < s.cols; ++c) state_(r, c) = std::min(q - 1, static_cast<int>(uniform01(rng_) * q));
}

void GibbsSampler::sweep() {
  const LatticeShape s = model_.shape();
  const int q = model_.alphabet_size();
  const auto& t = model_.family.node_stat();
  const auto& th = model_.family.edge_stat_h();
  const auto& tv = model_.family.edge_stat_v();
  const auto& theta = model_.theta;

  for (Index r = 0; r < s.rows; ++r) {
    for (Index c = 0; c < s.cols; ++c) {
      double top = -INFINITY;
      for (int a = 0; a < q; ++a) {
        double e = theta.node(r, c) * t(a);
        if (c > 0) e += theta.horizontal(r, c - 1) * th(state_(r, c - 1), a);
        if (c + 1 < s.cols) e += theta.horizontal(r, c) * th(a, state_(r, c + 1));
        if (r > 0) e += theta.vertical(r - 1, c) * tv(state_(r - 1, c), a);
        if (r + 1 < s.rows) e += theta.vertical(r, c) * tv(a, state_(r + 1, c));
        weights_(a) = e;
        top = std::max(top, e);
      }
      double total = 0.0;
      for (int a = 0; a < q; ++a) total += (weights_(a) = std::exp(weights_(a) - top));

      const double u = uniform01(rng_) * total;
      double acc = 0.0;
      int pick = q - 1;
      for (int a = 0; a < q; ++a) {
        acc += weights_(a);
        if (u < acc) {
          pick = a;
          break;
        }
      }
      state_(r, c) = pick;
    }
  }
}

std::vector<SymbolGrid> gibbs_sample(const LatticeModel& model, const SamplerConfig& config) {
  config.validate();
  GibbsSampler sampler(model, config.seed);
  for (int i = 0; i < config.burn_in; ++i) sampler.sweep();
  std::vector<SymbolGrid> out;
  out.reserve(config.sample_count);
  for (int n = 0; n < config.sample_count; ++n) {
    for (int i = 0; i < config.thinning; ++i) sampler.sweep();
    out.push_back(sampler.state());
  }
  return out;
}

std::uint64_t model_hash(const LatticeModel& model) {
  ByteWriter w;
  const auto& f = model.family;
  w.u8(static_cast<std::uint8_t>(f.alphabet_size()));
  w.u32(static_cast<std::uint32_t>(model.shape().rows));
  w.u32(static_cast<std::uint32_t>(model.shape().cols));
  w.doubles(f.node_stat());
  w.doubles(f.edge_stat_h().reshaped<Eigen::RowMajor>());
  w.doubles(f.edge_stat_v().reshaped<Eigen::RowMajor>());
  w.doubles(model.theta.flatten());
  return crc64(w.bytes());
}

}  // namespace rcc
