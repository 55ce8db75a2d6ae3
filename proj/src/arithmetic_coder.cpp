#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rcc/codec.hpp"

namespace rcc {

namespace {

constexpr std::uint64_t kHalf = 1ull << 31;
constexpr std::uint64_t kQuarter = 1ull << 30;
constexpr std::uint64_t kThreeQuarters = 3ull << 30;

}  // namespace

QuantizedPmf::QuantizedPmf(std::vector<std::uint32_t> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw FormatError("empty symbol table");
  if (counts_.size() > kMaxSymbols) throw TooManySymbols("more than 4096 symbols");
  cumulative_.assign(counts_.size() + 1, 0);
  for (std::size_t s = 0; s < counts_.size(); ++s) {
    if (counts_[s] == 0) throw FormatError("symbol count must be positive");
    cumulative_[s + 1] = cumulative_[s] + counts_[s];
  }
  if (cumulative_.back() != kTotal) throw FormatError("symbol counts must sum to 65536");
}

double QuantizedPmf::bits(std::size_t s) const { return 16.0 - std::log2(static_cast<double>(counts_[s])); }

QuantizedPmf quantize_pmf(std::span<const double> pmf) {
  const std::size_t n = pmf.size();
  if (n == 0) throw FormatError("empty pmf");
  if (n > QuantizedPmf::kMaxSymbols) throw TooManySymbols("pmf has " + std::to_string(n) + " symbols");
  double sum = 0.0;
  for (double p : pmf) {
    if (!std::isfinite(p) || p < 0.0) throw FormatError("pmf entries must be finite and non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw FormatError("pmf does not sum to 1");

  const double total = static_cast<double>(QuantizedPmf::kTotal);
  std::vector<std::uint32_t> counts(n);
  std::vector<double> remainder(n);
  std::uint64_t assigned = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const double scaled = pmf[s] / sum * total;
    const double fl = std::floor(scaled);
    counts[s] = static_cast<std::uint32_t>(fl);
    remainder[s] = scaled - fl;
    assigned += counts[s];
  }

  if (assigned > QuantizedPmf::kTotal) {
    // Only reachable through rounding of pmf / sum; trim the largest.
    while (assigned > QuantizedPmf::kTotal) {
      auto it = std::max_element(counts.begin(), counts.end());
      --*it;
      --assigned;
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < QuantizedPmf::kTotal; ++i, ++assigned) ++counts[order[i % n]];

  for (std::size_t s = 0; s < n; ++s) {
    if (counts[s] != 0) continue;
    // max_element returns the first maximum: lowest index on ties.
    auto donor = std::max_element(counts.begin(), counts.end());
    --*donor;
    counts[s] = 1;
  }
  return QuantizedPmf(std::move(counts));
}

QuantizedPmf quantize_pmf(const Eigen::VectorXd& pmf) {
  return quantize_pmf(std::span<const double>(pmf.data(), static_cast<std::size_t>(pmf.size())));
}

// ---------------------------------------------------------------------------

void ArithmeticEncoder::emit(int bit) {
  if (bits_ % 8 == 0) out_.push_back(0);
  if (bit) out_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
  ++bits_;
}

void ArithmeticEncoder::emit_with_pending(int bit) {
  emit(bit);
  for (; pending_ > 0; --pending_) emit(!bit);
}

void ArithmeticEncoder::encode(std::size_t symbol, const QuantizedPmf& pmf) {
  if (finished_) throw FormatError("encoder already finished");
  if (symbol >= pmf.size()) throw FormatError("symbol outside coding table");
  const std::uint64_t range = high_ - low_ + 1;
  high_ = low_ + range * pmf.high(symbol) / QuantizedPmf::kTotal - 1;
  low_ = low_ + range * pmf.low(symbol) / QuantizedPmf::kTotal;
  for (;;) {
    if (high_ < kHalf) {
      emit_with_pending(0);
    } else if (low_ >= kHalf) {
      emit_with_pending(1);
      low_ -= kHalf;
      high_ -= kHalf;
    } else if (low_ >= kQuarter && high_ < kThreeQuarters) {
      ++pending_;
      low_ -= kQuarter;
      high_ -= kQuarter;
    } else {
      break;
    }
    low_ <<= 1;
    high_ = (high_ << 1) | 1;
  }
}

std::vector<std::uint8_t> ArithmeticEncoder::finish() {
  if (!finished_) {
    finished_ = true;
    // Fewest leading bits L such that the value formed by them (then zeros,
    // which is what the decoder reads past the end) lies in [low, high].
    // Pending bits need at least one bit to resolve their direction.
    int len = pending_ > 0 ? 1 : 0;
    std::uint64_t value = 0;
    for (; len <= 32; ++len) {
      const std::uint64_t step = 1ull << (32 - len);
      value = (low_ + step - 1) / step * step;
      if (value <= high_) break;
    }
    for (int i = 0; i < len; ++i) {
      const int bit = static_cast<int>((value >> (31 - i)) & 1u);
      if (i == 0)
        emit_with_pending(bit);
      else
        emit(bit);
    }
  }
  return out_;
}

ArithmeticDecoder::ArithmeticDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 32; ++i) value_ = (value_ << 1) | static_cast<std::uint64_t>(next_bit());
}

int ArithmeticDecoder::next_bit() {
  const std::uint64_t at = position_++;
  if (at >= bytes_.size() * 8) return 0;
  return (bytes_[at / 8] >> (7 - at % 8)) & 1;
}

std::size_t ArithmeticDecoder::decode(const QuantizedPmf& pmf) {
  if (value_ < low_ || value_ > high_) throw CorruptStream("arithmetic decoder left its interval");
  const std::uint64_t range = high_ - low_ + 1;
  const std::uint64_t scaled = ((value_ - low_ + 1) * QuantizedPmf::kTotal - 1) / range;
  if (scaled >= QuantizedPmf::kTotal) throw CorruptStream("arithmetic decoder range violation");

  std::size_t lo = 0;
  std::size_t hi = pmf.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (pmf.low(mid) <= scaled)
      lo = mid;
    else
      hi = mid;
  }
  const std::size_t symbol = lo;

  high_ = low_ + range * pmf.high(symbol) / QuantizedPmf::kTotal - 1;
  low_ = low_ + range * pmf.low(symbol) / QuantizedPmf::kTotal;
  for (;;) {
    if (high_ < kHalf) {
    } else if (low_ >= kHalf) {
      low_ -= kHalf;
      high_ -= kHalf;
      value_ -= kHalf;
    } else if (low_ >= kQuarter && high_ < kThreeQuarters) {
      low_ -= kQuarter;
      high_ -= kQuarter;
      value_ -= kQuarter;
    } else {
      break;
    }
    low_ <<= 1;
    high_ = (high_ << 1) | 1;
    value_ = (value_ << 1) | static_cast<std::uint64_t>(next_bit());
  }
  return symbol;
}

}  // namespace rcc
