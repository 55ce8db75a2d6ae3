#pragma once

// Reduced cutset coding: lines under their moment-matching reduced MRF,
// then strips under the true MRF conditioned on the decoded lines. Every
// arithmetic-coding step codes one q-ary pixel.
//
// Stream layout (integers big-endian, reals IEEE-754 binary64):
//
//   "RCC1"  version:u8  q:u8  M:u32  N:u32  n_L:u32  n_S:u32
//   node_stat[q]  edge_stat_h[q*q]  edge_stat_v[q*q]       counted arrays
//   theta_node[M]  theta_h[M]  theta_v[M-1]                 global, per row
//   theta*_node[n_L*N]  theta*_h[n_L*(N-1)]  theta*_v[(n_L-1)*N]
//   provenance:u64  checksum:u64
//   2k+1 payloads, each u32 byte length + bytes: lines top to bottom, then
//   strips top to bottom.
//
// A counted array is a u32 count followed by the values. The checksum is
// CRC-64/XZ over every header byte before it followed by the count tables
// (u16 each) of all coding steps of the first line.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rcc/chain.hpp"
#include "rcc/lattice.hpp"

namespace rcc {

// Integer probabilities summing to 2^16, every symbol at least 1.
class QuantizedPmf {
 public:
  static constexpr std::uint32_t kTotal = 1u << 16;
  static constexpr std::size_t kMaxSymbols = 1u << 12;

  explicit QuantizedPmf(std::vector<std::uint32_t> counts);

  std::size_t size() const { return counts_.size(); }
  std::uint32_t count(std::size_t s) const { return counts_[s]; }
  std::uint32_t low(std::size_t s) const { return cumulative_[s]; }
  std::uint32_t high(std::size_t s) const { return cumulative_[s + 1]; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }
  double bits(std::size_t s) const;  // -log2(count / 2^16)

  friend bool operator==(const QuantizedPmf&, const QuantizedPmf&) = default;

 private:
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> cumulative_;
};

// Largest-remainder rounding of pmf * 2^16 (ties to the lower index); zero
// counts are then raised to 1, each taking one unit from the currently
// largest count (lowest index on ties). The pmf is normalized first and
// must sum to 1 within 1e-9.
QuantizedPmf quantize_pmf(std::span<const double> pmf);
QuantizedPmf quantize_pmf(const Eigen::VectorXd& pmf);

// Binary arithmetic coder with 32-bit registers and deferred
// (pending) bits. Termination emits the fewest bits that pin the final
// interval, so a stream costs at most two bits over the model codelength.
class ArithmeticEncoder {
 public:
  void encode(std::size_t symbol, const QuantizedPmf& pmf);
  // Terminates the stream; bytes are zero padded.
  std::vector<std::uint8_t> finish();
  std::uint64_t bit_count() const { return bits_; }

 private:
  void emit(int bit);
  void emit_with_pending(int bit);

  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t pending_ = 0;
  std::uint64_t bits_ = 0;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class ArithmeticDecoder {
 public:
  explicit ArithmeticDecoder(std::span<const std::uint8_t> bytes);
  std::size_t decode(const QuantizedPmf& pmf);

 private:
  int next_bit();

  std::span<const std::uint8_t> bytes_;
  std::uint64_t position_ = 0;  // bits consumed
  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t value_ = 0;
};

// Per coded block.
struct BlockCode {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bits = 0;    // arithmetic-coder output before byte padding
  double model_bits = 0.0;   // -log2 of the quantized model probability
  double exact_bits = 0.0;   // -log2 of the unquantized sequential model
  std::size_t steps = 0;
};

// Observer of every coding table, in coding order.
using TableSink = std::function<void(const QuantizedPmf&)>;

// Codes a block column by column, each column top pixel first. The coding
// distribution is the column chain of `block` (with the clamp absorbed when
// given). Lines pass their reduced model and no clamp.
BlockCode encode_block(const SymbolGrid& pixels, const LatticeModel& block, const BoundaryClamp* clamp = nullptr,
                       const TableSink& sink = {});
SymbolGrid decode_block(std::span<const std::uint8_t> bytes, const LatticeModel& block,
                        const BoundaryClamp* clamp = nullptr, const TableSink& sink = {});

BlockCode encode_line(const SymbolGrid& line, const LatticeModel& reduced);
SymbolGrid decode_line(std::span<const std::uint8_t> bytes, const LatticeModel& reduced);

// The strip occupies rows `strip` of `image`; its boundary rows are read
// from `image` (and, when decoding, must already hold the decoded lines).
BlockCode encode_strip(const SymbolGrid& image, const RowRange& strip, const LatticeModel& global);
void decode_strip(std::span<const std::uint8_t> bytes, const RowRange& strip, const LatticeModel& global,
                  SymbolGrid& image);

struct StreamHeader {
  std::uint8_t version = 1;
  PairwiseFamily family = PairwiseFamily::ising();
  ParameterField theta;
  Index cols = 0;
  Index line_height = 0;
  Index strip_height = 0;
  BlockParameters theta_star;
  std::uint64_t provenance = 0;
  std::uint64_t checksum = 0;
};

struct EncodedImage {
  std::vector<std::uint8_t> stream;
  std::vector<BlockCode> lines;
  std::vector<BlockCode> strips;
  std::uint64_t ac_bits = 0;  // sum over blocks
  double rate = 0.0;          // ac_bits / (M N)
};

// Throws LayoutMismatch if the image, layout, theta and theta* disagree.
EncodedImage encode_image(const SymbolGrid& image, const PairwiseFamily& family, const ParameterField& theta,
                          const BlockParameters& theta_star, const CutsetLayout& layout,
                          std::uint64_t provenance = 0);

struct DecodedImage {
  SymbolGrid image;
  StreamHeader header;
  CutsetLayout layout;
};

DecodedImage decode_image(std::span<const std::uint8_t> stream);

// Header only; no payload is touched and the checksum is not verified.
StreamHeader read_stream_header(std::span<const std::uint8_t> stream);

}  // namespace rcc
