#include "rcc/codec.hpp"

#include <cmath>
#include <string>

#include "rcc/checksum.hpp"

namespace rcc {

namespace {

constexpr std::uint8_t kVersion = 1;
constexpr Index kMaxDimension = 1 << 16;

// Distribution of pixel r of a column given pixels 0..r-1 (packed in
// `prefix`), from the distribution of the whole column state.
Eigen::VectorXd pixel_conditional(const Eigen::VectorXd& column, int q, Index r, Index prefix) {
  Index stride = 1;
  for (Index i = 0; i < r; ++i) stride *= q;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(q);
  const Index period = stride * q;
  for (Index base = prefix; base < column.size(); base += period)
    for (int a = 0; a < q; ++a) p(a) += column(base + a * stride);
  return p / p.sum();
}

// Walks every coding step of a block; `code` receives the pixel's pmf and
// returns the symbol (known when encoding, decoded otherwise).
template <typename Code>
void walk_block(const LatticeModel& block, const BoundaryClamp* clamp, Code&& code) {
  const LatticeShape s = block.shape();
  const int q = block.alphabet_size();
  const ChainPosterior post(column_chain(block, clamp));
  std::optional<Index> prev;
  for (Index c = 0; c < s.cols; ++c) {
    const Eigen::VectorXd column = sequential_conditional(post, c, prev);
    Index state = 0;
    Index stride = 1;
    for (Index r = 0; r < s.rows; ++r) {
      const Eigen::VectorXd p = pixel_conditional(column, q, r, state);
      const int x = code(r, c, p);
      state += x * stride;
      stride *= q;
    }
    prev = state;
  }
}

void write_header(ByteWriter& w, const StreamHeader& h) {
  const auto& f = h.family;
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("RCC1"), 4));
  w.u8(h.version);
  w.u8(static_cast<std::uint8_t>(f.alphabet_size()));
  w.u32(static_cast<std::uint32_t>(h.theta.rows()));
  w.u32(static_cast<std::uint32_t>(h.cols));
  w.u32(static_cast<std::uint32_t>(h.line_height));
  w.u32(static_cast<std::uint32_t>(h.strip_height));
  w.doubles(f.node_stat());
  w.doubles(f.edge_stat_h().reshaped<Eigen::RowMajor>());
  w.doubles(f.edge_stat_v().reshaped<Eigen::RowMajor>());
  w.doubles(h.theta.node);
  w.doubles(h.theta.horizontal);
  w.doubles(h.theta.vertical);
  w.doubles(h.theta_star.node.reshaped<Eigen::RowMajor>());
  w.doubles(h.theta_star.horizontal.reshaped<Eigen::RowMajor>());
  w.doubles(h.theta_star.vertical.reshaped<Eigen::RowMajor>());
  w.u64(h.provenance);
}

void append_table(std::vector<std::uint8_t>& out, const QuantizedPmf& pmf) {
  for (std::uint32_t c : pmf.counts()) {
    out.push_back(static_cast<std::uint8_t>(c >> 8));
    out.push_back(static_cast<std::uint8_t>(c));
  }
}

void check_block(const SymbolGrid& pixels, const LatticeModel& block) {
  if (pixels.rows() != block.shape().rows || pixels.cols() != block.shape().cols) {
    throw LayoutMismatch("block pixels and model differ in shape");
  }
  check_symbols(pixels, block.alphabet_size());
}

}  // namespace

BlockCode encode_block(const SymbolGrid& pixels, const LatticeModel& block, const BoundaryClamp* clamp,
                       const TableSink& sink) {
  check_block(pixels, block);
  BlockCode out;
  ArithmeticEncoder enc;
  walk_block(block, clamp, [&](Index r, Index c, const Eigen::VectorXd& p) {
    const int x = pixels(r, c);
    const QuantizedPmf pmf = quantize_pmf(p);
    enc.encode(static_cast<std::size_t>(x), pmf);
    out.model_bits += pmf.bits(static_cast<std::size_t>(x));
    out.exact_bits -= std::log2(p(x));
    ++out.steps;
    if (sink) sink(pmf);
    return x;
  });
  out.bytes = enc.finish();
  out.bits = enc.bit_count();
  return out;
}

SymbolGrid decode_block(std::span<const std::uint8_t> bytes, const LatticeModel& block, const BoundaryClamp* clamp,
                        const TableSink& sink) {
  SymbolGrid pixels(block.shape().rows, block.shape().cols);
  ArithmeticDecoder dec(bytes);
  walk_block(block, clamp, [&](Index r, Index c, const Eigen::VectorXd& p) {
    const QuantizedPmf pmf = quantize_pmf(p);
    const int x = static_cast<int>(dec.decode(pmf));
    if (sink) sink(pmf);
    pixels(r, c) = x;
    return x;
  });
  return pixels;
}

BlockCode encode_line(const SymbolGrid& line, const LatticeModel& reduced) { return encode_block(line, reduced); }

SymbolGrid decode_line(std::span<const std::uint8_t> bytes, const LatticeModel& reduced) {
  return decode_block(bytes, reduced);
}

BlockCode encode_strip(const SymbolGrid& image, const RowRange& strip, const LatticeModel& global) {
  const BoundaryClamp clamp = strip_boundary(global, strip, image);
  return encode_block(image.middleRows(strip.begin, strip.size()), global.restrict(strip), &clamp);
}

void decode_strip(std::span<const std::uint8_t> bytes, const RowRange& strip, const LatticeModel& global,
                  SymbolGrid& image) {
  const BoundaryClamp clamp = strip_boundary(global, strip, image);
  image.middleRows(strip.begin, strip.size()) = decode_block(bytes, global.restrict(strip), &clamp);
}

// ---------------------------------------------------------------------------

EncodedImage encode_image(const SymbolGrid& image, const PairwiseFamily& family, const ParameterField& theta,
                          const BlockParameters& theta_star, const CutsetLayout& layout, std::uint64_t provenance) {
  const Index M = image.rows();
  const Index N = image.cols();
  if (layout.rows() != M) throw LayoutMismatch("layout height differs from image height");
  if (theta.rows() != M) throw LayoutMismatch("parameter rows differ from image height");
  if (!(theta_star.shape() == LatticeShape(layout.line_height, N))) {
    throw LayoutMismatch("theta* must cover one line block of the image");
  }
  if (M > kMaxDimension || N > kMaxDimension) throw LayoutMismatch("image too large for the stream format");
  check_symbols(image, family.alphabet_size());

  const LatticeModel global(family, theta, N);
  const LatticeModel reduced(family, theta_star);

  StreamHeader h;
  h.version = kVersion;
  h.family = family;
  h.theta = theta;
  h.cols = N;
  h.line_height = layout.line_height;
  h.strip_height = layout.strip_height;
  h.theta_star = theta_star;
  h.provenance = provenance;

  EncodedImage out;
  ByteWriter header;
  write_header(header, h);

  std::vector<std::uint8_t> checked = header.bytes();
  for (std::size_t i = 0; i < layout.lines.size(); ++i) {
    const RowRange& r = layout.lines[i];
    const SymbolGrid line = image.middleRows(r.begin, r.size());
    if (i == 0)
      out.lines.push_back(encode_block(line, reduced, nullptr, [&](const QuantizedPmf& p) { append_table(checked, p); }));
    else
      out.lines.push_back(encode_line(line, reduced));
  }
  for (const auto& s : layout.strips) out.strips.push_back(encode_strip(image, s, global));

  header.u64(crc64(checked));
  for (const auto* blocks : {&out.lines, &out.strips}) {
    for (const auto& b : *blocks) {
      header.u32(static_cast<std::uint32_t>(b.bytes.size()));
      header.raw(b.bytes);
      out.ac_bits += b.bits;
    }
  }
  out.stream = std::move(header.bytes());
  out.rate = static_cast<double>(out.ac_bits) / static_cast<double>(M * N);
  return out;
}

namespace {

StreamHeader parse_header(ByteReader& in, std::size_t& header_end) {
  const auto magic = in.take(4);
  if (!(magic[0] == 'R' && magic[1] == 'C' && magic[2] == 'C' && magic[3] == '1')) {
    throw CorruptStream("not an RCC1 stream");
  }
  StreamHeader h;
  h.version = in.u8();
  if (h.version != kVersion) throw CorruptStream("unsupported stream version " + std::to_string(h.version));
  const int q = in.u8();
  const Index M = in.u32();
  const Index N = in.u32();
  h.cols = N;
  h.line_height = in.u32();
  h.strip_height = in.u32();
  if (q < 2 || M < 1 || N < 1 || M > kMaxDimension || N > kMaxDimension || h.line_height < 1 ||
      h.line_height > M || h.strip_height < 1 || h.strip_height > M) {
    throw CorruptStream("header dimensions out of range");
  }
  const auto uq = static_cast<std::size_t>(q);
  try {
    Eigen::VectorXd node = in.doubles(uq);
    Eigen::VectorXd eh = in.doubles(uq * uq);
    Eigen::VectorXd ev = in.doubles(uq * uq);
    h.family = PairwiseFamily(node, eh.reshaped<Eigen::RowMajor>(q, q), ev.reshaped<Eigen::RowMajor>(q, q));
    h.theta.node = in.doubles(static_cast<std::size_t>(M));
    h.theta.horizontal = in.doubles(static_cast<std::size_t>(M));
    h.theta.vertical = in.doubles(static_cast<std::size_t>(M - 1));
    h.theta.validate();
    const LatticeShape ls(h.line_height, N);
    Eigen::VectorXd flat(ls.components());
    flat << in.doubles(static_cast<std::size_t>(ls.sites())), in.doubles(static_cast<std::size_t>(ls.horizontal_edges())),
        in.doubles(static_cast<std::size_t>(ls.vertical_edges()));
    h.theta_star = BlockParameters::unflatten(ls, flat);
    LatticeModel check(h.family, h.theta_star);
    (void)check;
  } catch (const CorruptStream&) {
    throw;
  } catch (const Error& e) {
    throw CorruptStream(std::string("invalid header: ") + e.what());
  }
  h.provenance = in.u64();
  header_end = in.position();
  h.checksum = in.u64();
  return h;
}

}  // namespace

StreamHeader read_stream_header(std::span<const std::uint8_t> stream) {
  ByteReader in(stream);
  std::size_t end = 0;
  return parse_header(in, end);
}

DecodedImage decode_image(std::span<const std::uint8_t> stream) {
  ByteReader in(stream);
  std::size_t header_end = 0;
  DecodedImage out;
  out.header = parse_header(in, header_end);
  const StreamHeader& h = out.header;
  try {
    out.layout = build_layout(h.theta.rows(), h.line_height, h.strip_height);
  } catch (const NoValidTiling& e) {
    throw CorruptStream(std::string("header layout invalid: ") + e.what());
  }

  std::vector<std::span<const std::uint8_t>> payloads;
  const std::size_t count = out.layout.lines.size() + out.layout.strips.size();
  for (std::size_t i = 0; i < count; ++i) payloads.push_back(in.take(in.u32()));
  if (in.remaining() != 0) throw CorruptStream("trailing bytes after the last payload");

  const LatticeModel global(h.family, h.theta, h.cols);
  const LatticeModel reduced(h.family, h.theta_star);
  out.image = SymbolGrid::Zero(h.theta.rows(), h.cols);

  std::vector<std::uint8_t> checked(stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(header_end));
  for (std::size_t i = 0; i < out.layout.lines.size(); ++i) {
    const RowRange& r = out.layout.lines[i];
    if (i == 0) {
      out.image.middleRows(r.begin, r.size()) =
          decode_block(payloads[0], reduced, nullptr, [&](const QuantizedPmf& p) { append_table(checked, p); });
      if (crc64(checked) != h.checksum) throw CorruptStream("header checksum mismatch");
    } else {
      out.image.middleRows(r.begin, r.size()) = decode_line(payloads[i], reduced);
    }
  }
  for (std::size_t j = 0; j < out.layout.strips.size(); ++j) {
    decode_strip(payloads[out.layout.lines.size() + j], out.layout.strips[j], global, out.image);
  }
  return out;
}

}  // namespace rcc
