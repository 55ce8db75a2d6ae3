#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "rcc/checksum.hpp"
#include "rcc/codec.hpp"
#include "rcc/gibbs.hpp"
#include "rcc/oracle.hpp"

using namespace rcc;

namespace {

struct Fixture {
  Index rows = 13;
  Index cols = 5;
  PairwiseFamily family = PairwiseFamily::ising();
  ParameterField theta = ParameterField::homogeneous(13, 0.05, 0.4);
  CutsetLayout layout = build_layout(13, 1, 5);
  BlockParameters theta_star;
  std::vector<SymbolGrid> images;

  Fixture() {
    const LatticeModel m(family, theta, cols);
    theta_star = fit_line(RowProcess(m), centered_rows(rows, 1)).fit.theta;
    SamplerConfig c;
    c.burn_in = 50;
    c.sample_count = 4;
    images = gibbs_sample(m, c);
  }
};

std::vector<std::uint8_t> encode(const Fixture& f, std::size_t i = 0) {
  return encode_image(f.images[i], f.family, f.theta, f.theta_star, f.layout, 7).stream;
}

}  // namespace

TEST_CASE("quantized pmf") {
  const QuantizedPmf half = quantize_pmf(std::vector<double>{0.5, 0.5});
  CHECK(half.count(0) == 32768);
  CHECK(half.count(1) == 32768);
  CHECK(half.bits(0) == doctest::Approx(1.0));

  const QuantizedPmf floor = quantize_pmf(std::vector<double>{1.0, 0.0, 0.0});
  CHECK(floor.count(0) == 65534);
  CHECK(floor.count(1) == 1);
  CHECK(floor.count(2) == 1);

  // Ties in the remainder go to the lower index.
  const QuantizedPmf third = quantize_pmf(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(third.count(0) == 21846);
  CHECK(third.count(1) == 21845);
  CHECK(third.count(2) == 21845);
  CHECK(third.high(2) == QuantizedPmf::kTotal);

  CHECK_THROWS_AS(quantize_pmf(std::vector<double>{}), FormatError);
  CHECK_THROWS_AS(quantize_pmf(std::vector<double>{0.5, 0.6}), FormatError);
  CHECK_THROWS_AS(quantize_pmf(std::vector<double>{-0.5, 1.5}), FormatError);
  CHECK_THROWS_AS(quantize_pmf(std::vector<double>(4097, 1.0 / 4097)), TooManySymbols);
  CHECK_THROWS_AS(QuantizedPmf({65536, 0}), FormatError);
  CHECK_THROWS_AS(QuantizedPmf({100, 200}), FormatError);
}

TEST_CASE("arithmetic coder round trip and overhead") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int q = 2 + trial % 5;
    const int n = 1 + static_cast<int>(rng() % 3000);
    std::vector<QuantizedPmf> tables;
    std::vector<std::size_t> symbols;
    ArithmeticEncoder enc;
    double model_bits = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd p(q);
      for (int a = 0; a < q; ++a) p(a) = std::pow(testing::uniform(rng, 0, 1), 4);
      p(rng() % q) += 1e-3;
      p /= p.sum();
      tables.push_back(quantize_pmf(p));
      // Draw from the table itself so skewed tables see typical symbols.
      const double u = testing::uniform(rng, 0, 1);
      std::size_t s = 0;
      double acc = p(0);
      while (u >= acc && s + 1 < static_cast<std::size_t>(q)) acc += p(++s);
      symbols.push_back(s);
      enc.encode(s, tables.back());
      model_bits += tables.back().bits(s);
    }
    const auto bytes = enc.finish();
    CHECK(static_cast<double>(enc.bit_count()) <= model_bits + 2.0);
    CHECK(bytes.size() == (enc.bit_count() + 7) / 8);
    ArithmeticDecoder dec(bytes);
    for (int i = 0; i < n; ++i) REQUIRE(dec.decode(tables[i]) == symbols[i]);
  }

  ArithmeticEncoder enc;
  const QuantizedPmf half = quantize_pmf(std::vector<double>{0.5, 0.5});
  for (int i = 0; i < 1000; ++i) enc.encode(i % 7 == 0, half);
  enc.finish();
  CHECK(enc.bit_count() >= 1000);
  CHECK(enc.bit_count() <= 1002);
}

TEST_CASE("image round trip") {
  const Fixture f;
  for (std::size_t i = 0; i < f.images.size(); ++i) {
    const EncodedImage enc = encode_image(f.images[i], f.family, f.theta, f.theta_star, f.layout, 99);
    CHECK(enc.lines.size() == 3);
    CHECK(enc.strips.size() == 2);
    CHECK(enc.rate == doctest::Approx(static_cast<double>(enc.ac_bits) / (13 * 5)));
    for (const auto* blocks : {&enc.lines, &enc.strips})
      for (const auto& b : *blocks) {
        CHECK(static_cast<double>(b.bits) <= b.model_bits + 2.0);
        // Quantization penalty: every conditional here is well above 2^-12.
        const double pixels = static_cast<double>(b.steps);
        CHECK(b.model_bits <= b.exact_bits + pixels * std::log2(1.0 / (1.0 - 2.0 / 65536.0)) + 1e-9);
      }
    const DecodedImage dec = decode_image(enc.stream);
    CHECK(dec.image == f.images[i]);
    CHECK(dec.header.provenance == 99);
    CHECK(dec.header.theta == f.theta);
    CHECK(dec.header.theta_star == f.theta_star);
    CHECK(dec.header.family == f.family);
    CHECK(dec.layout.strip_count == 2);
  }
}

TEST_CASE("independent pixels cost one bit each plus termination") {
  const Index rows = 11, cols = 4;
  const ParameterField theta = ParameterField::homogeneous(rows, 0.0, 0.0);
  const LatticeModel m(PairwiseFamily::ising(), theta, cols);
  SamplerConfig c;
  c.burn_in = 1;
  c.sample_count = 5;
  for (auto [nl, ns] : std::vector<std::pair<Index, Index>>{{1, 1}, {1, 4}, {2, 1}, {3, 5}}) {
    const CutsetLayout layout = build_layout(rows, nl, ns);
    const BlockParameters zero = BlockParameters::zeros({nl, cols});
    const double k = static_cast<double>(layout.strip_count);
    for (const auto& x : gibbs_sample(m, c)) {
      const EncodedImage enc = encode_image(x, m.family, theta, zero, layout);
      CHECK(enc.rate >= 1.0);
      CHECK(enc.rate <= 1.0 + 2.0 * (2 * k + 1) / static_cast<double>(rows * cols));
      CHECK(decode_image(enc.stream).image == x);
    }
  }
}

TEST_CASE("stream layout") {
  const Fixture f;
  const auto s = encode(f);
  REQUIRE(s.size() > 30);
  CHECK(std::string(s.begin(), s.begin() + 4) == "RCC1");
  CHECK(s[4] == 1);  // version
  CHECK(s[5] == 2);  // q
  ByteReader r(std::span<const std::uint8_t>(s).subspan(6));
  CHECK(r.u32() == 13);
  CHECK(r.u32() == 5);
  CHECK(r.u32() == 1);
  CHECK(r.u32() == 5);
  CHECK(r.doubles(2) == f.family.node_stat());

  const StreamHeader h = read_stream_header(s);
  CHECK(h.cols == 5);
  CHECK(h.line_height == 1);
  CHECK(h.strip_height == 5);
  CHECK(h.provenance == 7);
}

TEST_CASE("corrupt streams are rejected") {
  const Fixture f;
  const auto good = encode(f);

  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_image(bad), CorruptStream);

  bad = good;
  bad[4] = 9;
  CHECK_THROWS_AS(decode_image(bad), CorruptStream);

  bad = good;
  bad.pop_back();
  CHECK_THROWS_AS(decode_image(bad), CorruptStream);

  bad = good;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_image(bad), CorruptStream);

  // Layout that does not tile.
  bad = good;
  bad[21] = 4;  // n_S = 4: 13 = (k+1) + 4k has no solution
  CHECK_THROWS_AS(decode_image(bad), CorruptStream);

  // A flipped bit in theta* changes the first-line tables: checksum fails.
  std::size_t header_end = 0;  // start of the theta* arrays
  {
    ByteReader r(good);
    r.take(6);
    for (int i = 0; i < 4; ++i) r.u32();
    for (std::size_t n : {2, 4, 4, 13, 13, 12}) r.doubles(n);
    header_end = r.position();
  }
  bad = good;
  bad[header_end + 4 + 7] ^= 0x10;  // inside theta*_node[0]
  CHECK_THROWS_AS(decode_image(bad), CorruptStream);

  // Mismatched inputs.
  CHECK_THROWS_AS(encode_image(f.images[0], f.family, f.theta, f.theta_star, build_layout(11, 1, 4)),
                  LayoutMismatch);
  CHECK_THROWS_AS(encode_image(f.images[0], f.family, f.theta, BlockParameters::zeros({2, 5}), f.layout),
                  LayoutMismatch);
}

TEST_CASE("decoding needs only the stream") {
  // The decoder rebuilds every table from header bytes: a stream survives
  // a copy into fresh storage and decodes identically twice.
  const Fixture f;
  const auto s = encode(f, 1);
  const std::vector<std::uint8_t> copy(s.begin(), s.end());
  CHECK(decode_image(copy).image == decode_image(s).image);
  CHECK(decode_image(copy).image == f.images[1]);
}

TEST_CASE("crc64") {
  const std::string check = "123456789";
  CHECK(crc64(std::span(reinterpret_cast<const std::uint8_t*>(check.data()), check.size())) == 0x995dc9bbdf1939faull);
  ByteWriter w;
  w.u16(0x0102);
  w.f64(1.5);
  ByteReader r(w.bytes());
  CHECK(r.u16() == 0x0102);
  CHECK(r.f64() == 1.5);
  CHECK(r.remaining() == 0);
  CHECK_THROWS_AS(r.u8(), CorruptStream);
}
