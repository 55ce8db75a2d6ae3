#include "rcc/checksum.hpp"

#include <boost/crc.hpp>

namespace rcc {

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

}  // namespace rcc
