#pragma once

// Plain-text files: rasters, models, fitted parameters, sample manifests.
//
// Raster:   "RCCIMG q M N" then M lines of N symbols separated by spaces.
// Others:   key = value lines; '#' starts a comment; lists are
//           whitespace- or comma-separated reals.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rcc/gibbs.hpp"
#include "rcc/lattice.hpp"
#include "rcc/moment_match.hpp"

namespace rcc {

// Shortest decimal that reads back to the same double.
std::string format_double(double v);
std::string format_list(const Eigen::Ref<const Eigen::VectorXd>& v);

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

// Typed lookups; missing keys and bad values throw FormatError naming the key.
double get_double(const KeyValues& kv, const std::string& key);
long long get_int(const KeyValues& kv, const std::string& key);
Eigen::VectorXd get_list(const KeyValues& kv, const std::string& key);
std::vector<long long> get_int_list(const KeyValues& kv, const std::string& key);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

struct Raster {
  int alphabet_size = 2;
  SymbolGrid pixels;
};

std::string format_raster(const SymbolGrid& pixels, int alphabet_size);
Raster parse_raster(const std::string& text);
void write_raster(const std::filesystem::path& path, const SymbolGrid& pixels, int alphabet_size);
Raster read_raster(const std::filesystem::path& path);

// Global model: family tables plus per-row parameters and the width.
struct ModelFile {
  PairwiseFamily family = PairwiseFamily::ising();
  ParameterField theta;
  Index cols = 0;

  LatticeModel model() const { return LatticeModel(family, theta, cols); }
};

std::string format_model(const ModelFile& m);
ModelFile parse_model(const KeyValues& kv);

// Fitted block parameters with their diagnostics. Only rows, cols and theta
// are needed to read one back.
std::string format_fit(const FitResult& fit);
BlockParameters parse_block_parameters(const KeyValues& kv);

struct SampleManifest {
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thinning = 0;
  int sample_count = 0;
  std::string generator = kGeneratorId;
  std::uint64_t model_hash = 0;
  std::vector<std::string> files;  // relative to the manifest
};

std::string format_manifest(const SampleManifest& m);
SampleManifest parse_manifest(const KeyValues& kv);

std::string hex64(std::uint64_t v);

}  // namespace rcc
