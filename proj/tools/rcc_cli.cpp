// rcc: sampling, fitting, coding and rate experiments for reduced cutset
// coding of lattice MRFs.
//
// Exit codes: 0 success, 1 other failure, 2 spec error, 3 verification
// falsified, 4 corrupt stream.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "experiment.hpp"
#include "rcc/checksum.hpp"
#include "rcc/codec.hpp"
#include "rcc/gibbs.hpp"
#include "rcc/io.hpp"
#include "rcc/moment_match.hpp"

namespace fs = std::filesystem;
using namespace rcc;
using rcc::cli::ExperimentSpec;

namespace {

enum Exit { kOk = 0, kFailure = 1, kSpecError = 2, kFalsified = 3, kCorrupt = 4 };

void log_line(const std::string& s) { std::cerr << "rcc: " << s << '\n'; }

// Every spec field as a flag. A key=value file given with --spec supplies
// the same names (dashes or underscores); flags on the command line win.
void add_spec_options(CLI::App& app, ExperimentSpec& s, std::string& spec_file) {
  app.add_option("--spec", spec_file, "key=value experiment spec file");
  app.add_option("--q", s.q, "alphabet size (2: Ising, >2: Potts)")->capture_default_str();
  app.add_option("--model", s.model_path, "model file; overrides q, rows, cols and thetas");
  app.add_option("--theta-node,--theta_node", s.theta_node, "node parameter")->capture_default_str();
  app.add_option("--theta-edge,--theta_edge", s.theta_edge, "edge parameter")->capture_default_str();
  app.add_option("--rows", s.rows, "lattice height M")->capture_default_str();
  app.add_option("--cols", s.cols, "lattice width N")->capture_default_str();
  app.add_option("--line-heights,--line_heights", s.line_heights, "n_L grid")->delimiter(',')->capture_default_str();
  app.add_option("--strip-heights,--strip_heights", s.strip_heights, "n_S grid")->delimiter(',')->capture_default_str();
  app.add_option("--pairs", s.pairs, "explicit n_L,n_S pairs; replaces the grid")->delimiter(',');
  app.add_flag("--auto-rows,--auto_rows", s.auto_rows, "shrink rows per pair to the largest tiling height");
  app.add_option("--burn-in,--burn_in", s.burn_in, "Gibbs sweeps before the first sample")->capture_default_str();
  app.add_option("--thinning", s.thinning, "Gibbs sweeps between samples")->capture_default_str();
  app.add_option("--seed", s.seed, "sampler seed")->capture_default_str();
  app.add_option("--samples", s.samples, "number of Gibbs images")->capture_default_str();
  app.add_option("--fit-tolerance,--fit_tolerance", s.fit_tolerance, "moment-match tolerance")->capture_default_str();
  app.add_option("--max-iter,--max_iter", s.max_iter, "moment-match iteration limit")->capture_default_str();
  app.add_option("--max-n,--max_n", s.max_n, "largest block height for verify")->capture_default_str();
  app.add_option("--max-gap,--max_gap", s.max_gap, "largest row gap for verify")->capture_default_str();
  app.add_option("--out", s.out_dir, "output directory")->capture_default_str();
  app.add_option("--jobs", s.jobs, "worker threads")->capture_default_str();
}

// Fills options not given on the command line from the spec file.
void apply_spec_file(CLI::App& app, const std::string& path) {
  for (const auto& [key, value] : read_key_values(path)) {
    CLI::Option* opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "spec") throw FormatError("unknown spec key '" + key + "'");
    if (opt->count() > 0) continue;
    try {
      if (opt->get_expected_max() == 0) {
        opt->add_result(value);
      } else {
        std::string list = value;
        std::replace(list.begin(), list.end(), ',', ' ');
        for (const auto& tok : CLI::detail::split_up(list))
          if (!tok.empty()) opt->add_result(tok);
      }
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw FormatError("spec key '" + key + "': " + e.what());
    }
  }
}

fs::path out_path(const ExperimentSpec& s, const std::string& name) {
  fs::create_directories(s.out_dir);
  return fs::path(s.out_dir) / name;
}

ParameterField global_theta(const ExperimentSpec& s, Index rows) {
  if (!s.model_path.empty()) return parse_model(read_key_values(s.model_path)).theta.restrict({0, rows});
  return ParameterField::homogeneous(rows, s.theta_node, s.theta_edge);
}

Index spec_rows(const ExperimentSpec& s) {
  return s.model_path.empty() ? s.rows : parse_model(read_key_values(s.model_path)).theta.rows();
}

int cmd_sample(const ExperimentSpec& s) {
  if (s.samples < 1) throw FormatError("sample needs --samples >= 1");
  const LatticeModel model = s.model(spec_rows(s));
  SamplerConfig cfg{s.burn_in, s.thinning, s.seed, s.samples};
  const auto images = gibbs_sample(model, cfg);
  SampleManifest m;
  m.seed = s.seed;
  m.burn_in = s.burn_in;
  m.thinning = s.thinning;
  m.sample_count = s.samples;
  m.model_hash = model_hash(model);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu.rcc", i);
    write_raster(out_path(s, name), images[i], model.alphabet_size());
    m.files.emplace_back(name);
  }
  ModelFile mf{model.family, global_theta(s, model.shape().rows), model.shape().cols};
  write_text(out_path(s, "model.txt"), format_model(mf));
  write_text(out_path(s, "manifest.txt"), format_manifest(m));
  std::cout << "wrote " << images.size() << " samples, model hash " << hex64(m.model_hash) << '\n';
  return kOk;
}

int cmd_fit(const ExperimentSpec& s, const std::string& manifest, Index line_height, const std::string& output) {
  const Index rows = spec_rows(s);
  const LatticeModel model = s.model(rows);
  const RowRange line = centered_rows(rows, line_height);
  FitOptions opts;
  opts.tolerance = s.fit_tolerance;
  opts.max_iter = s.max_iter;
  MomentField target;
  if (manifest.empty()) {
    target = RowProcess(model).moments().rows(line);
  } else {
    const SampleManifest m = parse_manifest(read_key_values(manifest));
    if (m.model_hash != model_hash(model)) log_line("warning: manifest model hash differs from the spec model");
    std::vector<SymbolGrid> images;
    for (const auto& f : m.files) {
      const Raster r = read_raster(fs::path(manifest).parent_path() / f);
      if (r.pixels.rows() != rows || r.pixels.cols() != model.shape().cols)
        throw FormatError("sample " + f + " does not match the model shape");
      images.push_back(r.pixels);
    }
    const std::vector<RowRange> blocks{line};
    target = empirical_moment(images, blocks, model.family);
    if (hull_margin(target, model.family) <= 0.0) {
      log_line("empirical target on the hull boundary; shrinking toward uniform");
      target = shrink_toward_uniform(target, model.family);
    }
  }
  FitResult fit;
  try {
    fit = rcc::fit(model.family, target, BlockParameters::zeros(target.shape()), opts);
  } catch (const DidNotConverge& e) {
    log_line(e.what());
    fit = e.best();
  }
  const fs::path path = output.empty() ? out_path(s, "fit.txt") : fs::path(output);
  write_text(path, format_fit(fit));
  std::cout << "iterations " << fit.iterations << ", gradient " << format_double(fit.gradient_norm)
            << (fit.converged ? "" : " (not converged)") << '\n';
  return fit.converged ? kOk : kFailure;
}

int cmd_encode(const ExperimentSpec& s, const std::string& image, const std::string& theta_star_path, Index n_l,
               Index n_s, const std::string& output) {
  const Raster r = read_raster(image);
  const Index rows = r.pixels.rows();
  const LatticeModel model = s.model(rows);
  if (model.shape().cols != r.pixels.cols()) throw LayoutMismatch("image width differs from the model");
  const CutsetLayout layout = build_layout(rows, n_l, n_s);
  BlockParameters theta_star;
  if (theta_star_path.empty()) {
    OracleOptions o = s.oracle_options();
    theta_star = fit_line(RowProcess(model), centered_rows(rows, n_l), o).fit.theta;
  } else {
    theta_star = parse_block_parameters(read_key_values(theta_star_path));
  }
  const EncodedImage enc =
      encode_image(r.pixels, model.family, global_theta(s, rows), theta_star, layout, model_hash(model));
  write_bytes(output, enc.stream);
  std::cout << "rate " << format_double(enc.rate) << " bits/pixel, " << enc.stream.size() << " bytes, crc "
            << hex64(crc64(enc.stream)) << '\n';
  return kOk;
}

int cmd_decode(const std::string& input, const std::string& output) {
  const auto bytes = read_bytes(input);
  const DecodedImage d = decode_image(bytes);
  const std::string text = format_raster(d.image, d.header.family.alphabet_size());
  write_text(output, text);
  std::cout << "decoded " << d.image.rows() << "x" << d.image.cols() << ", raster crc "
            << hex64(crc64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()))) << '\n';
  return kOk;
}

int cmd_sweep(const ExperimentSpec& s, bool redundancy) {
  const auto points = cli::sweep_points(s, log_line);
  if (points.empty()) throw FormatError("no (n_L, n_S) pair tiles the lattice");
  const auto rows = cli::run_sweep(s, points);
  const fs::path path = out_path(s, redundancy ? "redundancy.csv" : "rates.csv");
  write_text(path, redundancy ? cli::redundancy_csv(rows) : cli::rates_csv(rows));
  std::cout << "wrote " << rows.size() << " rows to " << path.string() << '\n';
  return kOk;
}

int cmd_verify(const ExperimentSpec& s) {
  const auto ledger = cli::run_verify(s);
  const fs::path path = out_path(s, "ledger.csv");
  write_text(path, cli::ledger_csv(ledger));
  for (const auto& e : ledger) std::cout << e.status << "  " << e.check << '\n';
  if (falsified(ledger)) {
    std::cout << "falsified; see " << path.string() << '\n';
    return kFalsified;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rcc: reduced cutset coding of lattice MRFs"};
  app.require_subcommand(1);

  ExperimentSpec spec;
  std::string manifest, output, image, input, theta_star, spec_file;
  Index line_height = 1, strip_height = 1;

  auto* sample = app.add_subcommand("sample", "Gibbs-sample images and write a manifest");
  auto* fit = app.add_subcommand("fit", "moment-match a reduced model to the centered line");
  auto* encode = app.add_subcommand("encode", "code an RCCIMG raster");
  auto* decode = app.add_subcommand("decode", "decode a stream to an RCCIMG raster");
  auto* rates = app.add_subcommand("rates", "rate sweep over (n_L, n_S); writes rates.csv");
  auto* redundancy = app.add_subcommand("redundancy", "redundancy sweep; writes redundancy.csv");
  auto* verify = app.add_subcommand("verify", "check the rate orderings and identities; writes ledger.csv");
  for (auto* sub : {sample, fit, encode, rates, redundancy, verify}) add_spec_options(*sub, spec, spec_file);

  fit->add_option("--manifest", manifest, "sample manifest; the exact target is used without one");
  fit->add_option("--line-height,--line_height", line_height, "block height")->capture_default_str();
  fit->add_option("-o,--output", output, "fit file (default <out>/fit.txt)");

  encode->add_option("--image", image, "input raster")->required();
  encode->add_option("--theta-star,--theta_star", theta_star, "fit file for the lines; fitted exactly if absent");
  encode->add_option("--line-height,--line_height", line_height, "n_L")->capture_default_str();
  encode->add_option("--strip-height,--strip_height", strip_height, "n_S")->capture_default_str();
  encode->add_option("-o,--output", output, "stream file")->required();

  decode->add_option("--input", input, "stream file")->required();
  decode->add_option("-o,--output", output, "raster file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kSpecError;
  }

  try {
    for (auto* sub : app.get_subcommands())
      if (!spec_file.empty()) apply_spec_file(*sub, spec_file);
    if (!decode->parsed()) spec.validate();
    if (sample->parsed()) return cmd_sample(spec);
    if (fit->parsed()) return cmd_fit(spec, manifest, line_height, output);
    if (encode->parsed()) return cmd_encode(spec, image, theta_star, line_height, strip_height, output);
    if (decode->parsed()) return cmd_decode(input, output);
    if (rates->parsed()) return cmd_sweep(spec, false);
    if (redundancy->parsed()) return cmd_sweep(spec, true);
    if (verify->parsed()) return cmd_verify(spec);
  } catch (const CorruptStream& e) {
    log_line(std::string("corrupt stream: ") + e.what());
    return kCorrupt;
  } catch (const FormatError& e) {
    log_line(e.what());
    return kSpecError;
  } catch (const NoValidTiling& e) {
    log_line(e.what());
    return kSpecError;
  } catch (const LayoutMismatch& e) {
    log_line(e.what());
    return kSpecError;
  } catch (const std::exception& e) {
    log_line(e.what());
    return kFailure;
  }
  return kFailure;
}
