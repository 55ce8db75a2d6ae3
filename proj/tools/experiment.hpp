#pragma once

// Experiment driver behind the rcc command: sweeps over (n_L, n_S) layouts
// with the exact oracle and Gibbs-sample estimates.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcc/lattice.hpp"
#include "rcc/oracle.hpp"

namespace rcc::cli {

struct ExperimentSpec {
  int q = 2;                 // 2: Ising; otherwise Potts with a linear node term
  std::string model_path;    // when set, replaces q, rows and the thetas
  double theta_node = 0.0;
  double theta_edge = 0.4;
  Index rows = 24;
  Index cols = 8;
  std::vector<Index> line_heights{1, 2, 3, 4};
  std::vector<Index> strip_heights{1, 2, 3, 4};
  // Pairs in this list (flattened n_L, n_S, n_L, n_S...) replace the grid.
  std::vector<Index> pairs;
  // Shrink rows per pair to the largest valid height instead of skipping.
  bool auto_rows = false;

  int burn_in = 1000;
  int thinning = 10;
  std::uint64_t seed = 1;
  int samples = 0;  // images for the empirical columns; 0 disables them

  double fit_tolerance = 1e-11;
  int max_iter = 200000;
  Index max_n = 4;
  Index max_gap = 5;

  std::string out_dir = ".";
  int jobs = 1;

  void validate() const;
  PairwiseFamily family() const;
  // Global model with `height` rows.
  LatticeModel model(Index height) const;
  OracleOptions oracle_options() const;
};

struct SweepPoint {
  Index line_height = 0;
  Index strip_height = 0;
  Index rows = 0;
};

// Pairs that tile, in grid order; skipped pairs are reported to `log`.
std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec, const std::function<void(const std::string&)>& log);

struct SweepRow {
  SweepPoint point;
  RateReport exact;
  // Empirical estimates; NaN when samples == 0. Bits per pixel.
  double emp_line_rate = 0.0;
  double emp_strip_rate = 0.0;
  double coded_rate = 0.0;  // arithmetic coder, whole image
  double seconds = 0.0;
};

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, const std::vector<SweepPoint>& points);

std::string rates_csv(const std::vector<SweepRow>& rows);
std::string redundancy_csv(const std::vector<SweepRow>& rows);

std::vector<LedgerEntry> run_verify(const ExperimentSpec& spec);
std::string ledger_csv(const std::vector<LedgerEntry>& ledger);

// Quotes a CSV field when needed.
std::string csv_field(const std::string& s);

}  // namespace rcc::cli
