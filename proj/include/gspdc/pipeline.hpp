#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gspdc/analyzer.hpp"
#include "gspdc/source.hpp"
#include "gspdc/statkit.hpp"

namespace gspdc::pipeline {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kPresetVersion = 1;

enum class CorrectionOrder {
  deadtime_then_dark, // undo dead-time merge, then dark counts, then invert
  dark_then_deadtime,
};

/// Settings for the correction + inversion chain. The dead-time step is the
/// two-count merge-channel inversion parameterized by merge_prob; with the
/// default merge_prob = 0 it is the identity, because the calibrated value
/// for fully gated pairs (gate width <= dead time) is 1, which is not
/// invertible from count data alone. Users probing the compensation choose
/// merge_prob explicitly (see estimate_gated_merge_prob).
struct AnalysisSettings {
  int n_max = -1; // -1: highest observed count
  bool correct_dark = true;
  bool correct_deadtime = true;
  double merge_prob = 0.0;
  CorrectionOrder order = CorrectionOrder::deadtime_then_dark;
  double negative_mass_tol = stat::kDefaultTol.negative_mass;
  std::uint64_t n_uncertainty_samples = 10000;
  bool fold_counting_error = true;
};

struct RunSettings {
  std::uint64_t n_windows = 100000;
  std::uint64_t master_seed = 42;
  std::string out_dir = "out";
  unsigned threads = 1;
  std::string format = "json"; // distribution output: "json" or "csv"
  bool write_records = false;
};

struct RunConfig {
  source::SourceParams source;
  analyzer::AnalyzerParams analyzer;
  AnalysisSettings analysis;
  RunSettings run;

  /// Copies run.master_seed into the source params and validates everything.
  void finalize();
};

/// Reference configuration: the measured setup all defaults describe.
RunConfig reference_config();

/// Reference measured values used by `reproduce` for side-by-side output.
struct ReferenceValues {
  std::vector<double> pprime;      // observed count fractions
  double p1, p1_sigma;             // inferred single-photon probability
  double p2, p2_sigma;
  double mean, mean_sigma;
  double eta, eta_sigma;
};
const ReferenceValues& reference_values();

struct SimulationResult {
  analyzer::CountHistogram histogram;       // registered counts per window
  analyzer::CountHistogram emitted_hist;    // true emitted photons per window
  analyzer::CountHistogram gated_only_hist; // analyzer on in-gate photons only, dark off
  double mean_control = 0.0;
  double vacuum_gate_fraction = 0.0;
};

/// Simulate n_windows windows and tally registered counts plus the
/// diagnostics above. `record_sink`, when set, receives every WindowRecord
/// in window order (used for NDJSON audit output).
SimulationResult run_simulation(
    const RunConfig& config,
    const std::function<void(const source::WindowRecord&)>& record_sink = {});

struct Diagnostics {
  double mean = 0.0;
  std::optional<double> fano;
  std::optional<double> g2;
  std::optional<double> vacuum_gate_rate;
  double mean_control_per_window = 0.0; // configured m for the vacuum-gate law
  std::optional<double> order_sensitivity; // max P(j) shift between correction orders
};

struct WclComparison {
  double mu_same_mean = 0.0;
  std::vector<double> same_mean;
  std::optional<double> mu_same_p2;
  std::vector<double> same_p2;
  std::optional<double> p1_ratio_same_p2; // P_source(1) / P_wcl_p2(1)
};

struct Provenance {
  std::uint64_t master_seed = 0;
  std::string version = kVersion;
  double wall_time_s = 0.0; // excluded from reproducibility comparisons
};

struct Report {
  RunConfig config;
  std::optional<analyzer::CountHistogram> histogram;
  std::optional<std::uint64_t> n_windows;
  std::vector<double> pprime_raw;
  std::vector<double> pprime_corrected;
  stat::PhotonDist photon_dist;    // point estimate; sigma from the MC
  stat::PhotonDist photon_dist_mc; // MC mean and sigma
  stat::EfficiencyBudget budget;
  Diagnostics diagnostics;
  WclComparison wcl;
  std::optional<SimulationResult> simulation;
  Provenance provenance;
};

/// Correction chain + inversion + diagnostics + comparators for a measured
/// count distribution. `n_windows` enables the multinomial part of the
/// uncertainty propagation.
Report analyze(const stat::PhotonDist& pprime,
               std::optional<std::uint64_t> n_windows, const RunConfig& config);

/// simulate + analyze in one go (the `simulate` and `reproduce` commands).
Report analyze_simulation(const RunConfig& config,
                          const SimulationResult& sim);

struct CompareRow {
  int j;
  double p_source;
  double p_wcl_mean;
  double p_wcl_p2; // NaN when the P(2) match is undefined
};

struct CompareResult {
  double mu_same_mean = 0.0;
  std::optional<double> mu_same_p2;
  std::vector<CompareRow> rows;
  std::optional<double> p1_ratio_same_mean;
  std::optional<double> p2_ratio_same_mean; // P2_wcl / P2_source
  std::optional<double> p1_ratio_same_p2;
};

CompareResult compare_wcl(const stat::PhotonDist& dist);

enum class SweepParam { pair_rate, window_duration, control_det_eff };

struct SweepRow {
  double value = 0.0;
  double mean_control = 0.0;
  double vacuum_gate_prob = 0.0; // exp(-mean_control)
  double p0 = 0.0, p1 = 0.0, p2 = 0.0; // estimated photon-number probabilities
  bool analysis_ok = true;
};

/// One simulated row per grid value; every row reuses the configured master
/// seed so that a single-point grid reproduces the plain simulate result.
std::vector<SweepRow> run_sweep(const RunConfig& base, SweepParam param,
                                const std::vector<double>& values);

} // namespace gspdc::pipeline
