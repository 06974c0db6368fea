#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gspdc/statkit.hpp"

namespace gspdc::analyzer {

/// Photon number analyzer model: an itemized efficiency budget applied as a
/// single lumped Bernoulli per photon, Poisson dark counts uniform in the
/// window, and counter dead time (non-paralyzable by default).
struct AnalyzerParams {
  std::vector<stat::EfficiencyStage> stage_effs = {
      {"spcm", 0.70, 0.05},
      {"lens_mirror", 0.902, 0.0},
      {"stray_filter", 0.492, 0.0},
      {"fiber_coupler", 0.882, 0.0},
  };
  double dark_rate = 100.0; // counts / second
  double dead_time = 5.0e-8; // seconds
  bool paralyzable = false;

  void validate() const;
  double effective_efficiency() const;
  stat::EfficiencyBudget budget() const;
};

/// Empirical per-window count tally; fraction(i) is P'(i).
struct CountHistogram {
  std::uint64_t n_windows = 0;
  std::vector<std::uint64_t> counts; // counts[i] = windows with i registered

  void add(int registered);
  int max_count() const { return static_cast<int>(counts.size()) - 1; }
  double fraction(int i) const;
  std::vector<double> fractions() const;
  stat::PhotonDist as_dist() const { return stat::PhotonDist(fractions()); }
  double mean() const;
};

/// Registered count for one window: eta thinning of the emitted photons,
/// Poisson dark events merged in time order, then the dead-time scan.
/// Deterministic per (master_seed, window_index).
int detect_window(std::span<const double> emitted, const AnalyzerParams& params,
                  double window_duration, std::uint64_t master_seed,
                  std::uint64_t window_index);

/// Dead-time scan alone (events sorted ascending).
int count_registered(std::span<const double> events, double dead_time,
                     bool paralyzable);

CountHistogram build_histogram(std::span<const int> counts_per_window);

/// Monte Carlo estimate of the probability that two analyzer-surviving
/// photons inside one gate merge into a single registered count, for the
/// given gate width and dead time. Calibrates deadtime_correct.
double estimate_gated_merge_prob(double gate_width, double dead_time,
                                 std::uint64_t n_samples, std::uint64_t seed);

} // namespace gspdc::analyzer
