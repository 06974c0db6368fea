#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace gspdc::source {

/// Physical timing and efficiency parameters of the gated source.
/// Defaults describe the reference setup: 10^6 pairs/s in 100 us windows,
/// 8% lumped control detection (8 heralds per window on average), 68% fiber
/// coupling, 50% delay-line transmittance, 150 ns gate electronics latency,
/// 50 ns shutter opening with 83% transmittance and 0.1% closed leakage.
/// The delay latency centers a heralded photon in its gate.
struct SourceParams {
  double pair_rate = 1.0e6;            // pairs / second
  double window_duration = 1.0e-4;     // seconds
  double control_det_eff = 0.08;       // lumped control-arm detection probability
  double coupling_eff = 0.68;          // signal photon into delay fiber
  double delay_transmittance = 0.50;   // delay line incl. couplers and filters
  double delay_latency = 1.75e-7;      // seconds, signal arrival delay at shutter
  double gate_latency = 1.5e-7;        // seconds, detection -> shutter open
  double shutter_open = 5.0e-8;        // seconds the shutter stays open
  double shutter_transmittance = 0.83; // when open
  double shutter_leakage = 1.0e-3;     // when closed
  std::uint64_t master_seed = 42;

  /// Throws config_error when any invariant is violated.
  void validate() const;

  double mean_pairs_per_window() const { return pair_rate * window_duration; }
  double mean_control_per_window() const {
    return mean_pairs_per_window() * control_det_eff;
  }
};

/// One signal/control pair, created simultaneously at time t in the window.
struct PairEvent {
  double t = 0.0;
};

struct GateInterval {
  double t_open = 0.0;
  double t_close = 0.0;
};

/// Everything that happened in one gate window. Emitted times are
/// shutter-arrival times (pair time + delay latency), sorted.
struct WindowRecord {
  std::uint64_t window_index = 0;
  std::vector<PairEvent> pairs;             // sorted by t
  std::vector<double> control_detections;   // sorted
  std::optional<GateInterval> gate;
  std::vector<double> emitted;              // sorted
};

/// Poisson(pair_rate * window_duration) pairs with i.i.d. uniform times,
/// sorted. Pure function of (params.master_seed, window_index).
std::vector<PairEvent> generate_pairs(const SourceParams& params,
                                      std::uint64_t window_index);

/// Bernoulli(control_det_eff) thinning of the pair times.
std::vector<double> detect_control(const std::vector<PairEvent>& pairs,
                                   const SourceParams& params,
                                   std::uint64_t window_index);

/// One gate per window, opened gate_latency after the first control
/// detection for shutter_open seconds. No detections, no gate.
std::optional<GateInterval> gate_controller(
    const std::vector<double>& control_detections, const SourceParams& params);

/// Run each signal photon through coupling, delay-line and shutter. Photons
/// arriving inside the gate pass with shutter_transmittance, outside with
/// shutter_leakage. Returns sorted shutter-arrival times of the survivors.
std::vector<double> propagate_signal(const std::vector<PairEvent>& pairs,
                                     const std::optional<GateInterval>& gate,
                                     const SourceParams& params,
                                     std::uint64_t window_index);

WindowRecord simulate_window(const SourceParams& params,
                             std::uint64_t window_index);

/// Simulate n_windows windows, delivering records to `sink` in window-index
/// order. Worker threads partition blocks of windows; the output is bitwise
/// identical for any thread count because each window's randomness is keyed
/// by (master_seed, window_index) alone.
void simulate_run(const SourceParams& params, std::uint64_t n_windows,
                  unsigned threads,
                  const std::function<void(WindowRecord&&)>& sink);

/// Convenience overload collecting all records (small runs only).
std::vector<WindowRecord> simulate_run(const SourceParams& params,
                                       std::uint64_t n_windows,
                                       unsigned threads = 1);

} // namespace gspdc::source
