#include "gspdc/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gspdc/errors.hpp"
#include "gspdc/rng.hpp"

namespace gspdc::analyzer {

void AnalyzerParams::validate() const {
  if (stage_effs.empty()) {
    throw config_error("analyzer: at least one efficiency stage required");
  }
  for (const auto& s : stage_effs) {
    if (!(s.efficiency > 0.0 && s.efficiency <= 1.0)) {
      throw config_error("analyzer: stage efficiency must be in (0,1]");
    }
    if (s.sigma < 0.0) {
      throw config_error("analyzer: stage sigma must be >= 0");
    }
  }
  if (!(dark_rate >= 0.0)) throw config_error("analyzer: dark_rate must be >= 0");
  if (!(dead_time >= 0.0)) throw config_error("analyzer: dead_time must be >= 0");
}

double AnalyzerParams::effective_efficiency() const {
  double eta = 1.0;
  for (const auto& s : stage_effs) eta *= s.efficiency;
  return eta;
}

stat::EfficiencyBudget AnalyzerParams::budget() const {
  return stat::budget_effective(stage_effs);
}

void CountHistogram::add(int registered) {
  if (registered < 0) throw config_error("histogram: negative count");
  if (static_cast<std::size_t>(registered) >= counts.size()) {
    counts.resize(static_cast<std::size_t>(registered) + 1, 0);
  }
  ++counts[static_cast<std::size_t>(registered)];
  ++n_windows;
}

double CountHistogram::fraction(int i) const {
  if (n_windows == 0) throw config_error("histogram: empty");
  if (i < 0 || static_cast<std::size_t>(i) >= counts.size()) return 0.0;
  return static_cast<double>(counts[static_cast<std::size_t>(i)]) /
         static_cast<double>(n_windows);
}

std::vector<double> CountHistogram::fractions() const {
  if (n_windows == 0) throw config_error("histogram: empty");
  std::vector<double> f(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    f[i] = static_cast<double>(counts[i]) / static_cast<double>(n_windows);
  }
  return f;
}

double CountHistogram::mean() const {
  if (n_windows == 0) throw config_error("histogram: empty");
  double s = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    s += static_cast<double>(i) * static_cast<double>(counts[i]);
  }
  return s / static_cast<double>(n_windows);
}

int count_registered(std::span<const double> events, double dead_time,
                     bool paralyzable) {
  int registered = 0;
  double blocked_until = -std::numeric_limits<double>::infinity();
  for (double t : events) {
    if (t >= blocked_until) {
      ++registered;
      blocked_until = t + dead_time;
    } else if (paralyzable) {
      // a blocked arrival extends the dead window
      blocked_until = t + dead_time;
    }
  }
  return registered;
}

int detect_window(std::span<const double> emitted, const AnalyzerParams& params,
                  double window_duration, std::uint64_t master_seed,
                  std::uint64_t window_index) {
  if (!(window_duration > 0.0)) {
    throw config_error("detect_window: window_duration must be > 0");
  }
  const double eta = params.effective_efficiency();

  std::vector<double> events;
  events.reserve(emitted.size() + 2);
  rng::Stream thin(master_seed, window_index, rng::Tag::analyzer_thin);
  for (std::size_t j = 0; j < emitted.size(); ++j) {
    if (thin.unit_at(j) < eta) events.push_back(emitted[j]);
  }

  rng::Stream dark(master_seed, window_index, rng::Tag::dark);
  const std::uint64_t n_dark =
      rng::poisson(dark, params.dark_rate * window_duration);
  for (std::uint64_t k = 0; k < n_dark; ++k) {
    events.push_back(dark.next_unit() * window_duration);
  }

  std::sort(events.begin(), events.end());
  return count_registered(events, params.dead_time, params.paralyzable);
}

CountHistogram build_histogram(std::span<const int> counts_per_window) {
  if (counts_per_window.empty()) {
    throw config_error("build_histogram: at least one window required");
  }
  CountHistogram h;
  for (int c : counts_per_window) h.add(c);
  return h;
}

double estimate_gated_merge_prob(double gate_width, double dead_time,
                                 std::uint64_t n_samples, std::uint64_t seed) {
  if (!(gate_width > 0.0)) {
    throw config_error("estimate_gated_merge_prob: gate_width must be > 0");
  }
  if (n_samples < 1) {
    throw config_error("estimate_gated_merge_prob: n_samples must be >= 1");
  }
  std::uint64_t merged = 0;
  for (std::uint64_t s = 0; s < n_samples; ++s) {
    rng::Stream st(seed, s, rng::Tag::merge_calib);
    double a = st.next_unit() * gate_width;
    double b = st.next_unit() * gate_width;
    if (a > b) std::swap(a, b);
    const double pair[2] = {a, b};
    if (count_registered(pair, dead_time, false) < 2) ++merged;
  }
  return static_cast<double>(merged) / static_cast<double>(n_samples);
}

} // namespace gspdc::analyzer
