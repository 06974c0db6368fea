#include "gspdc/source.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "gspdc/errors.hpp"
#include "gspdc/rng.hpp"

namespace gspdc::source {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw config_error(msg);
}

bool is_prob(double p) { return p >= 0.0 && p <= 1.0; }

} // namespace

void SourceParams::validate() const {
  require(pair_rate >= 0.0 && std::isfinite(pair_rate),
          "source: pair_rate must be >= 0");
  require(window_duration > 0.0, "source: window_duration must be > 0");
  require(delay_latency > 0.0, "source: delay_latency must be > 0");
  require(gate_latency > 0.0, "source: gate_latency must be > 0");
  require(shutter_open > 0.0, "source: shutter_open must be > 0");
  require(is_prob(control_det_eff), "source: control_det_eff must be in [0,1]");
  require(is_prob(coupling_eff), "source: coupling_eff must be in [0,1]");
  require(is_prob(delay_transmittance),
          "source: delay_transmittance must be in [0,1]");
  require(is_prob(shutter_transmittance),
          "source: shutter_transmittance must be in [0,1]");
  require(is_prob(shutter_leakage), "source: shutter_leakage must be in [0,1]");
  require(shutter_leakage <= shutter_transmittance,
          "source: shutter_leakage must not exceed shutter_transmittance");
  require(delay_latency >= gate_latency,
          "source: delay_latency must be >= gate_latency (heralded photon "
          "must not reach the shutter before it opens)");
}

std::vector<PairEvent> generate_pairs(const SourceParams& params,
                                      std::uint64_t window_index) {
  params.validate();
  rng::Stream count_stream(params.master_seed, window_index,
                           rng::Tag::pair_count);
  const std::uint64_t n = rng::poisson(count_stream,
                                       params.mean_pairs_per_window());
  rng::Stream time_stream(params.master_seed, window_index,
                          rng::Tag::pair_times);
  std::vector<PairEvent> pairs(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    pairs[i].t = time_stream.unit_at(i) * params.window_duration;
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const PairEvent& a, const PairEvent& b) { return a.t < b.t; });
  return pairs;
}

std::vector<double> detect_control(const std::vector<PairEvent>& pairs,
                                   const SourceParams& params,
                                   std::uint64_t window_index) {
  rng::Stream st(params.master_seed, window_index, rng::Tag::control_thin);
  std::vector<double> detections;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (st.unit_at(i) < params.control_det_eff) {
      detections.push_back(pairs[i].t);
    }
  }
  return detections;
}

std::optional<GateInterval> gate_controller(
    const std::vector<double>& control_detections, const SourceParams& params) {
  if (control_detections.empty()) return std::nullopt;
  GateInterval g;
  g.t_open = control_detections.front() + params.gate_latency;
  g.t_close = g.t_open + params.shutter_open;
  return g;
}

std::vector<double> propagate_signal(const std::vector<PairEvent>& pairs,
                                     const std::optional<GateInterval>& gate,
                                     const SourceParams& params,
                                     std::uint64_t window_index) {
  rng::Stream st(params.master_seed, window_index, rng::Tag::signal_path);
  std::vector<double> emitted;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    // Three positionally addressed draws per pair keep survival monotone in
    // each transmittance: raising a parameter can only turn losses into
    // passes, never the reverse.
    if (st.unit_at(3 * i) >= params.coupling_eff) continue;
    if (st.unit_at(3 * i + 1) >= params.delay_transmittance) continue;
    const double arrival = pairs[i].t + params.delay_latency;
    const bool in_gate =
        gate && arrival >= gate->t_open && arrival < gate->t_close;
    const double pass_prob =
        in_gate ? params.shutter_transmittance : params.shutter_leakage;
    if (st.unit_at(3 * i + 2) < pass_prob) {
      emitted.push_back(arrival);
    }
  }
  // already sorted: arrivals are pair times plus a constant
  return emitted;
}

WindowRecord simulate_window(const SourceParams& params,
                             std::uint64_t window_index) {
  WindowRecord rec;
  rec.window_index = window_index;
  rec.pairs = generate_pairs(params, window_index);
  rec.control_detections = detect_control(rec.pairs, params, window_index);
  rec.gate = gate_controller(rec.control_detections, params);
  rec.emitted = propagate_signal(rec.pairs, rec.gate, params, window_index);
  return rec;
}

void simulate_run(const SourceParams& params, std::uint64_t n_windows,
                  unsigned threads,
                  const std::function<void(WindowRecord&&)>& sink) {
  params.validate();
  if (n_windows < 1) throw config_error("simulate_run: n_windows must be >= 1");
  if (threads < 1) threads = 1;

  constexpr std::uint64_t kBlock = 8192;
  std::vector<WindowRecord> block;
  std::exception_ptr worker_error;
  std::mutex error_mutex;

  for (std::uint64_t begin = 0; begin < n_windows; begin += kBlock) {
    const std::uint64_t end = std::min(begin + kBlock, n_windows);
    block.resize(end - begin);

    const unsigned nt = static_cast<unsigned>(
        std::min<std::uint64_t>(threads, end - begin));
    if (nt <= 1) {
      for (std::uint64_t w = begin; w < end; ++w) {
        block[w - begin] = simulate_window(params, w);
      }
    } else {
      std::vector<std::thread> pool;
      pool.reserve(nt);
      for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::uint64_t w = begin + t; w < end; w += nt) {
              block[w - begin] = simulate_window(params, w);
            }
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!worker_error) worker_error = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      if (worker_error) std::rethrow_exception(worker_error);
    }

    for (auto& rec : block) sink(std::move(rec));
  }
}

std::vector<WindowRecord> simulate_run(const SourceParams& params,
                                       std::uint64_t n_windows,
                                       unsigned threads) {
  std::vector<WindowRecord> records;
  records.reserve(n_windows);
  simulate_run(params, n_windows, threads,
               [&](WindowRecord&& rec) { records.push_back(std::move(rec)); });
  return records;
}

} // namespace gspdc::source
