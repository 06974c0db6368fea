#include "gspdc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gspdc/errors.hpp"

namespace gspdc::pipeline {

void RunConfig::finalize() {
  source.master_seed = run.master_seed;
  source.validate();
  analyzer.validate();
  if (run.n_windows < 1) throw config_error("run: n_windows must be >= 1");
  if (run.threads < 1) run.threads = 1;
  if (run.format != "json" && run.format != "csv") {
    throw config_error("run: format must be json or csv");
  }
  if (!(analysis.merge_prob >= 0.0 && analysis.merge_prob <= 1.0)) {
    throw config_error("analysis: merge_prob must be in [0,1]");
  }
  if (analysis.n_max < -1) throw config_error("analysis: n_max must be >= -1");
  if (analysis.negative_mass_tol < 0.0) {
    throw config_error("analysis: negative_mass_tol must be >= 0");
  }
  if (analysis.n_uncertainty_samples < 1) {
    throw config_error("analysis: n_uncertainty_samples must be >= 1");
  }
}

RunConfig reference_config() {
  RunConfig cfg; // defaults are the reference setup
  cfg.finalize();
  return cfg;
}

const ReferenceValues& reference_values() {
  static const ReferenceValues v{
      {0.9199, 0.0794, 0.0005}, // P'(0..2)
      0.265, 0.02,              // P(1)
      0.011, 0.001,             // P(2)
      0.29, 0.02,               // <n>
      0.274, 0.019,             // analyzer efficiency
  };
  return v;
}

SimulationResult run_simulation(
    const RunConfig& config,
    const std::function<void(const source::WindowRecord&)>& record_sink) {
  const auto& sp = config.source;
  analyzer::AnalyzerParams gated_params = config.analyzer;
  gated_params.dark_rate = 0.0;

  SimulationResult out;
  std::uint64_t control_total = 0;
  std::uint64_t vacuum_windows = 0;
  std::vector<double> gated;

  source::simulate_run(
      sp, config.run.n_windows, config.run.threads,
      [&](source::WindowRecord&& rec) {
        const int registered = analyzer::detect_window(
            rec.emitted, config.analyzer, sp.window_duration, sp.master_seed,
            rec.window_index);
        out.histogram.add(registered);
        out.emitted_hist.add(static_cast<int>(rec.emitted.size()));

        control_total += rec.control_detections.size();
        if (!rec.gate) ++vacuum_windows;

        gated.clear();
        if (rec.gate) {
          for (double t : rec.emitted) {
            if (t >= rec.gate->t_open && t < rec.gate->t_close) {
              gated.push_back(t);
            }
          }
        }
        out.gated_only_hist.add(analyzer::detect_window(
            gated, gated_params, sp.window_duration, sp.master_seed,
            rec.window_index));

        if (record_sink) record_sink(rec);
      });

  const double n = static_cast<double>(config.run.n_windows);
  out.mean_control = static_cast<double>(control_total) / n;
  out.vacuum_gate_fraction = static_cast<double>(vacuum_windows) / n;
  return out;
}

namespace {

stat::PhotonDist apply_corrections(const stat::PhotonDist& pprime,
                                   const AnalysisSettings& a, double dark_mean,
                                   CorrectionOrder order) {
  stat::PhotonDist cur = pprime;
  const auto deadtime_step = [&] {
    if (a.correct_deadtime) {
      cur = stat::deadtime_correct(cur, a.merge_prob, a.negative_mass_tol);
    }
  };
  const auto dark_step = [&] {
    if (a.correct_dark) {
      cur = stat::dark_correct(cur, dark_mean, a.negative_mass_tol);
    }
  };
  if (order == CorrectionOrder::deadtime_then_dark) {
    deadtime_step();
    dark_step();
  } else {
    dark_step();
    deadtime_step();
  }
  return cur;
}

WclComparison wcl_comparison(const stat::PhotonDist& dist, int n_max) {
  WclComparison w;
  w.mu_same_mean = stat::match_wcl_by_mean(dist);
  w.same_mean = stat::poisson_dist(w.mu_same_mean, n_max).probs;
  if (dist.n_max() >= 2 && dist.probs[2] > 0.0) {
    try {
      const double mu2 = stat::match_wcl_by_p2(dist.probs[2]);
      w.mu_same_p2 = mu2;
      w.same_p2 = stat::poisson_dist(mu2, n_max).probs;
      if (w.same_p2[1] > 0.0) {
        w.p1_ratio_same_p2 = dist.probs[1] / w.same_p2[1];
      }
    } catch (const config_error&) {
      // target P(2) outside the Poisson range: leave the comparator empty
    }
  }
  return w;
}

} // namespace

Report analyze(const stat::PhotonDist& pprime,
               std::optional<std::uint64_t> n_windows, const RunConfig& config) {
  RunConfig cfg = config;
  cfg.finalize();
  const AnalysisSettings& a = cfg.analysis;

  const int observed_max = pprime.n_max();
  const int n_max = a.n_max < 0 ? observed_max : a.n_max;
  if (n_max < observed_max) {
    throw config_error("analysis: n_max below the highest observed count");
  }

  Report rep;
  rep.config = cfg;
  rep.n_windows = n_windows;
  rep.pprime_raw = pprime.probs;
  rep.budget = cfg.analyzer.budget();
  rep.provenance.master_seed = cfg.run.master_seed;

  const double dark_mean = cfg.analyzer.dark_rate * cfg.source.window_duration;
  const stat::PhotonDist corrected =
      apply_corrections(pprime, a, dark_mean, a.order);
  rep.pprime_corrected = corrected.probs;

  rep.photon_dist =
      stat::invert_loss(corrected, rep.budget.effective, n_max,
                        a.negative_mass_tol);

  // Correction-order sensitivity, reported so users can see how much the
  // unspecified ordering matters at their rates.
  try {
    const CorrectionOrder other = a.order == CorrectionOrder::deadtime_then_dark
                                      ? CorrectionOrder::dark_then_deadtime
                                      : CorrectionOrder::deadtime_then_dark;
    const stat::PhotonDist alt = stat::invert_loss(
        apply_corrections(pprime, a, dark_mean, other), rep.budget.effective,
        n_max, a.negative_mass_tol);
    double max_shift = 0.0;
    for (int j = 0; j <= n_max; ++j) {
      max_shift = std::max(max_shift,
                           std::abs(alt.probs[static_cast<std::size_t>(j)] -
                                    rep.photon_dist.probs[static_cast<std::size_t>(j)]));
    }
    rep.diagnostics.order_sensitivity = max_shift;
  } catch (const analysis_error&) {
    rep.diagnostics.order_sensitivity = std::nullopt;
  }

  rep.photon_dist_mc = stat::propagate_eta_uncertainty(
      corrected, rep.budget, n_max, a.n_uncertainty_samples,
      cfg.run.master_seed, a.fold_counting_error ? n_windows : std::nullopt,
      a.negative_mass_tol);
  rep.photon_dist.sigma = rep.photon_dist_mc.sigma;

  rep.diagnostics.mean = stat::mean_photon(rep.photon_dist);
  try {
    rep.diagnostics.fano = stat::fano(rep.photon_dist);
    rep.diagnostics.g2 = stat::g2_zero(rep.photon_dist);
  } catch (const analysis_error&) {
    // vacuum output: Fano factor and g2 undefined
  }
  rep.diagnostics.mean_control_per_window =
      cfg.source.mean_control_per_window();

  if (rep.diagnostics.mean > 0.0) {
    rep.wcl = wcl_comparison(rep.photon_dist, n_max);
  }
  return rep;
}

Report analyze_simulation(const RunConfig& config, const SimulationResult& sim) {
  Report rep =
      analyze(sim.histogram.as_dist(), sim.histogram.n_windows, config);
  rep.histogram = sim.histogram;
  rep.simulation = sim;
  rep.diagnostics.vacuum_gate_rate = sim.vacuum_gate_fraction;
  return rep;
}

CompareResult compare_wcl(const stat::PhotonDist& dist) {
  const double mean = stat::mean_photon(dist);
  if (mean == 0.0) {
    throw analysis_error("compare: mean photon number is zero");
  }
  CompareResult res;
  res.mu_same_mean = mean;
  const int n_max = dist.n_max();
  const stat::PhotonDist wcl_mean = stat::poisson_dist(mean, n_max);

  stat::PhotonDist wcl_p2;
  if (n_max >= 2 && dist.probs[2] > 0.0) {
    try {
      const double mu2 = stat::match_wcl_by_p2(dist.probs[2]);
      res.mu_same_p2 = mu2;
      wcl_p2 = stat::poisson_dist(mu2, n_max);
    } catch (const config_error&) {
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int j = 0; j <= n_max; ++j) {
    CompareRow row;
    row.j = j;
    row.p_source = dist.probs[static_cast<std::size_t>(j)];
    row.p_wcl_mean = wcl_mean.probs[static_cast<std::size_t>(j)];
    row.p_wcl_p2 =
        res.mu_same_p2 ? wcl_p2.probs[static_cast<std::size_t>(j)] : nan;
    res.rows.push_back(row);
  }

  if (n_max >= 1 && wcl_mean.probs[1] > 0.0) {
    res.p1_ratio_same_mean = dist.probs[1] / wcl_mean.probs[1];
  }
  if (n_max >= 2 && dist.probs[2] > 0.0) {
    res.p2_ratio_same_mean = wcl_mean.probs[2] / dist.probs[2];
  }
  if (res.mu_same_p2 && wcl_p2.probs[1] > 0.0) {
    res.p1_ratio_same_p2 = dist.probs[1] / wcl_p2.probs[1];
  }
  return res;
}

std::vector<SweepRow> run_sweep(const RunConfig& base, SweepParam param,
                                const std::vector<double>& values) {
  if (values.empty()) throw config_error("sweep: empty grid");
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    RunConfig cfg = base;
    switch (param) {
      case SweepParam::pair_rate: cfg.source.pair_rate = v; break;
      case SweepParam::window_duration: cfg.source.window_duration = v; break;
      case SweepParam::control_det_eff: cfg.source.control_det_eff = v; break;
    }
    cfg.finalize();

    SweepRow row;
    row.value = v;
    row.mean_control = cfg.source.mean_control_per_window();
    row.vacuum_gate_prob = std::exp(-row.mean_control);
    try {
      const SimulationResult sim = run_simulation(cfg);
      const Report rep = analyze_simulation(cfg, sim);
      const auto& p = rep.photon_dist.probs;
      row.p0 = !p.empty() ? p[0] : 1.0;
      row.p1 = p.size() > 1 ? p[1] : 0.0;
      row.p2 = p.size() > 2 ? p[2] : 0.0;
    } catch (const analysis_error&) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.p0 = row.p1 = row.p2 = nan;
      row.analysis_ok = false;
    }
    rows.push_back(row);
  }
  return rows;
}

} // namespace gspdc::pipeline
