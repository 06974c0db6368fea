#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gspdc/errors.hpp"
#include "gspdc/pipeline.hpp"
#include "gspdc/serialize.hpp"

namespace {

using namespace gspdc;

struct CommonOpts {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> windows;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
  std::optional<std::string> format;
  std::optional<int> n_max;
  std::optional<std::string> corrections;
  std::optional<double> merge_prob;
  std::optional<std::string> order;
  std::optional<double> neg_tol;
  std::optional<std::uint64_t> samples;
  std::optional<double> eta;
  std::optional<std::string> budget_path;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "Run configuration file (JSON)");
  cmd->add_option("--windows", o.windows, "Number of gate windows");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads (results identical for any count)");
  cmd->add_option("--format", o.format, "Distribution output format: json|csv");
  cmd->add_option("--n-max", o.n_max, "Inversion truncation (default: highest observed count)");
  cmd->add_option("--corrections", o.corrections,
                  "Comma list of corrections to apply: dark,deadtime or none");
  cmd->add_option("--merge-prob", o.merge_prob,
                  "Two-count merge probability for the dead-time correction");
  cmd->add_option("--order", o.order,
                  "Correction order: deadtime_then_dark|dark_then_deadtime");
  cmd->add_option("--neg-tol", o.neg_tol,
                  "Negative-mass clip tolerance (beyond it the analysis fails)");
  cmd->add_option("--samples", o.samples, "Uncertainty Monte Carlo samples");
  cmd->add_option("--eta", o.eta, "Single lumped analyzer efficiency (replaces the stage budget)");
  cmd->add_option("--budget", o.budget_path, "Efficiency budget file (JSON stage list)");
}

pipeline::RunConfig effective_config(const CommonOpts& o) {
  pipeline::RunConfig cfg;
  if (o.config_path) cfg = io::config_from_json(io::read_file(*o.config_path));
  if (o.windows) cfg.run.n_windows = *o.windows;
  if (o.seed) cfg.run.master_seed = *o.seed;
  if (o.out_dir) cfg.run.out_dir = *o.out_dir;
  if (o.threads) cfg.run.threads = *o.threads;
  if (o.format) cfg.run.format = *o.format;
  if (o.n_max) cfg.analysis.n_max = *o.n_max;
  if (o.corrections) {
    cfg.analysis.correct_dark = false;
    cfg.analysis.correct_deadtime = false;
    if (*o.corrections != "none") {
      std::stringstream ss(*o.corrections);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item == "dark") {
          cfg.analysis.correct_dark = true;
        } else if (item == "deadtime") {
          cfg.analysis.correct_deadtime = true;
        } else {
          throw config_error("unknown correction '" + item + "'");
        }
      }
    }
  }
  if (o.merge_prob) cfg.analysis.merge_prob = *o.merge_prob;
  if (o.order) {
    if (*o.order == "deadtime_then_dark") {
      cfg.analysis.order = pipeline::CorrectionOrder::deadtime_then_dark;
    } else if (*o.order == "dark_then_deadtime") {
      cfg.analysis.order = pipeline::CorrectionOrder::dark_then_deadtime;
    } else {
      throw config_error("unknown correction order '" + *o.order + "'");
    }
  }
  if (o.neg_tol) cfg.analysis.negative_mass_tol = *o.neg_tol;
  if (o.samples) cfg.analysis.n_uncertainty_samples = *o.samples;
  if (o.budget_path) {
    cfg.analyzer.stage_effs = io::budget_from_json(io::read_file(*o.budget_path));
  }
  if (o.eta) {
    cfg.analyzer.stage_effs = {{"lumped", *o.eta, 0.0}};
  }
  cfg.finalize();
  return cfg;
}

std::string path_join(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

void print_fractions(const char* label, const std::vector<double>& f) {
  std::printf("%s", label);
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::printf("%sP'(%zu)=%.6f", i ? ", " : "", i, f[i]);
  }
  std::printf("\n");
}

pipeline::SimulationResult do_simulate(const pipeline::RunConfig& cfg) {
  std::ofstream records;
  std::function<void(const source::WindowRecord&)> sink;
  if (cfg.run.write_records) {
    const std::string path = path_join(cfg.run.out_dir, "records.ndjson");
    io::write_file(path, ""); // create directories, truncate
    records.open(path, std::ios::binary | std::ios::app);
    if (!records) throw io_error("cannot open '" + path + "'");
    sink = [&records](const source::WindowRecord& rec) {
      records << io::record_to_json_line(rec) << '\n';
    };
  }
  pipeline::SimulationResult sim = pipeline::run_simulation(cfg, sink);
  if (records.is_open()) {
    records.flush();
    if (!records) throw io_error("failed writing window records");
  }
  return sim;
}

void write_simulation_outputs(const pipeline::RunConfig& cfg,
                              const pipeline::SimulationResult& sim) {
  io::write_file(path_join(cfg.run.out_dir, "histogram.csv"),
                 io::histogram_to_csv(sim.histogram));
  io::write_file(path_join(cfg.run.out_dir, "histogram.json"),
                 io::histogram_header_json(cfg, sim));
}

void write_report_outputs(const pipeline::RunConfig& cfg,
                          const pipeline::Report& rep) {
  io::write_file(path_join(cfg.run.out_dir, "report.json"),
                 io::report_to_json(rep));
  if (cfg.run.format == "csv") {
    io::write_file(path_join(cfg.run.out_dir, "photon_dist.csv"),
                   io::dist_to_csv(rep.photon_dist));
  } else {
    io::write_file(path_join(cfg.run.out_dir, "photon_dist.json"),
                   io::dist_to_json(rep.photon_dist));
  }
}

void print_report(const pipeline::Report& rep) {
  const auto& p = rep.photon_dist;
  for (int j = 0; j <= p.n_max(); ++j) {
    const double s = p.has_sigma() ? p.sigma[static_cast<std::size_t>(j)] : 0.0;
    std::printf("P(%d) = %.6f +/- %.6f\n", j, p.probs[static_cast<std::size_t>(j)], s);
  }
  std::printf("<n> = %.6f\n", rep.diagnostics.mean);
  if (rep.diagnostics.fano) {
    std::printf("Fano = %.6f, g2(0) = %.6f\n", *rep.diagnostics.fano,
                *rep.diagnostics.g2);
  } else {
    std::printf("Fano, g2(0): undefined (vacuum output)\n");
  }
  if (rep.diagnostics.order_sensitivity) {
    std::printf("correction order sensitivity: max |dP| = %.3g\n",
                *rep.diagnostics.order_sensitivity);
  }
  if (rep.wcl.same_mean.size() > 2) {
    std::printf("WCL same mean (mu=%.6f): P(1)=%.6f, P(2)=%.6f\n",
                rep.wcl.mu_same_mean, rep.wcl.same_mean[1], rep.wcl.same_mean[2]);
  } else if (rep.wcl.same_mean.size() > 1) {
    std::printf("WCL same mean (mu=%.6f): P(1)=%.6f\n", rep.wcl.mu_same_mean,
                rep.wcl.same_mean[1]);
  }
  if (rep.wcl.mu_same_p2) {
    std::printf("WCL same P(2) (mu=%.6f): P(1)=%.6f, source P(1) ratio = %.3f\n",
                *rep.wcl.mu_same_p2, rep.wcl.same_p2[1],
                rep.wcl.p1_ratio_same_p2 ? *rep.wcl.p1_ratio_same_p2 : 0.0);
  }
}

int cmd_simulate(const CommonOpts& o, bool write_records_flag) {
  pipeline::RunConfig cfg = effective_config(o);
  if (write_records_flag) cfg.run.write_records = true;
  const pipeline::SimulationResult sim = do_simulate(cfg);
  write_simulation_outputs(cfg, sim);
  std::printf("simulated %llu windows (seed %llu)\n",
              static_cast<unsigned long long>(cfg.run.n_windows),
              static_cast<unsigned long long>(cfg.run.master_seed));
  print_fractions("", sim.histogram.fractions());
  std::printf("mean control detections/window = %.4f, vacuum-gate fraction = %.3e\n",
              sim.mean_control, sim.vacuum_gate_fraction);
  std::printf("wrote %s\n", path_join(cfg.run.out_dir, "histogram.csv").c_str());
  return 0;
}

int cmd_analyze(const CommonOpts& o, const std::string& histogram_path,
                const std::string& pprime_inline,
                std::optional<std::uint64_t> n_windows_opt) {
  pipeline::RunConfig cfg = effective_config(o);

  stat::PhotonDist pprime;
  std::optional<std::uint64_t> n_windows = n_windows_opt;
  if (!histogram_path.empty() && !pprime_inline.empty()) {
    throw config_error("analyze: pass either --histogram or --pprime, not both");
  }
  if (!histogram_path.empty()) {
    const analyzer::CountHistogram h =
        io::histogram_from_csv(io::read_file(histogram_path));
    pprime = h.as_dist();
    if (!n_windows) n_windows = h.n_windows;
  } else if (!pprime_inline.empty()) {
    std::stringstream ss(pprime_inline);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        pprime.probs.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw config_error("analyze: bad --pprime entry '" + item + "'");
      }
    }
    if (pprime.probs.empty()) throw config_error("analyze: empty --pprime");
  } else {
    throw config_error("analyze: --histogram or --pprime required");
  }

  const auto start = std::chrono::steady_clock::now();
  pipeline::Report rep = pipeline::analyze(pprime, n_windows, cfg);
  rep.provenance.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_report_outputs(cfg, rep);
  print_report(rep);
  std::printf("wrote %s\n", path_join(cfg.run.out_dir, "report.json").c_str());
  return 0;
}

int cmd_compare(const CommonOpts& o, const std::string& dist_path) {
  pipeline::RunConfig cfg = effective_config(o);
  const stat::PhotonDist dist = io::dist_from_json(io::read_file(dist_path));
  const pipeline::CompareResult res = pipeline::compare_wcl(dist);
  io::write_file(path_join(cfg.run.out_dir, "fig2.csv"),
                 io::compare_to_csv(res));

  std::printf("j   P_source    P_wcl_mean  P_wcl_p2\n");
  for (const auto& row : res.rows) {
    std::printf("%-3d %-11.6f %-11.6f %-11.6f\n", row.j, row.p_source,
                row.p_wcl_mean, row.p_wcl_p2);
  }
  std::printf("same-mean WCL mu = %.6f\n", res.mu_same_mean);
  if (res.p1_ratio_same_mean) {
    std::printf("P(1) source / P(1) WCL(same mean) = %.3f (%s)\n",
                *res.p1_ratio_same_mean,
                *res.p1_ratio_same_mean > 1.0 ? "source higher" : "source lower");
  }
  if (res.p2_ratio_same_mean) {
    std::printf("P(2) WCL(same mean) / P(2) source = %.3f (%s)\n",
                *res.p2_ratio_same_mean,
                *res.p2_ratio_same_mean > 1.0 ? "source suppressed"
                                              : "source enhanced");
  }
  if (res.mu_same_p2 && res.p1_ratio_same_p2) {
    std::printf("same-P(2) WCL mu = %.6f; P(1) source / P(1) WCL = %.3f\n",
                *res.mu_same_p2, *res.p1_ratio_same_p2);
  }
  std::printf("wrote %s\n", path_join(cfg.run.out_dir, "fig2.csv").c_str());
  return 0;
}

int cmd_sweep(const CommonOpts& o, const std::string& param_name,
              const std::vector<double>& values) {
  pipeline::RunConfig cfg = effective_config(o);
  pipeline::SweepParam param;
  if (param_name == "pair_rate") {
    param = pipeline::SweepParam::pair_rate;
  } else if (param_name == "window_duration") {
    param = pipeline::SweepParam::window_duration;
  } else if (param_name == "control_det_eff") {
    param = pipeline::SweepParam::control_det_eff;
  } else {
    throw config_error("sweep: unknown parameter '" + param_name + "'");
  }
  const std::vector<pipeline::SweepRow> rows =
      pipeline::run_sweep(cfg, param, values);
  io::write_file(path_join(cfg.run.out_dir, "sweep.csv"),
                 io::sweep_to_csv(param, rows));
  std::printf("%-14s mean_ctrl  P0        P1        P2        vac_gate\n",
              param_name.c_str());
  for (const auto& r : rows) {
    std::printf("%-14.6g %-10.4f %-9.5f %-9.5f %-9.5f %.4e\n", r.value,
                r.mean_control, r.p0, r.p1, r.p2, r.vacuum_gate_prob);
  }
  std::printf("wrote %s\n", path_join(cfg.run.out_dir, "sweep.csv").c_str());
  return 0;
}

int cmd_reproduce(const CommonOpts& o, bool write_records_flag) {
  pipeline::RunConfig cfg = effective_config(o);
  if (write_records_flag) cfg.run.write_records = true;
  const auto start = std::chrono::steady_clock::now();
  const pipeline::SimulationResult sim = do_simulate(cfg);
  write_simulation_outputs(cfg, sim);
  pipeline::Report rep = pipeline::analyze_simulation(cfg, sim);
  rep.provenance.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_report_outputs(cfg, rep);
  const pipeline::CompareResult cmp = pipeline::compare_wcl(rep.photon_dist);
  io::write_file(path_join(cfg.run.out_dir, "fig2.csv"),
                 io::compare_to_csv(cmp));

  const pipeline::ReferenceValues& ref = pipeline::reference_values();
  std::printf("=== %llu windows at seed %llu ===\n",
              static_cast<unsigned long long>(cfg.run.n_windows),
              static_cast<unsigned long long>(cfg.run.master_seed));
  print_fractions("simulated: ", sim.histogram.fractions());
  std::printf("reference: P'(0)=%.4f, P'(1)=%.4f, P'(2)=%.4f\n", ref.pprime[0],
              ref.pprime[1], ref.pprime[2]);
  print_report(rep);
  std::printf("reference: P(1)=%.3f+/-%.3f, P(2)=%.3f+/-%.3f, <n>=%.2f+/-%.2f\n",
              ref.p1, ref.p1_sigma, ref.p2, ref.p2_sigma, ref.mean,
              ref.mean_sigma);
  std::printf("outputs in %s\n", cfg.run.out_dir.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"gated single-photon source simulator and counting-statistics toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;

  CLI::App* sim = app.add_subcommand("simulate", "simulate gate windows and tally registered counts");
  add_common(sim, opts);
  bool records_flag = false;
  sim->add_flag("--records", records_flag, "also write per-window records (NDJSON)");

  CLI::App* ana = app.add_subcommand("analyze", "correct and invert a measured count distribution");
  add_common(ana, opts);
  std::string histogram_path, pprime_inline;
  std::optional<std::uint64_t> n_windows_opt;
  ana->add_option("--histogram", histogram_path, "histogram CSV from simulate");
  ana->add_option("--pprime", pprime_inline, "inline count fractions, e.g. 0.9199,0.0794,0.0005");
  ana->add_option("--n-windows", n_windows_opt, "window count behind the fractions (for counting error)");

  CLI::App* cmp = app.add_subcommand("compare", "compare a photon-number distribution against matched weak coherent light");
  add_common(cmp, opts);
  std::string dist_path;
  cmp->add_option("--dist", dist_path, "photon distribution JSON")->required();

  CLI::App* swp = app.add_subcommand("sweep", "simulate across a parameter grid");
  add_common(swp, opts);
  std::string sweep_param;
  std::vector<double> sweep_values;
  swp->add_option("--param", sweep_param, "pair_rate|window_duration|control_det_eff")->required();
  swp->add_option("--values", sweep_values, "grid values")->required()->delimiter(',');

  CLI::App* rep = app.add_subcommand("reproduce", "run the reference preset end to end");
  add_common(rep, opts);
  bool rep_records = false;
  rep->add_flag("--records", rep_records, "also write per-window records (NDJSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(sim)) return cmd_simulate(opts, records_flag);
    if (app.got_subcommand(ana)) {
      return cmd_analyze(opts, histogram_path, pprime_inline, n_windows_opt);
    }
    if (app.got_subcommand(cmp)) return cmd_compare(opts, dist_path);
    if (app.got_subcommand(swp)) return cmd_sweep(opts, sweep_param, sweep_values);
    if (app.got_subcommand(rep)) return cmd_reproduce(opts, rep_records);
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const analysis_error& e) {
    std::fprintf(stderr, "analysis error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
