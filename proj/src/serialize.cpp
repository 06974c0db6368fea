#include "gspdc/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gspdc/errors.hpp"

namespace gspdc::io {

using json = nlohmann::ordered_json;

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

json stages_to_json(const std::vector<stat::EfficiencyStage>& stages) {
  json arr = json::array();
  for (const auto& s : stages) {
    arr.push_back({{"name", s.name},
                   {"efficiency", s.efficiency},
                   {"sigma", s.sigma}});
  }
  return arr;
}

std::vector<stat::EfficiencyStage> stages_from_json(const json& arr) {
  std::vector<stat::EfficiencyStage> stages;
  for (const auto& item : arr) {
    stat::EfficiencyStage s;
    s.name = item.value("name", std::string{});
    s.efficiency = item.value("efficiency", 1.0);
    s.sigma = item.value("sigma", 0.0);
    stages.push_back(std::move(s));
  }
  return stages;
}

json hist_to_json(const analyzer::CountHistogram& h) {
  return {{"n_windows", h.n_windows}, {"counts", h.counts}};
}

json dist_to_json_obj(const stat::PhotonDist& d) {
  json j = {{"n_max", d.n_max()}, {"probs", d.probs}};
  if (d.has_sigma()) j["sigma"] = d.sigma;
  return j;
}

const char* order_name(pipeline::CorrectionOrder o) {
  return o == pipeline::CorrectionOrder::deadtime_then_dark
             ? "deadtime_then_dark"
             : "dark_then_deadtime";
}

pipeline::CorrectionOrder order_from_name(const std::string& name) {
  if (name == "deadtime_then_dark") {
    return pipeline::CorrectionOrder::deadtime_then_dark;
  }
  if (name == "dark_then_deadtime") {
    return pipeline::CorrectionOrder::dark_then_deadtime;
  }
  throw config_error("config: unknown correction order '" + name + "'");
}

json config_to_json_obj(const pipeline::RunConfig& c) {
  json j;
  j["preset_version"] = pipeline::kPresetVersion;
  j["source"] = {
      {"pair_rate", c.source.pair_rate},
      {"window_duration", c.source.window_duration},
      {"control_det_eff", c.source.control_det_eff},
      {"coupling_eff", c.source.coupling_eff},
      {"delay_transmittance", c.source.delay_transmittance},
      {"delay_latency", c.source.delay_latency},
      {"gate_latency", c.source.gate_latency},
      {"shutter_open", c.source.shutter_open},
      {"shutter_transmittance", c.source.shutter_transmittance},
      {"shutter_leakage", c.source.shutter_leakage},
  };
  j["analyzer"] = {
      {"stages", stages_to_json(c.analyzer.stage_effs)},
      {"dark_rate", c.analyzer.dark_rate},
      {"dead_time", c.analyzer.dead_time},
      {"paralyzable", c.analyzer.paralyzable},
  };
  j["analysis"] = {
      {"n_max", c.analysis.n_max},
      {"correct_dark", c.analysis.correct_dark},
      {"correct_deadtime", c.analysis.correct_deadtime},
      {"merge_prob", c.analysis.merge_prob},
      {"order", order_name(c.analysis.order)},
      {"negative_mass_tol", c.analysis.negative_mass_tol},
      {"n_uncertainty_samples", c.analysis.n_uncertainty_samples},
      {"fold_counting_error", c.analysis.fold_counting_error},
  };
  j["run"] = {
      {"n_windows", c.run.n_windows},
      {"master_seed", c.run.master_seed},
      {"out_dir", c.run.out_dir},
      {"threads", c.run.threads},
      {"format", c.run.format},
      {"write_records", c.run.write_records},
  };
  return j;
}

} // namespace

std::string config_to_json(const pipeline::RunConfig& config) {
  return config_to_json_obj(config).dump(2) + "\n";
}

pipeline::RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config: JSON parse failure: ") + e.what());
  }
  pipeline::RunConfig c;
  try {
    if (j.contains("source")) {
      const json& s = j["source"];
      c.source.pair_rate = s.value("pair_rate", c.source.pair_rate);
      c.source.window_duration =
          s.value("window_duration", c.source.window_duration);
      c.source.control_det_eff =
          s.value("control_det_eff", c.source.control_det_eff);
      c.source.coupling_eff = s.value("coupling_eff", c.source.coupling_eff);
      c.source.delay_transmittance =
          s.value("delay_transmittance", c.source.delay_transmittance);
      c.source.delay_latency = s.value("delay_latency", c.source.delay_latency);
      c.source.gate_latency = s.value("gate_latency", c.source.gate_latency);
      c.source.shutter_open = s.value("shutter_open", c.source.shutter_open);
      c.source.shutter_transmittance =
          s.value("shutter_transmittance", c.source.shutter_transmittance);
      c.source.shutter_leakage =
          s.value("shutter_leakage", c.source.shutter_leakage);
    }
    if (j.contains("analyzer")) {
      const json& a = j["analyzer"];
      if (a.contains("stages")) {
        c.analyzer.stage_effs = stages_from_json(a["stages"]);
      }
      c.analyzer.dark_rate = a.value("dark_rate", c.analyzer.dark_rate);
      c.analyzer.dead_time = a.value("dead_time", c.analyzer.dead_time);
      c.analyzer.paralyzable = a.value("paralyzable", c.analyzer.paralyzable);
    }
    if (j.contains("analysis")) {
      const json& a = j["analysis"];
      c.analysis.n_max = a.value("n_max", c.analysis.n_max);
      c.analysis.correct_dark = a.value("correct_dark", c.analysis.correct_dark);
      c.analysis.correct_deadtime =
          a.value("correct_deadtime", c.analysis.correct_deadtime);
      c.analysis.merge_prob = a.value("merge_prob", c.analysis.merge_prob);
      if (a.contains("order")) {
        c.analysis.order = order_from_name(a["order"].get<std::string>());
      }
      c.analysis.negative_mass_tol =
          a.value("negative_mass_tol", c.analysis.negative_mass_tol);
      c.analysis.n_uncertainty_samples =
          a.value("n_uncertainty_samples", c.analysis.n_uncertainty_samples);
      c.analysis.fold_counting_error =
          a.value("fold_counting_error", c.analysis.fold_counting_error);
    }
    if (j.contains("run")) {
      const json& r = j["run"];
      c.run.n_windows = r.value("n_windows", c.run.n_windows);
      c.run.master_seed = r.value("master_seed", c.run.master_seed);
      c.run.out_dir = r.value("out_dir", c.run.out_dir);
      c.run.threads = r.value("threads", c.run.threads);
      c.run.format = r.value("format", c.run.format);
      c.run.write_records = r.value("write_records", c.run.write_records);
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return c;
}

std::vector<stat::EfficiencyStage> budget_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("budget: JSON parse failure: ") + e.what());
  }
  try {
    if (j.is_array()) return stages_from_json(j);
    if (j.contains("stages")) return stages_from_json(j["stages"]);
  } catch (const json::exception& e) {
    throw config_error(std::string("budget: ") + e.what());
  }
  throw config_error("budget: expected a stage array or {\"stages\": [...]}");
}

std::string report_to_json(const pipeline::Report& r) {
  json j;
  j["config"] = config_to_json_obj(r.config);
  if (r.histogram) j["histogram"] = hist_to_json(*r.histogram);
  if (r.n_windows) j["n_windows"] = *r.n_windows;
  j["pprime_raw"] = r.pprime_raw;
  j["pprime_corrected"] = r.pprime_corrected;
  j["photon_dist"] = dist_to_json_obj(r.photon_dist);
  j["photon_dist_mc"] = dist_to_json_obj(r.photon_dist_mc);
  j["budget"] = {{"stages", stages_to_json(r.budget.stages)},
                 {"effective", r.budget.effective},
                 {"effective_sigma", r.budget.effective_sigma}};

  json d;
  d["mean"] = r.diagnostics.mean;
  d["fano"] = r.diagnostics.fano ? json(*r.diagnostics.fano) : json(nullptr);
  d["g2_zero"] = r.diagnostics.g2 ? json(*r.diagnostics.g2) : json(nullptr);
  d["vacuum_gate_rate"] = r.diagnostics.vacuum_gate_rate
                              ? json(*r.diagnostics.vacuum_gate_rate)
                              : json(nullptr);
  d["mean_control_per_window"] = r.diagnostics.mean_control_per_window;
  d["vacuum_gate_prob_analytic"] =
      std::exp(-r.diagnostics.mean_control_per_window);
  d["order_sensitivity"] = r.diagnostics.order_sensitivity
                               ? json(*r.diagnostics.order_sensitivity)
                               : json(nullptr);
  j["diagnostics"] = d;

  json w;
  w["mu_same_mean"] = r.wcl.mu_same_mean;
  w["same_mean"] = r.wcl.same_mean;
  w["mu_same_p2"] = r.wcl.mu_same_p2 ? json(*r.wcl.mu_same_p2) : json(nullptr);
  w["same_p2"] = r.wcl.same_p2;
  w["p1_ratio_same_p2"] =
      r.wcl.p1_ratio_same_p2 ? json(*r.wcl.p1_ratio_same_p2) : json(nullptr);
  j["wcl"] = w;

  if (r.simulation) {
    j["simulation"] = {
        {"mean_control", r.simulation->mean_control},
        {"vacuum_gate_fraction", r.simulation->vacuum_gate_fraction},
        {"emitted_hist", hist_to_json(r.simulation->emitted_hist)},
        {"gated_only_hist", hist_to_json(r.simulation->gated_only_hist)},
    };
  }
  j["provenance"] = {{"master_seed", r.provenance.master_seed},
                     {"version", r.provenance.version},
                     {"wall_time_s", r.provenance.wall_time_s}};
  return j.dump(2) + "\n";
}

std::string dist_to_json(const stat::PhotonDist& dist) {
  return dist_to_json_obj(dist).dump(2) + "\n";
}

stat::PhotonDist dist_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("dist: JSON parse failure: ") + e.what());
  }
  stat::PhotonDist d;
  try {
    d.probs = j.at("probs").get<std::vector<double>>();
    if (j.contains("sigma") && !j["sigma"].is_null()) {
      d.sigma = j["sigma"].get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("dist: ") + e.what());
  }
  if (d.probs.empty()) throw config_error("dist: empty probability vector");
  return d;
}

std::string dist_to_csv(const stat::PhotonDist& dist) {
  std::ostringstream os;
  os << "j,P,sigma\n";
  for (int j = 0; j <= dist.n_max(); ++j) {
    const double s =
        dist.has_sigma() ? dist.sigma[static_cast<std::size_t>(j)] : 0.0;
    os << j << ',' << fmt17(dist.probs[static_cast<std::size_t>(j)]) << ','
       << fmt17(s) << '\n';
  }
  return os.str();
}

std::string histogram_to_csv(const analyzer::CountHistogram& hist) {
  std::ostringstream os;
  os << "i,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    os << i << ',' << hist.counts[i] << '\n';
  }
  return os.str();
}

analyzer::CountHistogram histogram_from_csv(const std::string& text) {
  analyzer::CountHistogram h;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("i,", 0) == 0) continue; // header row
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw config_error("histogram: malformed CSV line '" + line + "'");
    }
    try {
      const std::size_t i = std::stoul(line.substr(0, comma));
      const std::uint64_t n = std::stoull(line.substr(comma + 1));
      if (i >= h.counts.size()) h.counts.resize(i + 1, 0);
      h.counts[i] = n;
      h.n_windows += n;
    } catch (const std::exception&) {
      throw config_error("histogram: malformed CSV line '" + line + "'");
    }
  }
  if (h.n_windows == 0) throw config_error("histogram: empty");
  return h;
}

std::string histogram_header_json(const pipeline::RunConfig& config,
                                  const pipeline::SimulationResult& sim) {
  json j;
  j["n_windows"] = sim.histogram.n_windows;
  j["config"] = config_to_json_obj(config);
  j["histogram"] = hist_to_json(sim.histogram);
  j["diagnostics"] = {
      {"mean_control", sim.mean_control},
      {"vacuum_gate_fraction", sim.vacuum_gate_fraction},
      {"mean_registered", sim.histogram.mean()},
      {"emitted_hist", hist_to_json(sim.emitted_hist)},
      {"gated_only_hist", hist_to_json(sim.gated_only_hist)},
  };
  return j.dump(2) + "\n";
}

std::string record_to_json_line(const source::WindowRecord& record) {
  json pairs = json::array();
  for (const auto& p : record.pairs) pairs.push_back({{"t", p.t}});
  json j;
  j["window_index"] = record.window_index;
  j["pairs"] = std::move(pairs);
  j["control_detections"] = record.control_detections;
  j["gate_interval"] = record.gate
                           ? json({{"t_open", record.gate->t_open},
                                   {"t_close", record.gate->t_close}})
                           : json(nullptr);
  j["emitted"] = record.emitted;
  return j.dump();
}

std::string compare_to_csv(const pipeline::CompareResult& result) {
  std::ostringstream os;
  os << "j,P_source,P_wcl_mean,P_wcl_p2\n";
  for (const auto& row : result.rows) {
    os << row.j << ',' << fmt17(row.p_source) << ',' << fmt17(row.p_wcl_mean)
       << ',' << fmt17(row.p_wcl_p2) << '\n';
  }
  return os.str();
}

std::string sweep_to_csv(pipeline::SweepParam param,
                         const std::vector<pipeline::SweepRow>& rows) {
  const char* name = "pair_rate";
  if (param == pipeline::SweepParam::window_duration) name = "window_duration";
  if (param == pipeline::SweepParam::control_det_eff) name = "control_det_eff";
  std::ostringstream os;
  os << name << ",mean_control,P0,P1,P2,vacuum_gate_prob\n";
  for (const auto& r : rows) {
    os << fmt17(r.value) << ',' << fmt17(r.mean_control) << ',' << fmt17(r.p0)
       << ',' << fmt17(r.p1) << ',' << fmt17(r.p2) << ','
       << fmt17(r.vacuum_gate_prob) << '\n';
  }
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw io_error("failed reading '" + path + "'");
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw io_error("cannot create directory '" + p.parent_path().string() + "'");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw io_error("failed writing '" + path + "'");
}

} // namespace gspdc::io
