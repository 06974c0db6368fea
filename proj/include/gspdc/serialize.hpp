#pragma once

#include <string>

#include "gspdc/pipeline.hpp"

namespace gspdc::io {

// Configuration files (JSON, sections mirroring the parameter tree).
std::string config_to_json(const pipeline::RunConfig& config);
pipeline::RunConfig config_from_json(const std::string& text);

// Efficiency budget files: either a bare stage array or {"stages": [...]}.
std::vector<stat::EfficiencyStage> budget_from_json(const std::string& text);

std::string report_to_json(const pipeline::Report& report);

std::string dist_to_json(const stat::PhotonDist& dist);
stat::PhotonDist dist_from_json(const std::string& text);
std::string dist_to_csv(const stat::PhotonDist& dist);

std::string histogram_to_csv(const analyzer::CountHistogram& hist);
analyzer::CountHistogram histogram_from_csv(const std::string& text);
std::string histogram_header_json(const pipeline::RunConfig& config,
                                  const pipeline::SimulationResult& sim);

std::string record_to_json_line(const source::WindowRecord& record);

std::string compare_to_csv(const pipeline::CompareResult& result);
std::string sweep_to_csv(pipeline::SweepParam param,
                         const std::vector<pipeline::SweepRow>& rows);

// Filesystem helpers; create parent directories on write, io_error on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Doubles rendered at 17 significant digits (CSV outputs).
std::string fmt17(double x);

} // namespace gspdc::io
