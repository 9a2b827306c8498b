#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eaaslab/downstream.hpp"

namespace eaaslab {

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

// Minimal SVG line chart; the CSV written next to it is the source of truth.
void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series, bool log_x = false);

// Sweep emission: one CSV (+ one SVG when there are >= 2 points) per call.
// kind: lambda_sweep | size_sweep | defense_sweep. Returns the CSV path.
// Reports must share the axis variable; mixed axes raise ConfigError.
std::filesystem::path emit_plots(const std::vector<EvalReport>& reports, const std::string& kind,
                                 const std::filesystem::path& out_dir);

}  // namespace eaaslab
