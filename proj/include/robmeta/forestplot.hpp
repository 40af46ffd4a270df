#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "robmeta/io.hpp"

namespace robmeta {

/// One row of the plot on the log-OR scale. The unadjusted interval is the
/// central 95% posterior interval; the adjusted glyphs are the bounds on the
/// mean plus the lowest 2.5th and highest 97.5th percentile over the set.
struct ForestRow {
    std::string label;
    double unadjusted_mean = 0.0;
    double unadjusted_lower = 0.0;
    double unadjusted_upper = 0.0;
    double mean_lower = 0.0;
    double mean_upper = 0.0;
    double lower_percentile_bound = 0.0;
    double upper_percentile_bound = 0.0;
};

struct ForestplotModel {
    std::string title;
    std::vector<ForestRow> rows;  // studies first, overall effect last
};

void validate(const ForestplotModel& model);

inline constexpr double kForestLowerLevel = 0.025;
inline constexpr double kForestUpperLevel = 0.975;

/// Values are copied from the persisted trace/bounds without recomputation.
ForestplotModel build_forestplot(const AnalysisRecord& record);

std::string render_forestplot_svg(const ForestplotModel& model);
Json forestplot_sidecar(const ForestplotModel& model);

/// Writes `svg_path` and the sidecar next to it (extension .json).
void render_forestplot(const ForestplotModel& model, const std::filesystem::path& svg_path);

}  // namespace robmeta
