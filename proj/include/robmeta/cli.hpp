#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "robmeta/io.hpp"

namespace robmeta {

/// Quality vectors of the domains selected in `config`.
std::vector<QualityVector> enumerate_from_config(const RunConfig& config, const StudyData& data);

/// The `analyze` pipeline without any file output.
AnalysisRecord run_analysis(const RunConfig& config,
                            const std::function<void(std::size_t, std::size_t)>& progress = {});

/// Entry point of the `robmeta` tool. `args` excludes the program name.
/// Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace robmeta
