#pragma once

#include <string>

#include "robmeta/io.hpp"

namespace robmeta {

/// Plain-text bounds table: one block of rows per quantity for the selected
/// domains, followed by the unadjusted reference row and decision flags.
std::string render_table(const AnalysisRecord& record);

std::string format_fixed(double value, int decimals);
/// "(0.10, 0.10, 0.76, 0.95)"
std::string format_vector(const QualityVector& q, int decimals = 2);

}  // namespace robmeta
