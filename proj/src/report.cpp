#include "robmeta/report.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

namespace robmeta {
namespace {

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_fixed(double value, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << value;
    return os.str();
}

std::string format_vector(const QualityVector& q, int decimals) {
    std::string out = "(";
    for (std::size_t i = 0; i < q.size(); ++i) out += (i ? ", " : "") + format_fixed(q.q[i], decimals);
    return out + ")";
}

std::string render_table(const AnalysisRecord& record) {
    const std::size_t w_domain = 12, w_quantity = 14, w_value = 9;
    std::size_t w_vector = 10;
    for (const auto& q : record.bounds.vectors) w_vector = std::max(w_vector, format_vector(q).size() + 2);

    std::ostringstream os;
    os << pad("Bias domain", w_domain) << pad("Quantity", w_quantity) << pad("Lower", w_value)
       << pad("q_*", w_vector) << pad("Upper", w_value) << pad("q^*", w_vector) << "Flags\n";

    std::vector<ComparisonRow> comparison;
    if (record.unadjusted && !record.bounds.bounds.empty()) {
        comparison = compare_to_unadjusted(record.bounds, *record.unadjusted,
                                           DecisionRule{record.decision_probability, 0.0});
    }

    for (std::size_t i = 0; i < record.bounds.bounds.size(); ++i) {
        const auto& b = record.bounds.bounds[i];
        std::string flags;
        if (!comparison.empty()) {
            const auto& c = comparison[i];
            if (c.no_bias_impact) flags += "no-bias-impact ";
            if (c.conclusion_sensitive) flags += "conclusion-sensitive ";
            if (c.crosses_reference) flags += "crosses-zero ";
        }
        os << pad(i == 0 ? record.domain_label : "", w_domain) << pad(label(b.quantity), w_quantity)
           << pad(format_fixed(b.lower, 3), w_value) << pad(format_vector(record.bounds.q_lower(i)), w_vector)
           << pad(format_fixed(b.upper, 3), w_value) << pad(format_vector(record.bounds.q_upper(i)), w_vector)
           << flags << "\n";
    }

    if (record.unadjusted) {
        for (std::size_t i = 0; i < record.quantities.size(); ++i) {
            const auto& q = record.quantities[i];
            const std::string v = format_fixed(estimate(*record.unadjusted, q), 3);
            os << pad(i == 0 ? "unadjusted" : "", w_domain) << pad(label(q), w_quantity) << pad(v, w_value)
               << pad("--", w_vector) << pad(v, w_value) << pad("--", w_vector) << "\n";
        }
    }
    if (!record.bounds.vectors.empty()) {
        os << "\n" << record.bounds.vectors.size() << " quality vectors evaluated\n";
    }
    return os.str();
}

}  // namespace robmeta
