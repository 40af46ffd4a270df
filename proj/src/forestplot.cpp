#include "robmeta/forestplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "robmeta/error.hpp"
#include "robmeta/report.hpp"

namespace robmeta {
namespace {

[[noreturn]] void fail(const std::string& message) { throw Error("io_reporting", message); }

std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

double nice_step(double span) {
    const double raw = span / 8.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double f : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (f * mag >= raw) return f * mag;
    }
    return 10.0 * mag;
}

ForestRow make_row(std::string label, const AnalysisRecord& r, std::optional<std::size_t> study) {
    const auto& un = *r.unadjusted;
    const auto lo = QuantitySpec::percentile(kForestLowerLevel, study);
    const auto hi = QuantitySpec::percentile(kForestUpperLevel, study);
    const auto mean = QuantitySpec::expectation(study);
    ForestRow row;
    row.label = std::move(label);
    row.unadjusted_mean = estimate(un, mean);
    row.unadjusted_lower = estimate(un, lo);
    row.unadjusted_upper = estimate(un, hi);
    const auto mb = extract_bounds(r.bounds.trace, mean);
    row.mean_lower = mb.lower;
    row.mean_upper = mb.upper;
    row.lower_percentile_bound = extract_bounds(r.bounds.trace, lo).lower;
    row.upper_percentile_bound = extract_bounds(r.bounds.trace, hi).upper;
    return row;
}

}  // namespace

void validate(const ForestplotModel& model) {
    for (const auto& r : model.rows) {
        const bool ordered = r.unadjusted_lower <= r.unadjusted_mean && r.unadjusted_mean <= r.unadjusted_upper &&
                             r.mean_lower <= r.mean_upper && r.lower_percentile_bound <= r.mean_lower &&
                             r.mean_upper <= r.upper_percentile_bound;
        if (!ordered) fail("forestplot row '" + r.label + "' has unordered interval endpoints");
    }
}

ForestplotModel build_forestplot(const AnalysisRecord& record) {
    if (!record.unadjusted) fail("forestplot needs the unadjusted reference summary");
    if (record.bounds.trace.empty()) fail("forestplot needs a non-empty trace");
    ForestplotModel model;
    model.title = "Bias domain(s) " + record.domain_label + ": log odds ratio";
    for (std::size_t i = 0; i < record.study_names.size(); ++i) {
        model.rows.push_back(make_row(record.study_names[i], record, i));
    }
    model.rows.push_back(make_row("Overall effect", record, std::nullopt));
    validate(model);
    return model;
}

std::string render_forestplot_svg(const ForestplotModel& model) {
    validate(model);
    const double width = 980, label_w = 170, plot_w = 520, row_h = 46, top = 60;
    const double plot_x0 = label_w, plot_x1 = label_w + plot_w;
    const double height = top + row_h * static_cast<double>(model.rows.size()) + 70;

    double lo = 0.0, hi = 0.0;
    for (const auto& r : model.rows) {
        lo = std::min({lo, r.unadjusted_lower, r.lower_percentile_bound});
        hi = std::max({hi, r.unadjusted_upper, r.upper_percentile_bound});
    }
    const double step = nice_step(hi - lo > 0 ? hi - lo : 1.0);
    lo = std::floor(lo / step) * step;
    hi = std::ceil(hi / step) * step;
    const auto x = [&](double v) { return plot_x0 + (v - lo) / (hi - lo) * plot_w; };
    const auto f = [](double v) { return format_fixed(v, 2); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n"
       << "<title>" << escape(model.title) << "</title>\n"
       << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(model.title)
       << "</text>\n"
       << "<text x=\"" << plot_x1 + 20 << "\" y=\"44\" fill=\"black\">unadjusted mean [95% interval]</text>\n"
       << "<text x=\"" << plot_x1 + 20 << "\" y=\"56\" fill=\"#1f5fbf\">adjusted mean bounds; percentile envelope</text>\n";

    const double plot_bottom = top + row_h * static_cast<double>(model.rows.size());
    os << "<line class=\"reference-line\" x1=\"" << f(x(0.0)) << "\" y1=\"" << top - 8 << "\" x2=\"" << f(x(0.0))
       << "\" y2=\"" << plot_bottom << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";

    for (std::size_t i = 0; i < model.rows.size(); ++i) {
        const auto& r = model.rows[i];
        const bool overall = i + 1 == model.rows.size();
        const double y = top + row_h * static_cast<double>(i) + 14;
        const double ya = y + 14;
        os << "<g class=\"data-row\" data-label=\"" << escape(r.label) << "\" data-unadjusted-mean=\""
           << exact(r.unadjusted_mean) << "\" data-unadjusted-lower=\"" << exact(r.unadjusted_lower)
           << "\" data-unadjusted-upper=\"" << exact(r.unadjusted_upper) << "\" data-mean-lower=\""
           << exact(r.mean_lower) << "\" data-mean-upper=\"" << exact(r.mean_upper)
           << "\" data-lower-percentile-bound=\"" << exact(r.lower_percentile_bound)
           << "\" data-upper-percentile-bound=\"" << exact(r.upper_percentile_bound) << "\">\n";
        os << "  <text x=\"10\" y=\"" << y + 11 << "\"" << (overall ? " font-weight=\"bold\"" : "") << ">"
           << escape(r.label) << "</text>\n";
        // unadjusted: whiskers and a point
        os << "  <line x1=\"" << f(x(r.unadjusted_lower)) << "\" y1=\"" << y << "\" x2=\"" << f(x(r.unadjusted_upper))
           << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
        if (overall) {
            const double cx = x(r.unadjusted_mean);
            os << "  <polygon points=\"" << f(cx - 6) << ',' << y << ' ' << f(cx) << ',' << y - 5 << ' ' << f(cx + 6)
               << ',' << y << ' ' << f(cx) << ',' << y + 5 << "\" fill=\"black\"/>\n";
        } else {
            os << "  <rect x=\"" << f(x(r.unadjusted_mean) - 4) << "\" y=\"" << y - 4
               << "\" width=\"8\" height=\"8\" fill=\"black\"/>\n";
        }
        // adjusted: thin envelope line, thick bar for the mean bounds
        os << "  <line x1=\"" << f(x(r.lower_percentile_bound)) << "\" y1=\"" << ya << "\" x2=\""
           << f(x(r.upper_percentile_bound)) << "\" y2=\"" << ya << "\" stroke=\"#1f5fbf\"/>\n"
           << "  <line x1=\"" << f(x(r.lower_percentile_bound)) << "\" y1=\"" << ya - 4 << "\" x2=\""
           << f(x(r.lower_percentile_bound)) << "\" y2=\"" << ya + 4 << "\" stroke=\"#1f5fbf\"/>\n"
           << "  <line x1=\"" << f(x(r.upper_percentile_bound)) << "\" y1=\"" << ya - 4 << "\" x2=\""
           << f(x(r.upper_percentile_bound)) << "\" y2=\"" << ya + 4 << "\" stroke=\"#1f5fbf\"/>\n"
           << "  <rect x=\"" << f(x(r.mean_lower)) << "\" y=\"" << ya - 3 << "\" width=\""
           << f(std::max(x(r.mean_upper) - x(r.mean_lower), 1.0)) << "\" height=\"6\" fill=\"#1f5fbf\"/>\n";
        os << "  <text x=\"" << plot_x1 + 20 << "\" y=\"" << y + 4 << "\">" << format_fixed(r.unadjusted_mean, 2)
           << " [" << format_fixed(r.unadjusted_lower, 2) << ", " << format_fixed(r.unadjusted_upper, 2)
           << "]</text>\n"
           << "  <text x=\"" << plot_x1 + 20 << "\" y=\"" << ya + 4 << "\" fill=\"#1f5fbf\">["
           << format_fixed(r.mean_lower, 2) << ", " << format_fixed(r.mean_upper, 2) << "]; ["
           << format_fixed(r.lower_percentile_bound, 2) << ", " << format_fixed(r.upper_percentile_bound, 2)
           << "]</text>\n";
        os << "</g>\n";
    }

    const double axis_y = plot_bottom + 10;
    os << "<g class=\"axis\">\n  <line x1=\"" << plot_x0 << "\" y1=\"" << axis_y << "\" x2=\"" << plot_x1
       << "\" y2=\"" << axis_y << "\" stroke=\"black\"/>\n";
    const auto ticks = static_cast<int>(std::lround((hi - lo) / step));
    for (int t = 0; t <= ticks; ++t) {
        const double v = lo + step * t;
        os << "  <line x1=\"" << f(x(v)) << "\" y1=\"" << axis_y << "\" x2=\"" << f(x(v)) << "\" y2=\"" << axis_y + 5
           << "\" stroke=\"black\"/>\n  <text x=\"" << f(x(v)) << "\" y=\"" << axis_y + 18
           << "\" text-anchor=\"middle\">" << format_fixed(std::abs(v) < 1e-12 ? 0.0 : v, 2) << "</text>\n";
    }
    os << "  <text x=\"" << (plot_x0 + plot_x1) / 2 << "\" y=\"" << axis_y + 38
       << "\" text-anchor=\"middle\">log odds ratio</text>\n</g>\n</svg>\n";
    return os.str();
}

Json forestplot_sidecar(const ForestplotModel& model) {
    Json rows = Json::array();
    for (const auto& r : model.rows) {
        rows.push_back(Json{{"label", r.label},
                            {"unadjusted", {{"mean", r.unadjusted_mean},
                                            {"lower", r.unadjusted_lower},
                                            {"upper", r.unadjusted_upper}}},
                            {"adjusted", {{"mean_lower", r.mean_lower},
                                          {"mean_upper", r.mean_upper},
                                          {"lower_percentile_bound", r.lower_percentile_bound},
                                          {"upper_percentile_bound", r.upper_percentile_bound}}}});
    }
    return Json{{"format_version", kFormatVersion},
                {"title", model.title},
                {"lower_level", kForestLowerLevel},
                {"upper_level", kForestUpperLevel},
                {"rows", std::move(rows)}};
}

void render_forestplot(const ForestplotModel& model, const std::filesystem::path& svg_path) {
    write_text(svg_path, render_forestplot_svg(model));
    auto sidecar = svg_path;
    sidecar.replace_extension(".json");
    write_json(sidecar, forestplot_sidecar(model));
}

}  // namespace robmeta
