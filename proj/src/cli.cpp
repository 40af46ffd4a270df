#include "robmeta/cli.hpp"

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "robmeta/error.hpp"
#include "robmeta/forestplot.hpp"
#include "robmeta/io.hpp"
#include "robmeta/quality_sets.hpp"
#include "robmeta/report.hpp"
#include "robmeta/robust_analysis.hpp"

namespace robmeta {
namespace {

struct Overrides {
    std::string config;
    std::string data;
    std::string rob;
    std::string domains;
    std::optional<double> grid_spacing;
    std::optional<std::size_t> points;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> burnin;
    std::optional<std::size_t> chains;
    std::optional<std::uint64_t> seed;
    std::vector<double> thresholds;
    std::string out;
    std::optional<std::size_t> workers;
    bool quiet = false;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Run configuration (JSON)");
    cmd->add_option("--data", o.data, "Study data CSV");
    cmd->add_option("--rob", o.rob, "Risk-of-bias table JSON");
    cmd->add_option("--domains", o.domains, "Bias domains, e.g. 3, 1,2 or all");
    cmd->add_option("--grid-spacing", o.grid_spacing, "Simplex weight spacing 1/m");
    cmd->add_option("--points", o.points, "Grid points per axis for box and single-block sets");
    cmd->add_option("--samples", o.samples, "Retained samples per chain");
    cmd->add_option("--burnin", o.burnin, "Burn-in iterations per chain");
    cmd->add_option("--chains", o.chains, "Number of chains");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--threshold", o.thresholds, "Exceedance threshold t for P(mu > t) (repeatable)");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--workers", o.workers, "Parallel workers over quality vectors");
    cmd->add_flag("--quiet", o.quiet, "Suppress progress output");
}

RunConfig resolve_config(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (!o.data.empty()) c.data_path = o.data;
    if (!o.rob.empty()) c.rob_path = o.rob;
    if (!o.domains.empty()) set_domains(c, o.domains);
    if (o.grid_spacing) {
        Json e{{"enumeration", {{"weight_spacing", *o.grid_spacing}}}};
        c.enumeration.weight_denominator = parse_run_config(e).enumeration.weight_denominator;
    }
    if (o.points) c.enumeration.box_points_per_axis = c.enumeration.singleton_points = *o.points;
    if (o.samples) c.mcmc.n_samples = *o.samples;
    if (o.burnin) c.mcmc.n_burnin = *o.burnin;
    if (o.chains) c.mcmc.n_chains = *o.chains;
    if (o.seed) c.mcmc.seed = *o.seed;
    if (!o.thresholds.empty()) c.thresholds = o.thresholds;
    if (!o.out.empty()) c.output_dir = o.out;
    if (o.workers) c.workers = *o.workers;
    if (c.data_path.empty()) throw Error("io_reporting", "no study data given (--data or config 'data')");
    return c;
}

std::vector<int> selected_domains(const RunConfig& c, const RoBTable& rob) {
    if (!c.all_domains) {
        if (c.domains.empty()) throw Error("io_reporting", "no bias domain selected (--domains or config 'domains')");
        return c.domains;
    }
    std::vector<int> all;
    for (const auto& [d, _] : rob.ratings.front()) all.push_back(d);
    return all;
}

std::vector<double> summary_levels(const RunConfig& c) {
    auto levels = c.percentiles;
    for (double l : {kForestLowerLevel, kForestUpperLevel}) {
        if (std::find(levels.begin(), levels.end(), l) == levels.end()) levels.push_back(l);
    }
    return levels;
}

std::vector<std::string> names_of(const StudyData& data) {
    std::vector<std::string> names;
    for (const auto& s : data.studies) names.push_back(s.name);
    return names;
}

}  // namespace

std::vector<QualityVector> enumerate_from_config(const RunConfig& c, const StudyData& data) {
    if (c.rob_path.empty()) throw Error("io_reporting", "no risk-of-bias table given (--rob or config 'rob')");
    const auto rob = ingest_rob_table(c.rob_path, data);
    std::optional<ExtraConstraints> extra;
    if (c.extra_constraints) extra = resolve_constraints(*c.extra_constraints, data);
    const auto spec = build_set_spec(rob, selected_domains(c, rob), c.cutoffs, extra);
    return enumerate_quality_vectors(spec, c.enumeration);
}

AnalysisRecord run_analysis(const RunConfig& c, const std::function<void(std::size_t, std::size_t)>& progress) {
    const auto data = ingest_study_data(c.data_path);
    const auto vectors = enumerate_from_config(c, data);
    AnalysisOptions options;
    options.workers = c.workers;
    options.extra_levels = summary_levels(c);
    options.progress = progress;

    AnalysisRecord record;
    record.study_names = names_of(data);
    record.domain_label = c.domain_label();
    record.decision_probability = c.decision_probability;
    record.quantities = c.quantities();
    record.bounds = analyze_over_set(data, c.hyper, vectors, c.mcmc, record.quantities, options);
    record.unadjusted = analyze_unadjusted(data, c.hyper, c.mcmc, c.thresholds, summary_levels(c));
    return record;
}

namespace {

void write_manifest(const RunConfig& c, const std::string& command, std::size_t n_vectors) {
    Json m;
    m["format_version"] = kFormatVersion;
    m["tool"] = "robmeta";
    m["version"] = ROBMETA_VERSION;
#if defined(__clang__)
    m["compiler"] = "clang " __clang_version__;
#elif defined(__GNUC__)
    m["compiler"] = "gcc " __VERSION__;
#else
    m["compiler"] = "unknown";
#endif
    m["command"] = command;
    m["seed"] = c.mcmc.seed;
    m["n_quality_vectors"] = n_vectors;
    m["config"] = to_json(c);
    write_json(c.output_dir / "manifest.json", m);
}

void emit_outputs(const AnalysisRecord& record, const std::filesystem::path& dir, std::ostream& out) {
    const auto table = render_table(record);
    write_text(dir / "table.txt", table);
    out << table;
    if (record.unadjusted && !record.bounds.trace.empty()) {
        render_forestplot(build_forestplot(record), dir / "forestplot.svg");
    }
}

int cmd_analyze(const Overrides& o, std::ostream& out, std::ostream& err) {
    const auto c = resolve_config(o);
    const auto data = ingest_study_data(c.data_path);
    write_manifest(c, "analyze", enumerate_from_config(c, data).size());
    std::function<void(std::size_t, std::size_t)> progress;
    if (!o.quiet) {
        progress = [&err](std::size_t done, std::size_t total) {
            if (done == total || done % 50 == 0) err << "\ranalyze: " << done << "/" << total << std::flush;
            if (done == total) err << "\n";
        };
    }
    const auto record = run_analysis(c, progress);
    write_json(c.output_dir / "results.json", to_json(record));
    emit_outputs(record, c.output_dir, out);
    return 0;
}

int cmd_enumerate(const Overrides& o, bool list, std::ostream& out) {
    const auto c = resolve_config(o);
    const auto data = ingest_study_data(c.data_path);
    const auto vectors = enumerate_from_config(c, data);
    write_manifest(c, "enumerate", vectors.size());

    std::string csv;
    for (std::size_t i = 0; i < data.size(); ++i) csv += (i ? ",q" : "q") + std::to_string(i + 1);
    csv += "\n";
    for (const auto& v : vectors) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", v.q[i]);
            csv += (i ? "," : "") + std::string(buf);
        }
        csv += "\n";
    }
    write_text(c.output_dir / "quality_vectors.csv", csv);

    out << "count: " << vectors.size() << "\n";
    if (list) {
        for (const auto& v : vectors) out << format_vector(v) << "\n";
    }
    return 0;
}

int cmd_unadjusted(const Overrides& o, std::ostream& out) {
    const auto c = resolve_config(o);
    const auto data = ingest_study_data(c.data_path);
    write_manifest(c, "unadjusted", 1);
    AnalysisRecord record;
    record.study_names = names_of(data);
    record.domain_label = "unadjusted";
    record.decision_probability = c.decision_probability;
    record.quantities = c.quantities();
    record.unadjusted = analyze_unadjusted(data, c.hyper, c.mcmc, c.thresholds, summary_levels(c));
    write_json(c.output_dir / "results.json", to_json(record));
    emit_outputs(record, c.output_dir, out);
    return 0;
}

int cmd_report(const std::string& results, const std::string& out_dir, std::ostream& out) {
    const auto record = record_from_json(read_json(results));
    const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(results).parent_path() : std::filesystem::path(out_dir);
    emit_outputs(record, dir, out);
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust Bayesian bias-adjusted random-effects meta-analysis", "robmeta"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ROBMETA_VERSION);

    Overrides analyze_o, enumerate_o, unadjusted_o;
    auto* analyze = app.add_subcommand("analyze", "Bounds over the quality set of the selected domains");
    add_common_flags(analyze, analyze_o);
    auto* enumerate = app.add_subcommand("enumerate", "Print the quality vectors of the selected domains");
    add_common_flags(enumerate, enumerate_o);
    bool list = false;
    enumerate->add_flag("--list", list, "Print every vector");
    auto* unadjusted = app.add_subcommand("unadjusted", "Posterior of the model without bias adjustment");
    add_common_flags(unadjusted, unadjusted_o);
    std::string results, report_out;
    auto* report = app.add_subcommand("report", "Re-render table and forestplot from a results file");
    report->add_option("--results", results, "results.json from a previous run")->required();
    report->add_option("--out", report_out, "Output directory (default: next to the results file)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << ROBMETA_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*analyze) return cmd_analyze(analyze_o, out, err);
        if (*enumerate) return cmd_enumerate(enumerate_o, list, out);
        if (*unadjusted) return cmd_unadjusted(unadjusted_o, out);
        if (*report) return cmd_report(results, report_out, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace robmeta
