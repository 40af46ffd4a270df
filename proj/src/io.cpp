#include "robmeta/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "robmeta/error.hpp"

namespace robmeta {
namespace {

[[noreturn]] void fail(const std::string& message) { throw Error("io_reporting", message); }

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Json map_to_json(const std::map<double, double>& table, const char* key, const char* value) {
    Json arr = Json::array();
    for (const auto& [k, v] : table) arr.push_back(Json{{key, k}, {value, v}});
    return arr;
}

std::map<double, double> map_from_json(const Json& arr, const char* key, const char* value) {
    std::map<double, double> out;
    for (const auto& e : arr) out[e.at(key).get<double>()] = e.at(value).get<double>();
    return out;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from_json(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

template <class T>
void read_if(const Json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

Interval interval_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2) fail("cutoff interval must be a two-element array");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

}  // namespace

StudyData parse_study_data(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    static const std::vector<std::string> kHeader{"study", "n_control", "r_control", "n_treatment", "r_treatment"};

    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (line_no == 0 || trim(line).empty()) fail("study data: missing header");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (split(trim(line), ',') != kHeader) {
        fail("study data line " + std::to_string(line_no) +
             ": header must be 'study,n_control,r_control,n_treatment,r_treatment'");
    }

    StudyData data;
    std::set<std::string> names;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(trim(line), ',');
        if (fields.size() != kHeader.size()) {
            fail("study data line " + std::to_string(line_no) + ": expected 5 columns, found " +
                 std::to_string(fields.size()));
        }
        StudyRecord rec;
        rec.name = fields[0];
        if (rec.name.empty()) fail("study data line " + std::to_string(line_no) + ", column 1 (study): empty name");
        if (!names.insert(rec.name).second) fail("study data: duplicate study '" + rec.name + "'");
        long* targets[] = {&rec.n_control, &rec.r_control, &rec.n_treatment, &rec.r_treatment};
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const auto& f = fields[c];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), *targets[c - 1]);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                fail("study data line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " (" +
                     kHeader[c] + "): '" + f + "' is not an integer count");
            }
        }
        data.studies.push_back(std::move(rec));
    }
    validate(data);
    return data;
}

StudyData ingest_study_data(const std::filesystem::path& path) { return parse_study_data(read_file(path)); }

std::string emit_study_data(const StudyData& data) {
    std::ostringstream os;
    os << "study,n_control,r_control,n_treatment,r_treatment\n";
    for (const auto& s : data.studies) {
        os << s.name << ',' << s.n_control << ',' << s.r_control << ',' << s.n_treatment << ',' << s.r_treatment
           << '\n';
    }
    return os.str();
}

RoBTable parse_rob_table(const Json& doc, const StudyData& data) {
    if (!doc.contains("studies") || !doc.at("studies").is_array()) fail("RoB table: missing 'studies' array");
    std::map<std::string, std::map<int, Rating>> by_name;
    for (const auto& entry : doc.at("studies")) {
        const auto name = entry.at("name").get<std::string>();
        std::map<int, Rating> ratings;
        for (const auto& [key, value] : entry.at("domains").items()) {
            int domain = 0;
            const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), domain);
            if (ec != std::errc{} || ptr != key.data() + key.size() || domain < 1) {
                fail("RoB table: study '" + name + "' has invalid domain id '" + key + "'");
            }
            const auto token = value.get<std::string>();
            if (token != "low" && token != "unclear" && token != "high") {
                fail("RoB table: study '" + name + "', domain " + key + ": unknown rating '" + token +
                     "' (allowed: low, unclear, high)");
            }
            ratings[domain] = parse_rating(token);
        }
        if (!by_name.emplace(name, std::move(ratings)).second) fail("RoB table: duplicate study '" + name + "'");
    }

    RoBTable table;
    for (const auto& s : data.studies) {
        const auto it = by_name.find(s.name);
        if (it == by_name.end()) fail("RoB table has no entry for study '" + s.name + "'");
        table.studies.push_back(s.name);
        table.ratings.push_back(it->second);
        by_name.erase(it);
    }
    if (!by_name.empty()) fail("RoB table lists study '" + by_name.begin()->first + "' absent from the study data");

    std::set<int> declared;
    for (const auto& r : table.ratings) {
        for (const auto& [d, _] : r) declared.insert(d);
    }
    for (std::size_t s = 0; s < table.studies.size(); ++s) {
        for (int d : declared) {
            if (!table.ratings[s].contains(d)) {
                fail("RoB table: study '" + table.studies[s] + "' has no rating for domain " + std::to_string(d));
            }
        }
    }
    return table;
}

RoBTable ingest_rob_table(const std::filesystem::path& path, const StudyData& data) {
    Json doc;
    try {
        doc = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail("RoB table '" + path.string() + "': " + e.what());
    }
    return parse_rob_table(doc, data);
}

std::vector<QuantitySpec> RunConfig::quantities() const {
    std::vector<QuantitySpec> out{QuantitySpec::expectation()};
    for (double t : thresholds) out.push_back(QuantitySpec::exceedance(t));
    for (double p : percentiles) out.push_back(QuantitySpec::percentile(p));
    return out;
}

std::string RunConfig::domain_label() const {
    if (all_domains) return "all";
    std::string out;
    for (std::size_t i = 0; i < domains.size(); ++i) out += (i ? "," : "") + std::to_string(domains[i]);
    return out;
}

void set_domains(RunConfig& config, const std::string& text) {
    const auto t = trim(text);
    config.domains.clear();
    config.all_domains = t == "all";
    if (config.all_domains) return;
    for (const auto& part : split(t, ',')) {
        int d = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), d);
        if (ec != std::errc{} || ptr != part.data() + part.size() || d < 1) {
            fail("invalid domain selection '" + text + "' (expected e.g. 3, 1,2 or all)");
        }
        config.domains.push_back(d);
    }
    if (config.domains.empty()) fail("empty domain selection");
}

RunConfig parse_run_config(const Json& doc, const std::filesystem::path& base_dir) {
    RunConfig c;
    try {
        if (doc.contains("format_version") && doc.at("format_version").get<int>() != kFormatVersion) {
            fail("unsupported configuration format_version");
        }
        if (doc.contains("data")) c.data_path = resolve(base_dir, doc.at("data").get<std::string>());
        if (doc.contains("rob")) c.rob_path = resolve(base_dir, doc.at("rob").get<std::string>());
        if (doc.contains("domains")) {
            const auto& d = doc.at("domains");
            if (d.is_string()) {
                set_domains(c, d.get<std::string>());
            } else {
                c.domains = d.get<std::vector<int>>();
            }
        }
        if (doc.contains("cutoffs")) {
            const auto& cut = doc.at("cutoffs");
            if (cut.contains("low")) c.cutoffs.low = interval_from_json(cut.at("low"));
            if (cut.contains("high")) c.cutoffs.high = interval_from_json(cut.at("high"));
        }
        if (doc.contains("extra_constraints") && !doc.at("extra_constraints").is_null()) {
            std::vector<BlockConfig> blocks;
            for (const auto& b : doc.at("extra_constraints")) {
                BlockConfig blk;
                blk.id = b.at("id").get<std::string>();
                blk.studies = b.at("studies").get<std::vector<std::string>>();
                read_if(b, "lower", blk.lower);
                if (b.contains("upper")) {
                    const auto& u = b.at("upper");
                    if (u.is_number()) {
                        blk.upper = u.get<double>();
                    } else {
                        blk.upper = u.get<std::string>();
                    }
                }
                blocks.push_back(std::move(blk));
            }
            c.extra_constraints = std::move(blocks);
        }
        if (doc.contains("hyperparameters")) {
            const auto& h = doc.at("hyperparameters");
            read_if(h, "mu_beta", c.hyper.mu_beta);
            read_if(h, "sigma_beta", c.hyper.sigma_beta);
            read_if(h, "mu_mu", c.hyper.mu_mu);
            read_if(h, "sigma_mu", c.hyper.sigma_mu);
            read_if(h, "alpha", c.hyper.alpha);
            read_if(h, "lambda", c.hyper.lambda);
        }
        if (doc.contains("mcmc")) {
            const auto& m = doc.at("mcmc");
            read_if(m, "chains", c.mcmc.n_chains);
            read_if(m, "burnin", c.mcmc.n_burnin);
            read_if(m, "samples", c.mcmc.n_samples);
            read_if(m, "thin", c.mcmc.thin);
            read_if(m, "seed", c.mcmc.seed);
            read_if(m, "initial_step_beta", c.mcmc.initial_step_beta);
            read_if(m, "initial_step_delta", c.mcmc.initial_step_delta);
            read_if(m, "adapt_window", c.mcmc.adapt_window);
            read_if(m, "target_accept", c.mcmc.target_accept);
        }
        if (doc.contains("enumeration")) {
            const auto& e = doc.at("enumeration");
            read_if(e, "box_points_per_axis", c.enumeration.box_points_per_axis);
            read_if(e, "singleton_points", c.enumeration.singleton_points);
            if (e.contains("weight_spacing")) {
                const double spacing = e.at("weight_spacing").get<double>();
                if (!(spacing > 0.0 && spacing <= 1.0)) fail("weight_spacing must lie in (0, 1]");
                const double m = std::round(1.0 / spacing);
                if (std::abs(1.0 / m - spacing) > 1e-12) fail("weight_spacing must equal 1/m for an integer m");
                c.enumeration.weight_denominator = static_cast<int>(m);
            }
        }
        if (doc.contains("quantities")) {
            const auto& q = doc.at("quantities");
            read_if(q, "thresholds", c.thresholds);
            read_if(q, "percentiles", c.percentiles);
        }
        read_if(doc, "decision_probability", c.decision_probability);
        if (doc.contains("output")) c.output_dir = resolve(base_dir, doc.at("output").get<std::string>());
        read_if(doc, "workers", c.workers);
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("configuration: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail("configuration '" + path.string() + "': " + e.what());
    }
    // A run manifest carries the resolved configuration; replay from it.
    if (doc.is_object() && doc.contains("tool") && doc.contains("config")) doc = doc.at("config");
    return parse_run_config(doc, path.parent_path());
}

Json to_json(const RunConfig& c) {
    Json j;
    j["format_version"] = kFormatVersion;
    j["data"] = c.data_path.string();
    j["rob"] = c.rob_path.string();
    j["domains"] = c.all_domains ? Json("all") : Json(c.domains);
    j["cutoffs"] = {{"low", {c.cutoffs.low.lower, c.cutoffs.low.upper}},
                    {"high", {c.cutoffs.high.lower, c.cutoffs.high.upper}}};
    if (c.extra_constraints) {
        Json blocks = Json::array();
        for (const auto& b : *c.extra_constraints) {
            Json jb{{"id", b.id}, {"studies", b.studies}, {"lower", b.lower}};
            std::visit([&](const auto& u) { jb["upper"] = u; }, b.upper);
            blocks.push_back(std::move(jb));
        }
        j["extra_constraints"] = std::move(blocks);
    } else {
        j["extra_constraints"] = nullptr;
    }
    j["hyperparameters"] = {{"mu_beta", c.hyper.mu_beta},   {"sigma_beta", c.hyper.sigma_beta},
                            {"mu_mu", c.hyper.mu_mu},       {"sigma_mu", c.hyper.sigma_mu},
                            {"alpha", c.hyper.alpha},       {"lambda", c.hyper.lambda}};
    j["mcmc"] = {{"chains", c.mcmc.n_chains},
                 {"burnin", c.mcmc.n_burnin},
                 {"samples", c.mcmc.n_samples},
                 {"thin", c.mcmc.thin},
                 {"seed", c.mcmc.seed},
                 {"initial_step_beta", c.mcmc.initial_step_beta},
                 {"initial_step_delta", c.mcmc.initial_step_delta},
                 {"adapt_window", c.mcmc.adapt_window},
                 {"target_accept", c.mcmc.target_accept}};
    j["enumeration"] = {{"box_points_per_axis", c.enumeration.box_points_per_axis},
                        {"weight_spacing", 1.0 / c.enumeration.weight_denominator},
                        {"singleton_points", c.enumeration.singleton_points}};
    j["quantities"] = {{"thresholds", c.thresholds}, {"percentiles", c.percentiles}};
    j["decision_probability"] = c.decision_probability;
    j["output"] = c.output_dir.string();
    j["workers"] = c.workers;
    return j;
}

ExtraConstraints resolve_constraints(const std::vector<BlockConfig>& blocks, const StudyData& data) {
    ExtraConstraints out;
    for (const auto& b : blocks) {
        BlockDecl decl;
        decl.id = b.id;
        decl.lower = b.lower;
        decl.upper = b.upper;
        for (const auto& name : b.studies) {
            const auto it = std::find_if(data.studies.begin(), data.studies.end(),
                                         [&](const StudyRecord& s) { return s.name == name; });
            if (it == data.studies.end()) fail("constraint block '" + b.id + "' names unknown study '" + name + "'");
            decl.studies.push_back(static_cast<std::size_t>(it - data.studies.begin()));
        }
        out.push_back(std::move(decl));
    }
    return out;
}

Json to_json(const QualityVector& q) { return Json(q.q); }

Json to_json(const PosteriorSummary& s) {
    Json j;
    j["mean_mu"] = s.mean_mu;
    j["exceedance"] = map_to_json(s.exceedance, "threshold", "probability");
    j["percentiles_mu"] = map_to_json(s.percentiles_mu, "level", "value");
    j["mean_delta"] = s.mean_delta;
    Json ex = Json::array(), pc = Json::array();
    for (const auto& m : s.exceedance_delta) ex.push_back(map_to_json(m, "threshold", "probability"));
    for (const auto& m : s.percentiles_delta) pc.push_back(map_to_json(m, "level", "value"));
    j["exceedance_delta"] = std::move(ex);
    j["percentiles_delta"] = std::move(pc);
    j["ess_mu"] = optional_number(s.ess_mu);
    j["rhat_mu"] = optional_number(s.rhat_mu);
    return j;
}

PosteriorSummary summary_from_json(const Json& j) {
    PosteriorSummary s;
    s.mean_mu = j.at("mean_mu").get<double>();
    s.exceedance = map_from_json(j.at("exceedance"), "threshold", "probability");
    s.percentiles_mu = map_from_json(j.at("percentiles_mu"), "level", "value");
    s.mean_delta = j.at("mean_delta").get<std::vector<double>>();
    for (const auto& m : j.at("exceedance_delta")) s.exceedance_delta.push_back(map_from_json(m, "threshold", "probability"));
    for (const auto& m : j.at("percentiles_delta")) s.percentiles_delta.push_back(map_from_json(m, "level", "value"));
    s.ess_mu = optional_from_json(j.at("ess_mu"));
    s.rhat_mu = optional_from_json(j.at("rhat_mu"));
    return s;
}

Json to_json(const QuantitySpec& q) {
    Json j;
    switch (q.kind) {
        case QuantitySpec::Kind::expectation: j["kind"] = "expectation"; break;
        case QuantitySpec::Kind::exceedance: j["kind"] = "exceedance"; j["threshold"] = q.parameter; break;
        case QuantitySpec::Kind::percentile: j["kind"] = "percentile"; j["level"] = q.parameter; break;
    }
    j["target"] = q.study ? Json(*q.study + 1) : Json("mu");
    return j;
}

QuantitySpec quantity_from_json(const Json& j) {
    QuantitySpec q;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "expectation") {
        q.kind = QuantitySpec::Kind::expectation;
    } else if (kind == "exceedance") {
        q.kind = QuantitySpec::Kind::exceedance;
        q.parameter = j.at("threshold").get<double>();
    } else if (kind == "percentile") {
        q.kind = QuantitySpec::Kind::percentile;
        q.parameter = j.at("level").get<double>();
    } else {
        fail("unknown quantity kind '" + kind + "'");
    }
    const auto& target = j.at("target");
    if (!target.is_string()) q.study = target.get<std::size_t>() - 1;
    return q;
}

Json to_json(const AnalysisRecord& r) {
    Json j;
    j["format_version"] = kFormatVersion;
    j["studies"] = r.study_names;
    j["domains"] = r.domain_label;
    j["decision_probability"] = r.decision_probability;
    Json quantities = Json::array();
    for (const auto& q : r.quantities) quantities.push_back(to_json(q));
    j["quantities"] = std::move(quantities);
    j["unadjusted"] = r.unadjusted ? to_json(*r.unadjusted) : Json(nullptr);

    Json bounds = Json::array();
    for (std::size_t i = 0; i < r.bounds.bounds.size(); ++i) {
        const auto& b = r.bounds.bounds[i];
        bounds.push_back(Json{{"quantity", to_json(b.quantity)},
                              {"label", label(b.quantity)},
                              {"lower", b.lower},
                              {"q_lower", to_json(r.bounds.q_lower(i))},
                              {"upper", b.upper},
                              {"q_upper", to_json(r.bounds.q_upper(i))}});
    }
    j["bounds"] = std::move(bounds);

    Json trace = Json::array();
    for (std::size_t i = 0; i < r.bounds.trace.size(); ++i) {
        trace.push_back(Json{{"index", i}, {"q", to_json(r.bounds.vectors[i])}, {"summary", to_json(r.bounds.trace[i])}});
    }
    j["trace"] = std::move(trace);
    return j;
}

AnalysisRecord record_from_json(const Json& j) {
    AnalysisRecord r;
    try {
        if (j.at("format_version").get<int>() != kFormatVersion) fail("unsupported results format_version");
        r.study_names = j.at("studies").get<std::vector<std::string>>();
        r.domain_label = j.at("domains").get<std::string>();
        r.decision_probability = j.at("decision_probability").get<double>();
        for (const auto& q : j.at("quantities")) r.quantities.push_back(quantity_from_json(q));
        if (!j.at("unadjusted").is_null()) r.unadjusted = summary_from_json(j.at("unadjusted"));
        for (const auto& t : j.at("trace")) {
            r.bounds.vectors.push_back(QualityVector{t.at("q").get<std::vector<double>>()});
            r.bounds.trace.push_back(summary_from_json(t.at("summary")));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("results file: ") + e.what());
    }
    if (!r.bounds.trace.empty()) {
        for (const auto& q : r.quantities) r.bounds.bounds.push_back(extract_bounds(r.bounds.trace, q));
    }
    return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '" + path.string() + "'");
    out << text;
    if (!out) fail("write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail("'" + path.string() + "': " + e.what());
    }
}

}  // namespace robmeta
