#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robmeta/model.hpp"
#include "robmeta/quality_sets.hpp"
#include "robmeta/robust_analysis.hpp"
#include "robmeta/sampler.hpp"

namespace robmeta {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// CSV with header `study,n_control,r_control,n_treatment,r_treatment`.
StudyData ingest_study_data(const std::filesystem::path& path);
StudyData parse_study_data(const std::string& text);
std::string emit_study_data(const StudyData& data);

/// RoB JSON: {"format_version": 1, "studies": [{"name": ..., "domains":
/// {"1": "low", ...}}]}. The result is reordered to match `data` and every
/// study must appear in both files.
RoBTable ingest_rob_table(const std::filesystem::path& path, const StudyData& data);
RoBTable parse_rob_table(const Json& doc, const StudyData& data);

/// Analyst block declaration as it appears in the configuration file
/// (studies by name).
struct BlockConfig {
    std::string id;
    std::vector<std::string> studies;
    double lower = 0.1;
    std::variant<double, std::string> upper = 0.95;
};

struct RunConfig {
    std::filesystem::path data_path;
    std::filesystem::path rob_path;
    std::vector<int> domains;  // empty together with all_domains
    bool all_domains = false;
    CutoffPolicy cutoffs;
    std::optional<std::vector<BlockConfig>> extra_constraints;
    Hyperparameters hyper;
    McmcSettings mcmc;
    EnumerationConfig enumeration;
    std::vector<double> thresholds{1.0};
    std::vector<double> percentiles{0.05, 0.025, 0.975};
    double decision_probability = 0.95;
    std::filesystem::path output_dir{"robmeta-out"};
    std::size_t workers = 1;

    /// E(mu), P(mu > t) per threshold, then percentiles of mu.
    std::vector<QuantitySpec> quantities() const;
    /// "1,2", "3" or "all".
    std::string domain_label() const;
};

/// Missing keys take their defaults. Relative paths resolve against
/// `base_dir`.
RunConfig parse_run_config(const Json& doc, const std::filesystem::path& base_dir = {});
/// Also accepts a run manifest, whose "config" member is used.
RunConfig load_run_config(const std::filesystem::path& path);
Json to_json(const RunConfig& config);

/// Parses "3", "1,2" or "all".
void set_domains(RunConfig& config, const std::string& text);

ExtraConstraints resolve_constraints(const std::vector<BlockConfig>& blocks, const StudyData& data);

Json to_json(const QualityVector& q);
Json to_json(const PosteriorSummary& summary);
PosteriorSummary summary_from_json(const Json& j);
Json to_json(const QuantitySpec& quantity);
QuantitySpec quantity_from_json(const Json& j);

/// Everything `report` needs to re-render tables and plots.
struct AnalysisRecord {
    std::vector<std::string> study_names;
    std::string domain_label;
    double decision_probability = 0.95;
    std::vector<QuantitySpec> quantities;
    std::optional<PosteriorSummary> unadjusted;
    RobustBounds bounds;  // empty vectors for unadjusted-only runs
};

Json to_json(const AnalysisRecord& record);
/// Bounds are re-extracted from the persisted trace.
AnalysisRecord record_from_json(const Json& j);

/// Pretty printed, fixed key order, trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace robmeta
