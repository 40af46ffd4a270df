#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robmeta/model.hpp"
#include "robmeta/sampler.hpp"

namespace robmeta {

/// A posterior functional of mu or of one delta_i.
struct QuantitySpec {
    enum class Kind { expectation, exceedance, percentile };
    Kind kind = Kind::expectation;
    double parameter = 0.0;              // threshold t or percentile level
    std::optional<std::size_t> study;    // empty: mu

    static QuantitySpec expectation(std::optional<std::size_t> study = std::nullopt) {
        return {Kind::expectation, 0.0, study};
    }
    static QuantitySpec exceedance(double t, std::optional<std::size_t> study = std::nullopt) {
        return {Kind::exceedance, t, study};
    }
    static QuantitySpec percentile(double level, std::optional<std::size_t> study = std::nullopt) {
        return {Kind::percentile, level, study};
    }

    bool operator==(const QuantitySpec&) const = default;
};

void validate(const QuantitySpec& quantity);

/// Short label such as "E(mu)", "P(mu > 1)", "P2.5%(delta[3])".
std::string label(const QuantitySpec& quantity);

/// Reads the quantity from a summary; throws when the summary was not
/// computed for the needed threshold or level.
double estimate(const PosteriorSummary& summary, const QuantitySpec& quantity);

struct QuantityBounds {
    QuantitySpec quantity;
    double lower = 0.0;
    std::size_t lower_index = 0;  // position of q_* in the enumeration
    double upper = 0.0;
    std::size_t upper_index = 0;
};

struct RobustBounds {
    std::vector<QualityVector> vectors;
    std::vector<PosteriorSummary> trace;  // one per vector, same order
    std::vector<QuantityBounds> bounds;   // one per requested quantity

    const QualityVector& q_lower(std::size_t i) const { return vectors[bounds[i].lower_index]; }
    const QualityVector& q_upper(std::size_t i) const { return vectors[bounds[i].upper_index]; }
};

/// Min and max of a quantity over a trace. Ties go to the earliest vector.
QuantityBounds extract_bounds(const std::vector<PosteriorSummary>& trace, const QuantitySpec& quantity);

struct AnalysisOptions {
    std::size_t workers = 1;
    /// Extra thresholds/levels summarised for every vector in addition to
    /// those implied by the quantities.
    std::vector<double> extra_thresholds;
    std::vector<double> extra_levels;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Stream of the run for vector `index` under master seed `seed`.
std::uint64_t vector_seed(std::uint64_t master_seed, std::size_t index) noexcept;
/// Stream reserved for the unadjusted reference run.
std::uint64_t unadjusted_seed(std::uint64_t master_seed) noexcept;

/// Runs the sampler for every vector (settings.seed is the master seed) and
/// reduces each quantity to its lower and upper bound.
RobustBounds analyze_over_set(const StudyData& data, const Hyperparameters& hyper,
                              const std::vector<QualityVector>& vectors, const McmcSettings& settings,
                              const std::vector<QuantitySpec>& quantities,
                              const AnalysisOptions& options = {});

/// Unadjusted reference summary, on the dedicated unadjusted stream.
PosteriorSummary analyze_unadjusted(const StudyData& data, const Hyperparameters& hyper,
                                    const McmcSettings& settings, const std::vector<double>& thresholds,
                                    const std::vector<double>& levels);

struct DecisionRule {
    double probability = 0.95;  // exceedance probability required to act
    double reference = 0.0;     // reference value on the log-OR scale
};

struct ComparisonRow {
    QuantitySpec quantity;
    double lower = 0.0;
    double upper = 0.0;
    double unadjusted = 0.0;
    bool no_bias_impact = false;       // lower == upper == unadjusted
    bool conclusion_sensitive = false; // exceedance straddles the decision probability
    bool crosses_reference = false;    // bounds or unadjusted value straddle the reference
};

std::vector<ComparisonRow> compare_to_unadjusted(const RobustBounds& bounds, const PosteriorSummary& unadjusted,
                                                 const DecisionRule& rule = {});

}  // namespace robmeta
