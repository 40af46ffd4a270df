#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "robmeta/model.hpp"

namespace robmeta {

enum class Rating { low, unclear, high };

std::string to_string(Rating r);
/// Accepts "low", "unclear", "high"; throws otherwise.
Rating parse_rating(const std::string& token);

/// Risk-of-bias judgements, studies in the same order as StudyData.
struct RoBTable {
    std::vector<std::string> studies;
    std::vector<std::map<int, Rating>> ratings;  // per study: domain id -> rating
};

struct Interval {
    double lower;
    double upper;
};

/// Bounds on study quality per risk category. Unclear studies use
/// [high.lower, low.upper].
struct CutoffPolicy {
    Interval low{0.5, 0.95};
    Interval high{0.1, 0.5};

    Interval unclear() const { return {high.lower, low.upper}; }
};

void validate(const CutoffPolicy& policy);

/// Quality values are held exactly as integers in units of 1 / kQualityScale.
inline constexpr std::int64_t kQualityScale = 1'000'000;

/// Converts a decimal in (0, 1] to quality units; throws when the value is
/// not a multiple of 1e-6.
std::int64_t to_quality_units(double value);

/// A set of studies forced to share one quality value. The upper bound is
/// either a constant or the value of a parent block.
struct QualityBlock {
    std::vector<std::size_t> studies;
    std::int64_t lower = 0;
    std::int64_t upper = kQualityScale;
    std::optional<std::size_t> parent;
};

struct QualitySetSpec {
    std::size_t n_studies = 0;
    std::vector<QualityBlock> blocks;

    /// Blocks ordered so that parents precede their children.
    std::vector<std::size_t> topological_order() const;
    bool is_box() const;
};

/// Throws unless blocks partition the studies, parent links form a forest,
/// and constant bounds satisfy 0 < lower <= upper <= 1.
void validate(const QualitySetSpec& spec);

/// Analyst-declared block for multi-domain sets. `upper` is a constant or
/// the id of another block.
struct BlockDecl {
    std::string id;
    std::vector<std::size_t> studies;
    double lower = 0.1;
    std::variant<double, std::string> upper = 0.95;
};

using ExtraConstraints = std::vector<BlockDecl>;

QualitySetSpec build_set_spec(const RoBTable& rob, const std::vector<int>& domains,
                              const CutoffPolicy& policy,
                              const std::optional<ExtraConstraints>& extra = std::nullopt);

/// Quality vectors on a common integer lattice: q_i = num_i / denominator.
struct LatticeSet {
    std::int64_t denominator = kQualityScale;
    std::vector<std::vector<std::int64_t>> vectors;

    std::vector<QualityVector> to_real() const;
};

bool satisfies(const QualitySetSpec& spec, std::span<const std::int64_t> num, std::int64_t denominator);

/// Vertices with every block at its lower or (resolved) upper bound,
/// deduplicated and sorted lexicographically.
LatticeSet extreme_points_exact(const QualitySetSpec& spec);
std::vector<QualityVector> extreme_points(const QualitySetSpec& spec);

/// Compositions of m into n non-negative parts; weight_i = parts_i / m.
std::vector<std::vector<int>> simplex_weights(std::size_t n_vertices, int m);

struct EnumerationConfig {
    std::size_t box_points_per_axis = 10;
    int weight_denominator = 10;  // weight spacing 1/m
    std::size_t singleton_points = 10;
};

void validate(const EnumerationConfig& config);

/// Box sets: equally spaced grid (endpoints included) per block, Cartesian
/// product. A single block covering all studies uses `singleton_points`.
/// Otherwise convex combinations of the extreme points with simplex weights.
/// Deduplicated exactly, lexicographic order.
LatticeSet enumerate_exact(const QualitySetSpec& spec, const EnumerationConfig& config);
std::vector<QualityVector> enumerate_quality_vectors(const QualitySetSpec& spec,
                                                     const EnumerationConfig& config);

}  // namespace robmeta
