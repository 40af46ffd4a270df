#include "robmeta/quality_sets.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "robmeta/error.hpp"

namespace robmeta {
namespace {

[[noreturn]] void fail(const std::string& message) { throw Error("quality_sets", message); }

using Lattice = std::vector<std::int64_t>;

Lattice expand(const QualitySetSpec& spec, const std::vector<std::int64_t>& block_values) {
    Lattice q(spec.n_studies, 0);
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        for (std::size_t s : spec.blocks[b].studies) q[s] = block_values[b];
    }
    return q;
}

LatticeSet from_set(std::int64_t denominator, std::set<Lattice>&& unique) {
    LatticeSet out;
    out.denominator = denominator;
    out.vectors.assign(std::make_move_iterator(unique.begin()), std::make_move_iterator(unique.end()));
    return out;
}

LatticeSet enumerate_box(const QualitySetSpec& spec, std::size_t points) {
    const auto steps = static_cast<std::int64_t>(points - 1);
    const std::size_t nb = spec.blocks.size();
    std::size_t total = 1;
    for (std::size_t b = 0; b < nb; ++b) total *= points;
    std::set<Lattice> unique;
    std::vector<std::int64_t> values(nb);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        for (std::size_t b = nb; b-- > 0;) {
            const auto& blk = spec.blocks[b];
            const auto j = static_cast<std::int64_t>(rest % points);
            rest /= points;
            values[b] = blk.lower * steps + j * (blk.upper - blk.lower);
        }
        unique.insert(expand(spec, values));
    }
    return from_set(steps * kQualityScale, std::move(unique));
}

LatticeSet enumerate_hull(const QualitySetSpec& spec, int m) {
    const auto vertices = extreme_points_exact(spec).vectors;
    const auto weights = simplex_weights(vertices.size(), m);
    std::set<Lattice> unique;
    Lattice q(spec.n_studies);
    for (const auto& w : weights) {
        std::fill(q.begin(), q.end(), 0);
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            if (w[v] == 0) continue;
            for (std::size_t s = 0; s < q.size(); ++s) q[s] += w[v] * vertices[v][s];
        }
        unique.insert(q);
    }
    return from_set(static_cast<std::int64_t>(m) * kQualityScale, std::move(unique));
}

}  // namespace

std::string to_string(Rating r) {
    switch (r) {
        case Rating::low: return "low";
        case Rating::unclear: return "unclear";
        case Rating::high: return "high";
    }
    return "?";
}

Rating parse_rating(const std::string& token) {
    if (token == "low") return Rating::low;
    if (token == "unclear") return Rating::unclear;
    if (token == "high") return Rating::high;
    fail("unknown rating '" + token + "' (allowed: low, unclear, high)");
}

std::int64_t to_quality_units(double value) {
    const double scaled = value * static_cast<double>(kQualityScale);
    const double rounded = std::round(scaled);
    if (!(value > 0.0 && value <= 1.0)) fail("quality bound " + std::to_string(value) + " is outside (0, 1]");
    if (!std::isfinite(value) || std::abs(scaled - rounded) > 1e-6) {
        fail("quality bound " + std::to_string(value) + " is not a multiple of 1e-6");
    }
    return static_cast<std::int64_t>(rounded);
}

void validate(const CutoffPolicy& p) {
    const auto ok = [](Interval i) { return i.lower > 0.0 && i.lower <= i.upper && i.upper <= 1.0; };
    if (!ok(p.low) || !ok(p.high)) fail("cutoff intervals must satisfy 0 < lower <= upper <= 1");
    if (p.high.lower > p.low.lower || p.high.upper > p.low.upper) {
        fail("high-risk bounds must not exceed low-risk bounds");
    }
}

std::vector<std::size_t> QualitySetSpec::topological_order() const {
    const std::size_t nb = blocks.size();
    std::vector<int> state(nb, 0);  // 0 new, 1 on stack, 2 done
    std::vector<std::size_t> order;
    std::function<void(std::size_t)> visit = [&](std::size_t b) {
        if (state[b] == 2) return;
        if (state[b] == 1) fail("block constraints contain a cycle");
        state[b] = 1;
        if (blocks[b].parent) {
            if (*blocks[b].parent >= nb) fail("block references a missing parent");
            visit(*blocks[b].parent);
        }
        state[b] = 2;
        order.push_back(b);
    };
    for (std::size_t b = 0; b < nb; ++b) visit(b);
    return order;
}

bool QualitySetSpec::is_box() const {
    return std::none_of(blocks.begin(), blocks.end(), [](const QualityBlock& b) { return b.parent.has_value(); });
}

void validate(const QualitySetSpec& spec) {
    std::vector<int> seen(spec.n_studies, 0);
    for (const auto& b : spec.blocks) {
        if (b.studies.empty()) fail("empty block");
        for (std::size_t s : b.studies) {
            if (s >= spec.n_studies) fail("block refers to study index " + std::to_string(s + 1) + " out of range");
            ++seen[s];
        }
        if (b.lower <= 0 || b.lower > kQualityScale) fail("block lower bound must lie in (0, 1]");
        if (!b.parent && (b.upper < b.lower || b.upper > kQualityScale)) {
            fail("block bounds must satisfy lower <= upper <= 1");
        }
    }
    for (std::size_t s = 0; s < spec.n_studies; ++s) {
        if (seen[s] != 1) fail("study " + std::to_string(s + 1) + " must belong to exactly one block");
    }
    spec.topological_order();
    for (const auto& b : spec.blocks) {
        if (b.parent && b.lower > spec.blocks[*b.parent].lower) {
            fail("a block's lower bound may not exceed the lower bound of the block bounding it");
        }
    }
}

QualitySetSpec build_set_spec(const RoBTable& rob, const std::vector<int>& domains,
                              const CutoffPolicy& policy, const std::optional<ExtraConstraints>& extra) {
    validate(policy);
    if (domains.empty()) fail("no risk-of-bias domain selected");
    const std::size_t k = rob.studies.size();
    for (std::size_t s = 0; s < k; ++s) {
        for (int d : domains) {
            if (!rob.ratings[s].contains(d)) {
                fail("study '" + rob.studies[s] + "' has no rating for domain " + std::to_string(d));
            }
        }
    }

    QualitySetSpec spec;
    spec.n_studies = k;

    if (extra) {
        std::map<std::string, std::size_t> ids;
        for (std::size_t b = 0; b < extra->size(); ++b) {
            if (!ids.emplace((*extra)[b].id, b).second) fail("duplicate block id '" + (*extra)[b].id + "'");
        }
        for (const auto& decl : *extra) {
            QualityBlock blk;
            blk.studies = decl.studies;
            blk.lower = to_quality_units(decl.lower);
            if (const auto* c = std::get_if<double>(&decl.upper)) {
                blk.upper = to_quality_units(*c);
            } else {
                const auto& ref = std::get<std::string>(decl.upper);
                const auto it = ids.find(ref);
                if (it == ids.end()) fail("block '" + decl.id + "' refers to unknown block '" + ref + "'");
                blk.parent = it->second;
            }
            spec.blocks.push_back(std::move(blk));
        }
        validate(spec);
        return spec;
    }

    for (int d : domains) {
        for (std::size_t s = 0; s < k; ++s) {
            if (rob.ratings[s].at(d) != rob.ratings[s].at(domains.front())) {
                fail("multi-domain selection needs explicit block constraints (no scoring rule is built in)");
            }
        }
    }

    const int domain = domains.front();
    std::vector<std::size_t> low, high, unclear;
    for (std::size_t s = 0; s < k; ++s) {
        switch (rob.ratings[s].at(domain)) {
            case Rating::low: low.push_back(s); break;
            case Rating::high: high.push_back(s); break;
            case Rating::unclear: unclear.push_back(s); break;
        }
    }
    std::optional<std::size_t> low_block;
    if (!low.empty()) {
        low_block = spec.blocks.size();
        spec.blocks.push_back({low, to_quality_units(policy.low.lower), to_quality_units(policy.low.upper), {}});
    }
    if (!high.empty()) {
        spec.blocks.push_back({high, to_quality_units(policy.high.lower), to_quality_units(policy.high.upper), {}});
    }
    const auto band = policy.unclear();
    for (std::size_t s : unclear) {
        QualityBlock blk{{s}, to_quality_units(band.lower), to_quality_units(band.upper), {}};
        if (low_block) blk.parent = low_block;
        spec.blocks.push_back(std::move(blk));
    }
    validate(spec);
    return spec;
}

std::vector<QualityVector> LatticeSet::to_real() const {
    std::vector<QualityVector> out;
    out.reserve(vectors.size());
    const auto den = static_cast<double>(denominator);
    for (const auto& v : vectors) {
        QualityVector q;
        q.q.reserve(v.size());
        for (auto n : v) q.q.push_back(static_cast<double>(n) / den);
        out.push_back(std::move(q));
    }
    return out;
}

bool satisfies(const QualitySetSpec& spec, std::span<const std::int64_t> num, std::int64_t den) {
    if (num.size() != spec.n_studies) return false;
    std::vector<std::int64_t> value(spec.blocks.size());
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        const auto& blk = spec.blocks[b];
        value[b] = num[blk.studies.front()];
        for (std::size_t s : blk.studies) {
            if (num[s] != value[b]) return false;
        }
    }
    // value / den against bound / kQualityScale, cross-multiplied.
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        const auto& blk = spec.blocks[b];
        if (value[b] * kQualityScale < blk.lower * den) return false;
        if (blk.parent) {
            if (value[b] > value[*blk.parent]) return false;
        } else if (value[b] * kQualityScale > blk.upper * den) {
            return false;
        }
    }
    return true;
}

LatticeSet extreme_points_exact(const QualitySetSpec& spec) {
    validate(spec);
    const auto order = spec.topological_order();
    std::vector<std::int64_t> values(spec.blocks.size());
    std::set<Lattice> unique;
    std::function<void(std::size_t)> assign = [&](std::size_t pos) {
        if (pos == order.size()) {
            unique.insert(expand(spec, values));
            return;
        }
        const auto& blk = spec.blocks[order[pos]];
        const std::int64_t upper = blk.parent ? values[*blk.parent] : blk.upper;
        values[order[pos]] = blk.lower;
        assign(pos + 1);
        if (upper != blk.lower) {
            values[order[pos]] = upper;
            assign(pos + 1);
        }
    };
    assign(0);
    return from_set(kQualityScale, std::move(unique));
}

std::vector<QualityVector> extreme_points(const QualitySetSpec& spec) {
    return extreme_points_exact(spec).to_real();
}

std::vector<std::vector<int>> simplex_weights(std::size_t n_vertices, int m) {
    if (n_vertices < 1 || m < 1) fail("simplex weights need n >= 1 and m >= 1");
    std::vector<std::vector<int>> out;
    std::vector<int> parts(n_vertices, 0);
    std::function<void(std::size_t, int)> fill = [&](std::size_t i, int remaining) {
        if (i + 1 == n_vertices) {
            parts[i] = remaining;
            out.push_back(parts);
            return;
        }
        for (int p = 0; p <= remaining; ++p) {
            parts[i] = p;
            fill(i + 1, remaining - p);
        }
    };
    fill(0, m);
    return out;
}

void validate(const EnumerationConfig& c) {
    if (c.box_points_per_axis < 2 || c.singleton_points < 2) fail("grid point counts must be >= 2");
    if (c.weight_denominator < 1) fail("weight spacing must be 1/m for an integer m >= 1");
}

LatticeSet enumerate_exact(const QualitySetSpec& spec, const EnumerationConfig& config) {
    validate(spec);
    validate(config);
    if (spec.is_box()) {
        const bool single = spec.blocks.size() == 1;
        return enumerate_box(spec, single ? config.singleton_points : config.box_points_per_axis);
    }
    return enumerate_hull(spec, config.weight_denominator);
}

std::vector<QualityVector> enumerate_quality_vectors(const QualitySetSpec& spec, const EnumerationConfig& config) {
    return enumerate_exact(spec, config).to_real();
}

}  // namespace robmeta
