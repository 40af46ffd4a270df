#include <doctest.h>

#include <atomic>

#include "fixtures.hpp"
#include "robmeta/error.hpp"
#include "robmeta/robust_analysis.hpp"

using namespace robmeta;
using robmeta::testing::rituximab;

namespace {

McmcSettings quick() {
    McmcSettings s;
    s.n_chains = 2;
    s.n_burnin = 300;
    s.n_samples = 600;
    return s;
}

std::vector<QuantitySpec> table_quantities() {
    return {QuantitySpec::expectation(), QuantitySpec::exceedance(1.0), QuantitySpec::percentile(0.05),
            QuantitySpec::percentile(0.025, 2)};
}

std::vector<QualityVector> equal_vectors(std::initializer_list<double> values) {
    std::vector<QualityVector> out;
    for (double v : values) out.push_back(QualityVector{{v, v, v, v}});
    return out;
}

}  // namespace

TEST_CASE("labels and validation") {
    CHECK(label(QuantitySpec::expectation()) == "E(mu)");
    CHECK(label(QuantitySpec::exceedance(1.0)) == "P(mu > 1)");
    CHECK(label(QuantitySpec::percentile(0.025, 2)) == "P2.5%(delta[3])");
    CHECK_THROWS_AS(validate(QuantitySpec::percentile(1.0)), Error);
    CHECK_THROWS_AS(validate(QuantitySpec::percentile(0.0)), Error);
    CHECK_THROWS_AS(validate(QuantitySpec::exceedance(std::numeric_limits<double>::infinity())), Error);
    PosteriorSummary s;
    s.mean_mu = 1.0;
    CHECK_THROWS_AS(estimate(s, QuantitySpec::exceedance(2.0)), Error);
}

TEST_CASE("singleton set") {
    const auto r = analyze_over_set(rituximab(), Hyperparameters{}, equal_vectors({0.7}), quick(), table_quantities());
    REQUIRE(r.trace.size() == 1);
    for (std::size_t i = 0; i < r.bounds.size(); ++i) {
        const auto& b = r.bounds[i];
        CHECK(b.lower == b.upper);
        CHECK(b.lower == estimate(r.trace[0], b.quantity));
        CHECK(r.q_lower(i).q == r.q_upper(i).q);
    }
}

TEST_CASE("bounds enclose every trace entry and are achieved") {
    const auto vectors = equal_vectors({0.5, 0.6, 0.7, 0.8, 0.9});
    const auto r = analyze_over_set(rituximab(), Hyperparameters{}, vectors, quick(), table_quantities());
    for (const auto& b : r.bounds) {
        for (const auto& s : r.trace) {
            const double v = estimate(s, b.quantity);
            CHECK(b.lower <= v);
            CHECK(v <= b.upper);
        }
        CHECK(estimate(r.trace[b.lower_index], b.quantity) == b.lower);
        CHECK(estimate(r.trace[b.upper_index], b.quantity) == b.upper);
    }
}

TEST_CASE("ties go to the first achiever") {
    std::vector<PosteriorSummary> trace(3);
    trace[0].mean_mu = 2.0;
    trace[1].mean_mu = 1.0;
    trace[2].mean_mu = 1.0;
    const auto b = extract_bounds(trace, QuantitySpec::expectation());
    CHECK(b.lower_index == 1);
    CHECK(b.upper_index == 0);
    trace[2].mean_mu = 2.0;
    CHECK(extract_bounds(trace, QuantitySpec::expectation()).upper_index == 0);
}

TEST_CASE("worker count does not change results") {
    const auto vectors = equal_vectors({0.5, 0.6, 0.7, 0.8, 0.9, 0.95});
    AnalysisOptions one, three;
    three.workers = 3;
    std::atomic<std::size_t> calls{0};
    three.progress = [&](std::size_t, std::size_t total) {
        CHECK(total == vectors.size());
        ++calls;
    };
    const auto a = analyze_over_set(rituximab(), Hyperparameters{}, vectors, quick(), table_quantities(), one);
    const auto b = analyze_over_set(rituximab(), Hyperparameters{}, vectors, quick(), table_quantities(), three);
    CHECK(calls.load() == vectors.size());
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].mean_mu == b.trace[i].mean_mu);
        CHECK(a.trace[i].exceedance == b.trace[i].exceedance);
        CHECK(a.trace[i].percentiles_mu == b.trace[i].percentiles_mu);
        CHECK(a.trace[i].mean_delta == b.trace[i].mean_delta);
    }
    for (std::size_t i = 0; i < a.bounds.size(); ++i) {
        CHECK(a.bounds[i].lower == b.bounds[i].lower);
        CHECK(a.bounds[i].upper == b.bounds[i].upper);
        CHECK(a.bounds[i].lower_index == b.bounds[i].lower_index);
    }
}

TEST_CASE("enlarging the set never shrinks the bounds") {
    const auto small = equal_vectors({0.5, 0.7, 0.9});
    auto large = small;
    for (const auto& v : std::vector<QualityVector>{{{0.1, 0.1, 0.5, 0.5}}, {{0.95, 0.95, 0.1, 0.1}}})
        large.push_back(v);
    const auto a = analyze_over_set(rituximab(), Hyperparameters{}, small, quick(), table_quantities());
    const auto b = analyze_over_set(rituximab(), Hyperparameters{}, large, quick(), table_quantities());
    // a vector keeps its stream when the list grows at the end
    for (std::size_t i = 0; i < small.size(); ++i) CHECK(a.trace[i].mean_mu == b.trace[i].mean_mu);
    for (std::size_t i = 0; i < a.bounds.size(); ++i) {
        CHECK(b.bounds[i].lower <= a.bounds[i].lower);
        CHECK(b.bounds[i].upper >= a.bounds[i].upper);
    }
}

TEST_CASE("invalid inputs abort the run") {
    CHECK_THROWS_AS(analyze_over_set(rituximab(), Hyperparameters{}, {}, quick(), table_quantities()), Error);
    CHECK_THROWS_AS(analyze_over_set(rituximab(), Hyperparameters{}, {QualityVector{{0.5, 0.5}}}, quick(),
                                     table_quantities()),
                    Error);
    auto bad = quick();
    bad.n_chains = 0;
    CHECK_THROWS_AS(analyze_over_set(rituximab(), Hyperparameters{}, equal_vectors({0.5}), bad, table_quantities()),
                    Error);
    AnalysisOptions opts;
    opts.workers = 2;
    CHECK_THROWS_AS(analyze_over_set(rituximab(), Hyperparameters{},
                                     {QualityVector{{0.5, 0.5, 0.5, 0.5}}, QualityVector{{0.5, 0.5, 0.5, 0.0}}}, quick(),
                                     table_quantities(), opts),
                    Error);
}

TEST_CASE("seed streams") {
    CHECK(vector_seed(1, 0) != vector_seed(1, 1));
    CHECK(vector_seed(1, 0) != unadjusted_seed(1));
    CHECK(vector_seed(1, 5) == vector_seed(1, 5));
}

TEST_CASE("comparison flags") {
    RobustBounds rb;
    rb.vectors = equal_vectors({1.0});
    PosteriorSummary s;
    s.mean_mu = 1.5;
    s.exceedance[1.0] = 0.97;
    s.percentiles_mu[0.025] = 0.8;
    rb.trace = {s};
    const std::vector<QuantitySpec> qs{QuantitySpec::expectation(), QuantitySpec::exceedance(1.0),
                                       QuantitySpec::percentile(0.025)};
    for (const auto& q : qs) rb.bounds.push_back(extract_bounds(rb.trace, q));

    SUBCASE("coincident bounds") {
        for (const auto& row : compare_to_unadjusted(rb, s)) {
            CHECK(row.no_bias_impact);
            CHECK_FALSE(row.conclusion_sensitive);
            CHECK_FALSE(row.crosses_reference);
        }
    }
    SUBCASE("exceedance bound drops below the decision probability") {
        rb.bounds[1].lower = 0.886;
        rb.bounds[1].upper = 0.983;
        auto unadj = s;
        unadj.exceedance[1.0] = 0.998;
        const auto rows = compare_to_unadjusted(rb, unadj);
        CHECK(rows[1].conclusion_sensitive);
        CHECK_FALSE(rows[1].no_bias_impact);
        CHECK_FALSE(rows[0].conclusion_sensitive);
    }
    SUBCASE("lower percentile crossing zero") {
        rb.bounds[2].lower = -0.1;
        const auto rows = compare_to_unadjusted(rb, s);
        CHECK(rows[2].crosses_reference);
        CHECK_FALSE(rows[0].crosses_reference);
    }
    SUBCASE("mismatched quantities") {
        PosteriorSummary missing;
        missing.mean_mu = 1.5;
        CHECK_THROWS_AS(compare_to_unadjusted(rb, missing), Error);
    }
}
