// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// line fails. Reference numbers are the bounds reported for the rituximab
// application, compared under fixed Monte Carlo tolerances.
//
// ROBMETA_FULL_GRID=1 runs domains 1-2 on the full 10^4 grid and checks the
// reference bounds directly; otherwise a 5^4 grid is checked for containment
// in the reference interval widened by 0.07.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "robmeta/forestplot.hpp"
#include "robmeta/io.hpp"
#include "robmeta/quality_sets.hpp"
#include "robmeta/robust_analysis.hpp"

using namespace robmeta;
namespace fs = std::filesystem;

namespace {

const fs::path kData{ROBMETA_DATA_DIR};

struct Line {
    bool ok = true;
    std::ostringstream detail;

    void check(bool pass, const std::string& what) {
        ok = ok && pass;
        const auto text = detail.str();
        if (!text.empty() && text.back() != ' ') detail << "; ";
        detail << what << (pass ? "" : " [X]");
    }
};

int failures = 0;

void report(int number, const std::string& title, Line& line) {
    std::printf("%s  %d  %s: %s\n", line.ok ? "PASS" : "FAIL", number, title.c_str(), line.detail.str().c_str());
    std::fflush(stdout);
    if (!line.ok) ++failures;
}

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// value within target +- tol
void near(Line& line, const std::string& name, double value, double target, double tol) {
    line.check(std::abs(value - target) <= tol + 1e-12,
               name + "=" + fmt(value) + " (" + fmt(target) + "+-" + fmt(tol, 3) + ")");
}

struct Row {
    std::array<double, 2> mean, exceed, p5;
};

struct DomainRun {
    std::string label;
    std::size_t n_vectors = 0;
    double seconds = 0.0;
    AnalysisRecord record;

    const QuantityBounds& bound(const QuantitySpec& q) const {
        for (const auto& b : record.bounds.bounds)
            if (b.quantity == q) return b;
        throw std::runtime_error("missing quantity");
    }
};

const std::vector<QuantitySpec> kQuantities{QuantitySpec::expectation(), QuantitySpec::exceedance(1.0),
                                            QuantitySpec::percentile(0.05), QuantitySpec::percentile(0.025),
                                            QuantitySpec::percentile(0.975)};

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

DomainRun run_domain(const std::string& label, const QualitySetSpec& spec, const EnumerationConfig& config,
                     const PosteriorSummary& unadjusted) {
    const auto data = testing::rituximab();
    DomainRun run;
    run.label = label;
    const auto vectors = enumerate_quality_vectors(spec, config);
    run.n_vectors = vectors.size();
    AnalysisOptions opts;
    opts.workers = workers();
    const auto t0 = std::chrono::steady_clock::now();
    run.record.bounds = analyze_over_set(data, Hyperparameters{}, vectors, McmcSettings{}, kQuantities, opts);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& s : data.studies) run.record.study_names.push_back(s.name);
    run.record.domain_label = label;
    run.record.quantities = kQuantities;
    run.record.unadjusted = unadjusted;
    std::fprintf(stderr, "domain %s: %zu vectors in %.0f s\n", label.c_str(), run.n_vectors, run.seconds);
    return run;
}

void check_row(Line& line, const DomainRun& run, const Row& ref) {
    const auto e = run.bound(QuantitySpec::expectation());
    const auto p = run.bound(QuantitySpec::exceedance(1.0));
    const auto q = run.bound(QuantitySpec::percentile(0.05));
    near(line, "E lo", e.lower, ref.mean[0], 0.05);
    near(line, "E hi", e.upper, ref.mean[1], 0.05);
    near(line, "P lo", p.lower, ref.exceed[0], 0.015);
    near(line, "P hi", p.upper, ref.exceed[1], 0.015);
    near(line, "P5 lo", q.lower, ref.p5[0], 0.05);
    near(line, "P5 hi", q.upper, ref.p5[1], 0.05);
}

void contained(Line& line, const std::string& name, std::array<double, 2> got, std::array<double, 2> ref,
               double slack) {
    line.check(got[0] >= ref[0] - slack && got[1] <= ref[1] + slack,
               name + " [" + fmt(got[0]) + ", " + fmt(got[1]) + "] in [" + fmt(ref[0] - slack) + ", " +
                   fmt(ref[1] + slack) + "]");
}

RoBTable rob() { return ingest_rob_table(kData / "rituximab_rob.json", testing::rituximab()); }

QualitySetSpec spec_for(std::vector<int> domains) { return build_set_spec(rob(), domains, CutoffPolicy{}); }

QualitySetSpec spec_all() {
    const auto cfg = load_run_config(kData / "all_domains.json");
    return build_set_spec(rob(), {1, 2, 3, 4, 5, 6}, cfg.cutoffs,
                          resolve_constraints(*cfg.extra_constraints, testing::rituximab()));
}

using Hundredths = std::set<std::vector<std::int64_t>>;

Hundredths hundredths(std::initializer_list<std::array<int, 4>> rows) {
    Hundredths out;
    for (const auto& r : rows) out.insert({r[0] * 10000LL, r[1] * 10000LL, r[2] * 10000LL, r[3] * 10000LL});
    return out;
}

// ---------------------------------------------------------------- criteria

void criterion_unadjusted(const PosteriorSummary& s) {
    Line line;
    near(line, "E(mu)", s.mean_mu, 1.471, 0.05);
    near(line, "P(mu>1)", s.exceedance.at(1.0), 0.998, 0.01);
    near(line, "P5%", s.percentiles_mu.at(0.05), 1.029, 0.05);
    report(1, "unadjusted model", line);
}

void criterion_counts() {
    Line line;
    const EnumerationConfig cfg;
    const auto count = [&](const std::string& name, const QualitySetSpec& spec, std::size_t expected) {
        const auto n = enumerate_exact(spec, cfg).vectors.size();
        line.check(n == expected, name + "=" + std::to_string(n) + " (" + std::to_string(expected) + ")");
    };
    count("S1", spec_for({1}), 10000);
    count("S2", spec_for({2}), 10000);
    count("S3", spec_for({3}), 736);
    count("S4", spec_for({4}), 286);
    count("S5", spec_for({5}), 10);
    count("S6", spec_for({6}), 10);
    count("Sall", spec_all(), 839);
    report(2, "enumeration counts", line);
}

void criterion_vertices() {
    Line line;
    const auto as_set = [](const LatticeSet& s) { return Hundredths(s.vectors.begin(), s.vectors.end()); };
    const auto v3 = extreme_points_exact(spec_for({3}));
    line.check(v3.vectors.size() == 8 &&
                   as_set(v3) == hundredths({{50, 50, 10, 10}, {95, 95, 10, 10}, {50, 50, 10, 50}, {95, 95, 10, 95},
                                             {50, 50, 50, 10}, {95, 95, 95, 10}, {50, 50, 50, 50}, {95, 95, 95, 95}}),
               "S3 " + std::to_string(v3.vectors.size()) + " vertices");
    const auto v4 = extreme_points_exact(spec_for({4}));
    line.check(v4.vectors.size() == 4 &&
                   as_set(v4) == hundredths({{10, 95, 95, 95}, {10, 50, 50, 50}, {50, 50, 50, 50}, {95, 95, 95, 95}}),
               "S4 " + std::to_string(v4.vectors.size()) + " vertices");
    const auto va = extreme_points_exact(spec_all());
    line.check(va.vectors.size() == 5 && as_set(va) == hundredths({{10, 10, 10, 10},
                                                                   {10, 95, 10, 10},
                                                                   {10, 95, 95, 95},
                                                                   {95, 95, 10, 10},
                                                                   {95, 95, 95, 95}}),
               "Sall " + std::to_string(va.vectors.size()) + " vertices");
    report(3, "extreme points", line);
}

void criterion_properties() {
    Line line;
    using namespace testing;

    {
        std::mt19937_64 gen(101);
        double worst = 0.0;
        for (int rep = 0; rep < 100; ++rep) {
            const std::size_t k = 1 + rep % 6;
            const auto f = random_fixture(gen, k);
            const auto data = dummy_data(k);
            const auto n = mu_conditional(f.state, f.hyper, f.q);
            const auto m = mu_quadrature(f, data);
            worst = std::max(worst, std::abs(n.mean - m.mean) / std::max(std::abs(m.mean), std::sqrt(m.variance)));
            worst = std::max(worst, std::abs(n.variance - m.variance) / m.variance);
            const auto ig = sigma2_conditional(f.state, f.hyper, f.q);
            const auto t = precision_quadrature(f, data);
            worst = std::max(worst, std::abs(ig.shape - t.mean * t.mean / t.variance) / ig.shape);
            worst = std::max(worst, std::abs(ig.rate - t.mean / t.variance) / ig.rate);
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "Gibbs vs quadrature worst rel err %.1e", worst);
        line.check(worst < 0.005, buf);
    }
    {
        std::mt19937_64 gen(303);
        std::normal_distribution<double> jump(0.0, 1.0);
        const auto data = rituximab();
        double worst = 0.0;
        for (int rep = 0; rep < 200; ++rep) {
            const auto f = random_fixture(gen, 4);
            for (std::size_t i = 0; i < 4; ++i) {
                for (auto kind : {Site::Kind::beta, Site::Kind::delta}) {
                    auto moved = f.state;
                    double& slot = kind == Site::Kind::beta ? moved.beta[i] : moved.delta[i];
                    const double before = slot;
                    slot += jump(gen);
                    const double full = log_posterior_unnorm(moved, data, f.hyper, f.q) -
                                        log_posterior_unnorm(f.state, data, f.hyper, f.q);
                    const double local = site_log_density({kind, i}, slot, f.state, data, f.hyper, f.q) -
                                         site_log_density({kind, i}, before, f.state, data, f.hyper, f.q);
                    worst = std::max(worst, std::abs(full - local));
                }
            }
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "MH local vs full max diff %.2e", worst);
        line.check(worst < 1e-9, buf);
    }
    {
        std::mt19937_64 gen(7);
        std::uniform_real_distribution<double> unit(1e-6, 1.0 - 1e-6);
        double worst = 0.0;
        for (int i = 0; i < 100000; ++i) {
            const double p = unit(gen);
            worst = std::max(worst, std::abs(inv_logit(logit(p)) - p));
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "inv_logit(logit) max err %.1e", worst);
        line.check(worst <= 1e-12, buf);
    }
    {
        bool ok = true;
        const EnumerationConfig cfg;
        for (const auto& spec : {spec_for({1}), spec_for({3}), spec_for({4}), spec_for({5}), spec_all()}) {
            const auto a = enumerate_exact(spec, cfg);
            for (const auto& v : a.vectors) ok = ok && satisfies(spec, v, a.denominator);
            const auto b = enumerate_exact(spec, cfg);
            ok = ok && a.vectors == b.vectors;
            ok = ok && std::set<std::vector<std::int64_t>>(a.vectors.begin(), a.vectors.end()).size() == a.vectors.size();
        }
        line.check(ok, "enumeration constraints, dedup, idempotence");
    }
    {
        McmcSettings s;
        s.n_burnin = 500;
        s.n_samples = 2000;
        const auto vectors = enumerate_quality_vectors(spec_for({4}), EnumerationConfig{});
        const std::vector<QualityVector> some(vectors.begin(), vectors.begin() + 12);
        AnalysisOptions one, many;
        many.workers = 4;
        const auto a = analyze_over_set(rituximab(), Hyperparameters{}, some, s, kQuantities, one);
        const auto b = analyze_over_set(rituximab(), Hyperparameters{}, some, s, kQuantities, many);
        const auto c = analyze_over_set(rituximab(), Hyperparameters{}, some, s, kQuantities, one);
        const auto same = [](const RobustBounds& x, const RobustBounds& y) {
            return to_json(AnalysisRecord{{}, "", 0.95, kQuantities, std::nullopt, x}).dump() ==
                   to_json(AnalysisRecord{{}, "", 0.95, kQuantities, std::nullopt, y}).dump();
        };
        line.check(same(a, b) && same(a, c), "determinism across reruns and 1/4 workers");

        const std::vector<QualityVector> head(some.begin(), some.begin() + 6);
        const auto h = analyze_over_set(rituximab(), Hyperparameters{}, head, s, kQuantities, one);
        bool monotone = true;
        for (std::size_t i = 0; i < kQuantities.size(); ++i) {
            monotone = monotone && a.bounds[i].lower <= h.bounds[i].lower && a.bounds[i].upper >= h.bounds[i].upper;
        }
        line.check(monotone, "bounds monotone under set enlargement");
    }
    report(8, "property suite", line);
}

}  // namespace

int main() {
    const auto data = testing::rituximab();
    const McmcSettings settings;
    const auto unadjusted =
        analyze_unadjusted(data, Hyperparameters{}, settings, {1.0}, {0.05, 0.025, 0.975});

    criterion_unadjusted(unadjusted);
    criterion_counts();
    criterion_vertices();

    const EnumerationConfig cfg;
    const auto d56 = run_domain("5,6", spec_for({5, 6}), cfg, unadjusted);
    {
        Line line;
        check_row(line, d56, Row{{1.462, 1.478}, {0.945, 0.955}, {0.982, 1.020}});
        report(4, "domains 5-6 bounds", line);
    }

    const auto d3 = run_domain("3", spec_for({3}), cfg, unadjusted);
    {
        Line line;
        check_row(line, d3, Row{{1.461, 1.634}, {0.945, 0.982}, {0.982, 1.159}});
        line.check(d3.seconds <= 900.0, "runtime " + fmt(d3.seconds, 0) + " s for " + std::to_string(d3.n_vectors) +
                                            " vectors on " + std::to_string(workers()) + " workers (<= 900 s)");
        report(5, "domain 3 bounds", line);
    }

    const bool full = std::getenv("ROBMETA_FULL_GRID") != nullptr && std::string(std::getenv("ROBMETA_FULL_GRID")) == "1";
    EnumerationConfig grid12 = cfg;
    if (!full) grid12.box_points_per_axis = 5;
    const auto d12 = run_domain("1,2", spec_for({1, 2}), grid12, unadjusted);
    {
        Line line;
        const Row ref{{1.328, 1.646}, {0.886, 0.983}, {0.826, 1.169}};
        if (full) {
            check_row(line, d12, ref);
            line.check(d12.seconds <= 7200.0, "runtime " + fmt(d12.seconds, 0) + " s (<= 7200 s)");
        } else {
            const auto e = d12.bound(QuantitySpec::expectation());
            const auto p = d12.bound(QuantitySpec::exceedance(1.0));
            const auto q = d12.bound(QuantitySpec::percentile(0.05));
            line.check(d12.n_vectors == 625, "5^4 grid");
            contained(line, "E", {e.lower, e.upper}, ref.mean, 0.07);
            contained(line, "P", {p.lower, p.upper}, ref.exceed, 0.07);
            contained(line, "P5", {q.lower, q.upper}, ref.p5, 0.07);
        }
        report(6, std::string("domains 1-2 bounds (") + (full ? "full grid" : "5^4 grid") + ")", line);
    }

    const auto d4 = run_domain("4", spec_for({4}), cfg, unadjusted);
    const auto dall = run_domain("all", spec_all(), cfg, unadjusted);
    {
        Line line;
        line.detail << "domain 4: ";
        check_row(line, d4, Row{{1.350, 1.476}, {0.902, 0.956}, {0.881, 1.025}});
        line.detail << "; all domains: ";
        Line all;
        check_row(all, dall, Row{{1.356, 1.638}, {0.905, 0.982}, {0.847, 1.161}});
        line.ok = line.ok && all.ok;
        line.detail << all.detail.str();
        report(7, "domain 4 and all-domain bounds", line);
    }

    criterion_properties();

    {
        Line line;
        const auto model = build_forestplot(d12.record);
        const auto& overall = model.rows.back();
        near(line, "1-2 mean lo", overall.mean_lower, 1.33, 0.05);
        near(line, "1-2 mean hi", overall.mean_upper, 1.65, 0.05);
        near(line, "unadjusted P2.5%", overall.unadjusted_lower, 0.89, 0.05);
        near(line, "1-2 lowest P2.5%", overall.lower_percentile_bound, 0.63, 0.05);
        for (const auto* run : {&d12, &d3, &d4, &d56, &dall}) {
            const double lo = run->bound(QuantitySpec::percentile(0.025)).lower;
            line.check(lo > 0.0, "domain " + run->label + " lowest P2.5%=" + fmt(lo) + " > 0");
        }
        report(9, std::string("forestplot overall row (") + (full ? "full grid" : "5^4 grid") + ")", line);
    }

    std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
