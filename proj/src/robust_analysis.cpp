#include "robmeta/robust_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "robmeta/error.hpp"

namespace robmeta {
namespace {

[[noreturn]] void fail(const std::string& message) { throw Error("robust_analysis", message); }

void add_unique(std::vector<double>& values, double v) {
    if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
}

std::string format_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

double lookup(const std::map<double, double>& table, double key, const char* what) {
    const auto it = table.find(key);
    if (it == table.end()) fail(std::string("summary has no ") + what + " at " + format_number(key));
    return it->second;
}

constexpr std::uint64_t kUnadjustedStream = ~std::uint64_t{0};

}  // namespace

void validate(const QuantitySpec& q) {
    if (q.kind == QuantitySpec::Kind::percentile && !(q.parameter > 0.0 && q.parameter < 1.0)) {
        fail("percentile level must lie in (0, 1)");
    }
    if (q.kind == QuantitySpec::Kind::exceedance && !std::isfinite(q.parameter)) {
        fail("exceedance threshold must be finite");
    }
}

std::string label(const QuantitySpec& q) {
    const std::string target = q.study ? "delta[" + std::to_string(*q.study + 1) + "]" : "mu";
    switch (q.kind) {
        case QuantitySpec::Kind::expectation: return "E(" + target + ")";
        case QuantitySpec::Kind::exceedance: return "P(" + target + " > " + format_number(q.parameter) + ")";
        case QuantitySpec::Kind::percentile:
            return "P" + format_number(q.parameter * 100.0) + "%(" + target + ")";
    }
    return "?";
}

double estimate(const PosteriorSummary& s, const QuantitySpec& q) {
    if (q.study && *q.study >= s.mean_delta.size()) fail("quantity refers to a study outside the summary");
    switch (q.kind) {
        case QuantitySpec::Kind::expectation:
            return q.study ? s.mean_delta[*q.study] : s.mean_mu;
        case QuantitySpec::Kind::exceedance:
            return lookup(q.study ? s.exceedance_delta[*q.study] : s.exceedance, q.parameter, "exceedance");
        case QuantitySpec::Kind::percentile:
            return lookup(q.study ? s.percentiles_delta[*q.study] : s.percentiles_mu, q.parameter, "percentile");
    }
    fail("unknown quantity kind");
}

QuantityBounds extract_bounds(const std::vector<PosteriorSummary>& trace, const QuantitySpec& quantity) {
    if (trace.empty()) fail("cannot bound a quantity over an empty trace");
    QuantityBounds b;
    b.quantity = quantity;
    b.lower = b.upper = estimate(trace.front(), quantity);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double v = estimate(trace[i], quantity);
        if (v < b.lower) {
            b.lower = v;
            b.lower_index = i;
        }
        if (v > b.upper) {
            b.upper = v;
            b.upper_index = i;
        }
    }
    return b;
}

std::uint64_t vector_seed(std::uint64_t master_seed, std::size_t index) noexcept {
    return derive_stream(master_seed, index);
}

std::uint64_t unadjusted_seed(std::uint64_t master_seed) noexcept {
    return derive_stream(master_seed, kUnadjustedStream);
}

RobustBounds analyze_over_set(const StudyData& data, const Hyperparameters& hyper,
                              const std::vector<QualityVector>& vectors, const McmcSettings& settings,
                              const std::vector<QuantitySpec>& quantities, const AnalysisOptions& options) {
    if (vectors.empty()) fail("the set of quality vectors is empty");
    if (quantities.empty()) fail("no quantities requested");
    validate(settings);
    validate(data);
    validate(hyper);
    for (const auto& q : vectors) validate(q, data.size());

    std::vector<double> thresholds = options.extra_thresholds;
    std::vector<double> levels = options.extra_levels;
    for (const auto& q : quantities) {
        validate(q);
        if (q.study && *q.study >= data.size()) fail("quantity refers to study " + std::to_string(*q.study + 1));
        if (q.kind == QuantitySpec::Kind::exceedance) add_unique(thresholds, q.parameter);
        if (q.kind == QuantitySpec::Kind::percentile) add_unique(levels, q.parameter);
    }

    RobustBounds result;
    result.vectors = vectors;
    result.trace.resize(vectors.size());

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex guard;
    std::vector<std::exception_ptr> errors(vectors.size());
    std::atomic<bool> abort{false};

    const auto work = [&] {
        for (;;) {
            if (abort.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= vectors.size()) return;
            try {
                McmcSettings local = settings;
                local.seed = vector_seed(settings.seed, i);
                const auto samples = run_chain(data, hyper, vectors[i], local);
                result.trace[i] = summarize(samples, thresholds, levels);
            } catch (...) {
                errors[i] = std::current_exception();
                abort.store(true);
                return;
            }
            const std::size_t finished = done.fetch_add(1) + 1;
            if (options.progress) {
                std::lock_guard lock(guard);
                options.progress(finished, vectors.size());
            }
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, vectors.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (const auto& q : quantities) result.bounds.push_back(extract_bounds(result.trace, q));
    return result;
}

PosteriorSummary analyze_unadjusted(const StudyData& data, const Hyperparameters& hyper,
                                    const McmcSettings& settings, const std::vector<double>& thresholds,
                                    const std::vector<double>& levels) {
    McmcSettings local = settings;
    local.seed = unadjusted_seed(settings.seed);
    return summarize(run_chain_unadjusted(data, hyper, local), thresholds, levels);
}

std::vector<ComparisonRow> compare_to_unadjusted(const RobustBounds& bounds, const PosteriorSummary& unadjusted,
                                                 const DecisionRule& rule) {
    std::vector<ComparisonRow> rows;
    for (const auto& b : bounds.bounds) {
        ComparisonRow row;
        row.quantity = b.quantity;
        row.lower = b.lower;
        row.upper = b.upper;
        try {
            row.unadjusted = estimate(unadjusted, b.quantity);
        } catch (const Error&) {
            fail("quantity " + label(b.quantity) + " is missing from the unadjusted summary");
        }
        row.no_bias_impact = row.lower == row.unadjusted && row.upper == row.unadjusted;
        if (b.quantity.kind == QuantitySpec::Kind::exceedance) {
            const auto meets = [&](double p) { return p >= rule.probability; };
            row.conclusion_sensitive =
                meets(row.lower) != meets(row.unadjusted) || meets(row.upper) != meets(row.unadjusted);
        } else {
            const auto above = [&](double v) { return v > rule.reference; };
            row.crosses_reference =
                above(row.lower) != above(row.unadjusted) || above(row.upper) != above(row.unadjusted);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace robmeta
