#pragma once

#include <cmath>
#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "robmeta/model.hpp"
#include "robmeta/sampler.hpp"

namespace robmeta::testing {

inline StudyData rituximab() {
    return StudyData{{{"REFLEX", 201, 10, 298, 80},
                      {"WA16291", 40, 5, 40, 17},
                      {"DANCER", 122, 16, 122, 41},
                      {"SERENE", 172, 16, 170, 44}}};
}

struct Moments {
    double mass;
    double mean;
    double variance;
};

/// Moments of exp(log_density) on [lo, hi] by composite Simpson. The log
/// density is shifted by its maximum on the grid before exponentiating.
inline Moments quadrature_moments(const std::function<double(double)>& log_density, double lo, double hi,
                                  int intervals = 20000) {
    const double h = (hi - lo) / intervals;
    std::vector<double> logs(intervals + 1);
    double peak = -INFINITY;
    for (int i = 0; i <= intervals; ++i) {
        logs[i] = log_density(lo + i * h);
        peak = std::max(peak, logs[i]);
    }
    double m0 = 0, m1 = 0, m2 = 0;
    for (int i = 0; i <= intervals; ++i) {
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double x = lo + i * h;
        const double f = w * std::exp(logs[i] - peak);
        m0 += f;
        m1 += f * x;
        m2 += f * x * x;
    }
    const double mean = m1 / m0;
    return {m0 * h / 3.0, mean, m2 / m0 - mean * mean};
}

/// Random (state, hyper, q) for conditional checks.
struct Fixture {
    ParameterState state;
    Hyperparameters hyper;
    QualityVector q;
};

inline Fixture random_fixture(std::mt19937_64& gen, std::size_t k) {
    std::uniform_real_distribution<double> coord(-3.0, 3.0);
    std::uniform_real_distribution<double> quality(0.1, 1.0);
    std::uniform_real_distribution<double> log_scale(std::log(0.02), std::log(5.0));
    Fixture f;
    for (std::size_t i = 0; i < k; ++i) {
        f.state.beta.push_back(coord(gen));
        f.state.delta.push_back(coord(gen));
        f.q.q.push_back(quality(gen));
    }
    f.state.mu = coord(gen);
    f.state.sigma2_theta = std::exp(log_scale(gen));
    f.hyper.mu_mu = coord(gen);
    f.hyper.sigma_mu = std::exp(log_scale(gen)) * 4.0;
    f.hyper.alpha = std::exp(log_scale(gen));
    f.hyper.lambda = std::exp(log_scale(gen));
    return f;
}

inline StudyData dummy_data(std::size_t k) {
    StudyData d;
    for (std::size_t i = 0; i < k; ++i) d.studies.push_back({"s" + std::to_string(i), 20, 5, 20, 9});
    return d;
}

// Moments of mu under the unnormalised posterior, everything else held fixed.
inline Moments mu_quadrature(const Fixture& f, const StudyData& data) {
    const auto n = mu_conditional(f.state, f.hyper, f.q);  // only used to centre the grid
    const double width = 12.0 * std::sqrt(n.variance);
    return quadrature_moments(
        [&](double mu) {
            auto s = f.state;
            s.mu = mu;
            return log_posterior_unnorm(s, data, f.hyper, f.q);
        },
        n.mean - width, n.mean + width);
}

// Moments of the precision tau = 1 / sigma2 under the unnormalised posterior.
// Integrated over u = log tau, where the integrand is smooth even when the
// shape is below one; the trapezoid rule is very accurate for such tails.
inline Moments precision_quadrature(const Fixture& f, const StudyData& data) {
    const auto logp = [&](double u) {
        auto s = f.state;
        s.sigma2_theta = std::exp(-u);
        // density in sigma2, times |d sigma2 / du| = exp(-u)
        return log_posterior_unnorm(s, data, f.hyper, f.q) - u;
    };
    const double lo = -60.0, hi = 40.0;
    const int n = 400000;
    const double h = (hi - lo) / n;
    double peak = -INFINITY;
    for (int i = 0; i <= n; ++i) peak = std::max(peak, logp(lo + i * h));
    double m0 = 0, m1 = 0, m2 = 0;
    for (int i = 0; i <= n; ++i) {
        const double u = lo + i * h;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        const double p = w * std::exp(logp(u) - peak);
        const double tau = std::exp(u);
        m0 += p;
        m1 += p * tau;
        m2 += p * tau * tau;
    }
    const double mean = m1 / m0;
    return {m0 * h, mean, m2 / m0 - mean * mean};
}

}  // namespace robmeta::testing
