#include "robmeta/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "robmeta/error.hpp"

namespace robmeta {
namespace {

// ln(1 + e^x) without overflow.
double softplus(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

const double kLogProbFloor = std::log(kProbFloor);

double log_delta_prior_sum(const ParameterState& state, double mu, double sigma2,
                           std::span<const double> q) {
    double total = 0.0;
    for (std::size_t i = 0; i < state.delta.size(); ++i) {
        total += log_normal_density(state.delta[i], mu, sigma2 / q[i]);
    }
    return total;
}

double log_common_terms(const ParameterState& state, const StudyData& data,
                        const Hyperparameters& hyper) {
    const double var_beta = hyper.sigma_beta * hyper.sigma_beta;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        total += study_log_likelihood(data.studies[i], state.beta[i], state.delta[i]);
        total += log_normal_density(state.beta[i], hyper.mu_beta, var_beta);
    }
    total += log_normal_density(state.mu, hyper.mu_mu, hyper.sigma_mu * hyper.sigma_mu);
    total += log_inv_gamma_density(state.sigma2_theta, hyper.alpha, hyper.lambda);
    return total;
}

void check_dimensions(const ParameterState& state, const StudyData& data) {
    if (state.beta.size() != data.size() || state.delta.size() != data.size()) {
        throw Error("model_core", "parameter state dimension does not match the number of studies");
    }
}

}  // namespace

void validate(const StudyData& data) {
    if (data.studies.empty()) throw Error("model_core", "K >= 1 required (no studies)");
    for (const auto& s : data.studies) {
        const auto bad = [&](const char* what) {
            throw Error("model_core", "study '" + s.name + "': " + what);
        };
        if (s.n_control < 1 || s.n_treatment < 1) bad("arm totals must be >= 1");
        if (s.r_control < 0 || s.r_treatment < 0) bad("responder counts must be >= 0");
        if (s.r_control > s.n_control) bad("control responders exceed control total");
        if (s.r_treatment > s.n_treatment) bad("treatment responders exceed treatment total");
    }
}

void validate(const Hyperparameters& h) {
    if (!(h.sigma_beta > 0.0) || !(h.sigma_mu > 0.0) || !(h.alpha > 0.0) || !(h.lambda > 0.0)) {
        throw Error("model_core", "hyperparameter scales (sigma_beta, sigma_mu, alpha, lambda) must be > 0");
    }
    if (!std::isfinite(h.mu_beta) || !std::isfinite(h.mu_mu)) {
        throw Error("model_core", "hyperparameter locations must be finite");
    }
}

void validate(const QualityVector& q, std::size_t k) {
    if (q.size() != k) {
        throw Error("model_core", "quality vector has " + std::to_string(q.size()) +
                                      " entries, expected " + std::to_string(k));
    }
    for (double v : q.q) {
        if (!(v > 0.0 && v <= 1.0)) throw Error("model_core", "study quality outside (0, 1]");
    }
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("model_core", "logit argument must lie in (0, 1)");
    return std::log(p / (1.0 - p));
}

double inv_logit(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double arm_log_likelihood(long n, long r, double eta) noexcept {
    const double sp = softplus(eta);
    double total = 0.0;
    if (r > 0) total += static_cast<double>(r) * std::max(eta - sp, kLogProbFloor);
    if (n - r > 0) total += static_cast<double>(n - r) * std::max(-sp, kLogProbFloor);
    return total;
}

double study_log_likelihood(const StudyRecord& s, double beta, double delta) noexcept {
    return arm_log_likelihood(s.n_control, s.r_control, beta) +
           arm_log_likelihood(s.n_treatment, s.r_treatment, beta + delta);
}

double log_normal_density(double x, double mean, double variance) noexcept {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double log_inv_gamma_density(double x, double shape, double rate) noexcept {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

double log_posterior_unnorm(const ParameterState& state, const StudyData& data,
                            const Hyperparameters& hyper, const QualityVector& q) {
    check_dimensions(state, data);
    if (q.size() != data.size()) throw Error("model_core", "quality vector length mismatch");
    if (!(state.sigma2_theta > 0.0)) return -std::numeric_limits<double>::infinity();
    return log_common_terms(state, data, hyper) +
           log_delta_prior_sum(state, state.mu, state.sigma2_theta, q.q);
}

double log_posterior_unadjusted(const ParameterState& state, const StudyData& data,
                                const Hyperparameters& hyper) {
    check_dimensions(state, data);
    if (!(state.sigma2_theta > 0.0)) return -std::numeric_limits<double>::infinity();
    const std::vector<double> ones(data.size(), 1.0);
    return log_common_terms(state, data, hyper) +
           log_delta_prior_sum(state, state.mu, state.sigma2_theta, ones);
}

}  // namespace robmeta
