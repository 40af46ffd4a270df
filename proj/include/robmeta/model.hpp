#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace robmeta {

/// Arm counts for one two-arm trial. Arm 1 is control, arm 2 treatment.
struct StudyRecord {
    std::string name;
    long n_control = 0;
    long r_control = 0;
    long n_treatment = 0;
    long r_treatment = 0;

    bool operator==(const StudyRecord&) const = default;
};

struct StudyData {
    std::vector<StudyRecord> studies;

    std::size_t size() const noexcept { return studies.size(); }
    bool operator==(const StudyData&) const = default;
};

/// Throws robmeta::Error naming the offending study when counts are
/// inconsistent or the list is empty.
void validate(const StudyData& data);

/// Prior hyperparameters: beta_i ~ N(mu_beta, sigma_beta^2),
/// mu ~ N(mu_mu, sigma_mu^2), sigma2_theta ~ InvGamma(alpha, lambda).
struct Hyperparameters {
    double mu_beta = 0.0;
    double sigma_beta = 10.0;
    double mu_mu = 0.0;
    double sigma_mu = 10.0;
    double alpha = 0.01;
    double lambda = 0.01;
};

void validate(const Hyperparameters& hyper);

struct ParameterState {
    std::vector<double> beta;   // control-arm log-odds
    std::vector<double> delta;  // study-specific log odds ratio
    double mu = 0.0;
    double sigma2_theta = 1.0;
};

/// Study qualities q_i in (0, 1]. The prior of delta_i has variance
/// sigma2_theta / q_i.
struct QualityVector {
    std::vector<double> q;

    static QualityVector ones(std::size_t k) { return {std::vector<double>(k, 1.0)}; }
    std::size_t size() const noexcept { return q.size(); }
    bool operator==(const QualityVector&) const = default;
};

void validate(const QualityVector& q, std::size_t k);

double logit(double p);
double inv_logit(double x) noexcept;

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before logs.
inline constexpr double kProbFloor = 1e-15;

/// r ln p + (n - r) ln(1 - p) with p = inv_logit(eta), binomial coefficient
/// omitted.
double arm_log_likelihood(long n, long r, double eta) noexcept;

double study_log_likelihood(const StudyRecord& record, double beta, double delta) noexcept;

double log_normal_density(double x, double mean, double variance) noexcept;

/// ln of the InvGamma(shape, rate) density, x^(-shape-1) exp(-rate/x).
double log_inv_gamma_density(double x, double shape, double rate) noexcept;

/// Unnormalised log posterior of the bias-adjusted model. Returns -inf when
/// sigma2_theta <= 0.
double log_posterior_unnorm(const ParameterState& state, const StudyData& data,
                            const Hyperparameters& hyper, const QualityVector& q);

/// Same density for the model without bias adjustment (delta_i variance
/// sigma2_theta).
double log_posterior_unadjusted(const ParameterState& state, const StudyData& data,
                                const Hyperparameters& hyper);

}  // namespace robmeta
