#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "robmeta/model.hpp"
#include "robmeta/rng.hpp"

namespace robmeta {

struct McmcSettings {
    std::size_t n_chains = 4;
    std::size_t n_burnin = 5000;
    std::size_t n_samples = 20000;  // retained per chain
    std::size_t thin = 1;
    std::uint64_t seed = 20210611;
    double initial_step_beta = 0.5;
    double initial_step_delta = 0.5;
    std::size_t adapt_window = 50;
    double target_accept = 0.44;
};

/// Throws robmeta::Error("sampler", ...) on invalid settings.
void validate(const McmcSettings& settings);

/// Chain-major storage: value(c, s) = data[c * n_samples + s]; per-study
/// tensors add the study as the fastest index.
struct PosteriorSamples {
    std::size_t n_chains = 0;
    std::size_t n_samples = 0;
    std::size_t n_studies = 0;
    std::vector<double> mu;
    std::vector<double> sigma2_theta;
    std::vector<double> beta;
    std::vector<double> delta;
    std::vector<double> accept_beta;   // per study, pooled over chains, post burn-in
    std::vector<double> accept_delta;
    /// Step sizes per chain (beta sites then delta sites) when burn-in ended
    /// and when the chain finished. Adaptation is frozen in between.
    std::vector<std::vector<double>> steps_after_burnin;
    std::vector<std::vector<double>> steps_final;

    double mu_at(std::size_t chain, std::size_t s) const { return mu[chain * n_samples + s]; }
    double delta_at(std::size_t chain, std::size_t s, std::size_t i) const {
        return delta[(chain * n_samples + s) * n_studies + i];
    }
    double beta_at(std::size_t chain, std::size_t s, std::size_t i) const {
        return beta[(chain * n_samples + s) * n_studies + i];
    }
    /// All retained delta_i draws, chain-major.
    std::vector<double> delta_column(std::size_t i) const;
};

struct NormalParams {
    double mean;
    double variance;
};

struct InvGammaParams {
    double shape;
    double rate;
};

/// Full conditional of mu given delta and sigma2_theta.
NormalParams mu_conditional(const ParameterState& state, const Hyperparameters& hyper,
                            const QualityVector& q);
/// Full conditional of sigma2_theta given delta and mu.
InvGammaParams sigma2_conditional(const ParameterState& state, const Hyperparameters& hyper,
                                  const QualityVector& q);

double gibbs_update_mu(const ParameterState& state, const Hyperparameters& hyper,
                       const QualityVector& q, Rng& rng);
double gibbs_update_sigma2(const ParameterState& state, const Hyperparameters& hyper,
                           const QualityVector& q, Rng& rng);

struct Site {
    enum class Kind { beta, delta };
    Kind kind;
    std::size_t study;
};

/// Log density terms that involve the site. For beta_i: the study-i
/// likelihood and the beta_i prior. For delta_i: the treatment-arm
/// likelihood and the delta_i prior.
double site_log_density(Site site, double value, const ParameterState& state,
                        const StudyData& data, const Hyperparameters& hyper,
                        const QualityVector& q);

struct SiteUpdate {
    double value;
    bool accepted;
};

/// One random-walk Metropolis step on a single site.
SiteUpdate mh_update_site(Site site, const ParameterState& state, const StudyData& data,
                          const Hyperparameters& hyper, const QualityVector& q, double step,
                          Rng& rng);

/// Knobs used by tests to run reduced versions of the sampler.
struct ChainOptions {
    bool update_beta = true;
    bool update_delta = true;
    bool update_mu = true;
    bool update_sigma2 = true;
    bool use_likelihood = true;
    /// When set, every chain starts here (no jitter) instead of the
    /// data-driven initialisation.
    std::optional<ParameterState> initial_state;
};

/// Data-driven start: empirical logits (half-count correction at 0 or N),
/// mu at mean delta, sigma2_theta at max(var delta, 0.01).
ParameterState initial_state(const StudyData& data);

PosteriorSamples run_chain(const StudyData& data, const Hyperparameters& hyper,
                           const QualityVector& q, const McmcSettings& settings,
                           const ChainOptions& options = {});

/// Same sampler for the model without bias adjustment. Kept as a separate
/// code path so the adjusted sampler at q = 1 can be checked against it.
PosteriorSamples run_chain_unadjusted(const StudyData& data, const Hyperparameters& hyper,
                                      const McmcSettings& settings);

struct Diagnostics {
    std::optional<double> rhat_mu;  // empty when unavailable
    std::optional<double> ess_mu;
};

Diagnostics diagnostics(const PosteriorSamples& samples);

/// Split R-hat and ESS of an arbitrary chain-major matrix.
Diagnostics diagnostics(const std::vector<double>& draws, std::size_t n_chains,
                        std::size_t n_samples);

struct PosteriorSummary {
    double mean_mu = 0.0;
    std::map<double, double> exceedance;              // threshold -> P(mu > t)
    std::map<double, double> percentiles_mu;          // level -> quantile
    std::vector<double> mean_delta;
    std::vector<std::map<double, double>> exceedance_delta;
    std::vector<std::map<double, double>> percentiles_delta;
    std::optional<double> ess_mu;
    std::optional<double> rhat_mu;
};

/// Empirical quantile with linear interpolation between order statistics
/// (h = (n - 1) p, type 7). `values` is reordered.
double quantile_type7(std::vector<double>& values, double level);

PosteriorSummary summarize(const PosteriorSamples& samples, const std::vector<double>& thresholds,
                           const std::vector<double>& levels);

}  // namespace robmeta
