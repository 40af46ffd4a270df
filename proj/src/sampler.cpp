#include "robmeta/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robmeta/error.hpp"

namespace robmeta {
namespace {

struct AdjustedWeights {
    const std::vector<double>& q;
    double operator()(std::size_t i) const { return q[i]; }
};

// Unadjusted model: delta_i | mu, sigma2 ~ N(mu, sigma2).
struct UnitWeights {
    double operator()(std::size_t) const { return 1.0; }
};

template <class Weights>
NormalParams mu_conditional_impl(std::span<const double> delta, double sigma2,
                                 const Hyperparameters& hyper, Weights weight) {
    const double prior_var = hyper.sigma_mu * hyper.sigma_mu;
    double precision = 1.0 / prior_var;
    double shift = hyper.mu_mu / prior_var;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        precision += weight(i) / sigma2;
        shift += weight(i) * delta[i] / sigma2;
    }
    const double variance = 1.0 / precision;
    return {variance * shift, variance};
}

template <class Weights>
InvGammaParams sigma2_conditional_impl(std::span<const double> delta, double mu,
                                       const Hyperparameters& hyper, Weights weight) {
    double ss = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double r = delta[i] - mu;
        ss += weight(i) * r * r;
    }
    return {hyper.alpha + 0.5 * static_cast<double>(delta.size()), hyper.lambda + 0.5 * ss};
}

double draw(const NormalParams& p, Rng& rng) { return p.mean + std::sqrt(p.variance) * rng.normal(); }
double draw(const InvGammaParams& p, Rng& rng) { return p.rate / rng.gamma(p.shape); }

double corrected_proportion(long n, long r) {
    if (r == 0 || r == n) return (static_cast<double>(r) + 0.5) / (static_cast<double>(n) + 1.0);
    return static_cast<double>(r) / static_cast<double>(n);
}

void check_state(const ParameterState& state, std::size_t k) {
    if (state.beta.size() != k || state.delta.size() != k) {
        throw Error("sampler", "parameter state dimension does not match the number of studies");
    }
}

// One chain of Metropolis-within-Gibbs. Arm log-likelihoods of the current
// state are cached so each MH step evaluates only the proposal.
template <class Weights>
void run_single_chain(const StudyData& data, const Hyperparameters& hyper, Weights weight,
                      const McmcSettings& settings, const ChainOptions& options,
                      std::size_t chain, PosteriorSamples& out, std::vector<long>& accepted_beta,
                      std::vector<long>& accepted_delta) {
    const std::size_t k = data.size();
    Rng rng(derive_stream(settings.seed, chain));

    ParameterState state;
    if (options.initial_state) {
        state = *options.initial_state;
        check_state(state, k);
    } else {
        state = initial_state(data);
        for (auto& b : state.beta) b += 0.1 * rng.normal();
        for (auto& d : state.delta) d += 0.1 * rng.normal();
        state.mu += 0.1 * rng.normal();
    }

    const auto arm = [&](long n, long r, double eta) {
        return options.use_likelihood ? arm_log_likelihood(n, r, eta) : 0.0;
    };
    std::vector<double> ll_control(k), ll_treatment(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& s = data.studies[i];
        ll_control[i] = arm(s.n_control, s.r_control, state.beta[i]);
        ll_treatment[i] = arm(s.n_treatment, s.r_treatment, state.beta[i] + state.delta[i]);
    }

    std::vector<double> log_step(2 * k);
    for (std::size_t i = 0; i < k; ++i) {
        log_step[i] = std::log(settings.initial_step_beta);
        log_step[k + i] = std::log(settings.initial_step_delta);
    }
    std::vector<long> window_accepts(2 * k, 0);
    std::size_t window_index = 0;

    const double var_beta = hyper.sigma_beta * hyper.sigma_beta;
    const std::size_t total = settings.n_burnin + settings.n_samples * settings.thin;
    std::size_t stored = 0;

    for (std::size_t iter = 0; iter < total; ++iter) {
        const bool burnin = iter < settings.n_burnin;

        if (options.update_beta) {
            for (std::size_t i = 0; i < k; ++i) {
                const auto& s = data.studies[i];
                const double current = state.beta[i];
                const double proposal = current + std::exp(log_step[i]) * rng.normal();
                const double llc = arm(s.n_control, s.r_control, proposal);
                const double llt = arm(s.n_treatment, s.r_treatment, proposal + state.delta[i]);
                const double dc = current - hyper.mu_beta;
                const double dp = proposal - hyper.mu_beta;
                const double log_ratio = (llc + llt) - (ll_control[i] + ll_treatment[i]) -
                                         0.5 * (dp * dp - dc * dc) / var_beta;
                if (std::log(rng.uniform()) < log_ratio) {
                    state.beta[i] = proposal;
                    ll_control[i] = llc;
                    ll_treatment[i] = llt;
                    ++window_accepts[i];
                    if (!burnin) ++accepted_beta[i];
                }
            }
        }

        if (options.update_delta) {
            for (std::size_t i = 0; i < k; ++i) {
                const auto& s = data.studies[i];
                const double current = state.delta[i];
                const double proposal = current + std::exp(log_step[k + i]) * rng.normal();
                const double llt = arm(s.n_treatment, s.r_treatment, state.beta[i] + proposal);
                const double precision = weight(i) / state.sigma2_theta;
                const double dc = current - state.mu;
                const double dp = proposal - state.mu;
                const double log_ratio =
                    (llt - ll_treatment[i]) - 0.5 * precision * (dp * dp - dc * dc);
                if (std::log(rng.uniform()) < log_ratio) {
                    state.delta[i] = proposal;
                    ll_treatment[i] = llt;
                    ++window_accepts[k + i];
                    if (!burnin) ++accepted_delta[i];
                }
            }
        }

        if (options.update_mu) {
            state.mu = draw(mu_conditional_impl(state.delta, state.sigma2_theta, hyper, weight), rng);
        }
        if (options.update_sigma2) {
            state.sigma2_theta = draw(sigma2_conditional_impl(state.delta, state.mu, hyper, weight), rng);
        }

        if (burnin) {
            if ((iter + 1) % settings.adapt_window == 0) {
                ++window_index;
                const double gain = 1.0 / std::sqrt(static_cast<double>(window_index));
                for (std::size_t j = 0; j < 2 * k; ++j) {
                    const double rate = static_cast<double>(window_accepts[j]) /
                                        static_cast<double>(settings.adapt_window);
                    log_step[j] += gain * (rate - settings.target_accept);
                    window_accepts[j] = 0;
                }
            }
            if (iter + 1 == settings.n_burnin) {
                out.steps_after_burnin[chain].resize(2 * k);
                for (std::size_t j = 0; j < 2 * k; ++j) out.steps_after_burnin[chain][j] = std::exp(log_step[j]);
            }
            continue;
        }

        if ((iter - settings.n_burnin + 1) % settings.thin != 0) continue;
        const std::size_t slot = chain * settings.n_samples + stored;
        out.mu[slot] = state.mu;
        out.sigma2_theta[slot] = state.sigma2_theta;
        std::copy(state.beta.begin(), state.beta.end(), out.beta.begin() + slot * k);
        std::copy(state.delta.begin(), state.delta.end(), out.delta.begin() + slot * k);
        ++stored;
    }

    if (settings.n_burnin == 0) {
        out.steps_after_burnin[chain].resize(2 * k);
        for (std::size_t j = 0; j < 2 * k; ++j) out.steps_after_burnin[chain][j] = std::exp(log_step[j]);
    }
    out.steps_final[chain].resize(2 * k);
    for (std::size_t j = 0; j < 2 * k; ++j) out.steps_final[chain][j] = std::exp(log_step[j]);
}

template <class Weights>
PosteriorSamples run_chains(const StudyData& data, const Hyperparameters& hyper, Weights weight,
                            const McmcSettings& settings, const ChainOptions& options) {
    validate(settings);
    const std::size_t k = data.size();
    PosteriorSamples out;
    out.n_chains = settings.n_chains;
    out.n_samples = settings.n_samples;
    out.n_studies = k;
    const std::size_t n = settings.n_chains * settings.n_samples;
    out.mu.resize(n);
    out.sigma2_theta.resize(n);
    out.beta.resize(n * k);
    out.delta.resize(n * k);
    out.steps_after_burnin.resize(settings.n_chains);
    out.steps_final.resize(settings.n_chains);

    std::vector<long> accepted_beta(k, 0), accepted_delta(k, 0);
    for (std::size_t c = 0; c < settings.n_chains; ++c) {
        run_single_chain(data, hyper, weight, settings, options, c, out, accepted_beta, accepted_delta);
    }
    const double iterations = static_cast<double>(settings.n_chains * settings.n_samples * settings.thin);
    out.accept_beta.resize(k);
    out.accept_delta.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.accept_beta[i] = static_cast<double>(accepted_beta[i]) / iterations;
        out.accept_delta[i] = static_cast<double>(accepted_delta[i]) / iterations;
    }
    return out;
}

}  // namespace

void validate(const McmcSettings& s) {
    const auto fail = [](const char* what) { throw Error("sampler", what); };
    if (s.n_chains < 1) fail("n_chains must be >= 1");
    if (s.n_samples < 1) fail("n_samples must be >= 1");
    if (s.thin < 1) fail("thin must be >= 1");
    if (s.adapt_window < 1) fail("adapt_window must be >= 1");
    if (!(s.target_accept > 0.0 && s.target_accept < 1.0)) fail("target_accept must lie in (0, 1)");
    if (!(s.initial_step_beta > 0.0) || !(s.initial_step_delta > 0.0)) fail("initial step sizes must be > 0");
}

std::vector<double> PosteriorSamples::delta_column(std::size_t i) const {
    std::vector<double> column(n_chains * n_samples);
    for (std::size_t j = 0; j < column.size(); ++j) column[j] = delta[j * n_studies + i];
    return column;
}

NormalParams mu_conditional(const ParameterState& state, const Hyperparameters& hyper,
                            const QualityVector& q) {
    return mu_conditional_impl(state.delta, state.sigma2_theta, hyper, AdjustedWeights{q.q});
}

InvGammaParams sigma2_conditional(const ParameterState& state, const Hyperparameters& hyper,
                                  const QualityVector& q) {
    return sigma2_conditional_impl(state.delta, state.mu, hyper, AdjustedWeights{q.q});
}

double gibbs_update_mu(const ParameterState& state, const Hyperparameters& hyper,
                       const QualityVector& q, Rng& rng) {
    return draw(mu_conditional(state, hyper, q), rng);
}

double gibbs_update_sigma2(const ParameterState& state, const Hyperparameters& hyper,
                           const QualityVector& q, Rng& rng) {
    return draw(sigma2_conditional(state, hyper, q), rng);
}

double site_log_density(Site site, double value, const ParameterState& state,
                        const StudyData& data, const Hyperparameters& hyper,
                        const QualityVector& q) {
    const auto& s = data.studies.at(site.study);
    const std::size_t i = site.study;
    if (site.kind == Site::Kind::beta) {
        return study_log_likelihood(s, value, state.delta[i]) +
               log_normal_density(value, hyper.mu_beta, hyper.sigma_beta * hyper.sigma_beta);
    }
    return arm_log_likelihood(s.n_treatment, s.r_treatment, state.beta[i] + value) +
           log_normal_density(value, state.mu, state.sigma2_theta / q.q[i]);
}

SiteUpdate mh_update_site(Site site, const ParameterState& state, const StudyData& data,
                          const Hyperparameters& hyper, const QualityVector& q, double step,
                          Rng& rng) {
    if (!(step > 0.0)) throw Error("sampler", "MH step size must be > 0");
    const double current =
        site.kind == Site::Kind::beta ? state.beta.at(site.study) : state.delta.at(site.study);
    const double proposal = current + step * rng.normal();
    const double log_ratio = site_log_density(site, proposal, state, data, hyper, q) -
                             site_log_density(site, current, state, data, hyper, q);
    if (std::log(rng.uniform()) < log_ratio) return {proposal, true};
    return {current, false};
}

ParameterState initial_state(const StudyData& data) {
    const std::size_t k = data.size();
    ParameterState state;
    state.beta.resize(k);
    state.delta.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& s = data.studies[i];
        state.beta[i] = logit(corrected_proportion(s.n_control, s.r_control));
        state.delta[i] = logit(corrected_proportion(s.n_treatment, s.r_treatment)) - state.beta[i];
    }
    if (k == 0) return state;
    state.mu = std::accumulate(state.delta.begin(), state.delta.end(), 0.0) / static_cast<double>(k);
    double ss = 0.0;
    for (double d : state.delta) ss += (d - state.mu) * (d - state.mu);
    const double variance = k > 1 ? ss / static_cast<double>(k - 1) : 0.0;
    state.sigma2_theta = std::max(variance, 0.01);
    return state;
}

PosteriorSamples run_chain(const StudyData& data, const Hyperparameters& hyper,
                           const QualityVector& q, const McmcSettings& settings,
                           const ChainOptions& options) {
    validate(data);
    validate(hyper);
    validate(q, data.size());
    return run_chains(data, hyper, AdjustedWeights{q.q}, settings, options);
}

PosteriorSamples run_chain_unadjusted(const StudyData& data, const Hyperparameters& hyper,
                                      const McmcSettings& settings) {
    validate(data);
    validate(hyper);
    return run_chains(data, hyper, UnitWeights{}, settings, ChainOptions{});
}

double quantile_type7(std::vector<double>& values, double level) {
    if (values.empty()) throw Error("sampler", "quantile of an empty sample");
    if (!(level >= 0.0 && level <= 1.0)) throw Error("sampler", "quantile level must lie in [0, 1]");
    const double h = static_cast<double>(values.size() - 1) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double x_lo = values[lo];
    if (lo + 1 >= values.size()) return x_lo;
    const double x_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
}

namespace {

struct Marginal {
    double mean;
    std::map<double, double> exceedance;
    std::map<double, double> percentiles;
};

Marginal summarize_marginal(std::vector<double> values, const std::vector<double>& thresholds,
                            const std::vector<double>& levels) {
    Marginal m;
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    for (double t : thresholds) {
        const auto above = std::count_if(values.begin(), values.end(), [t](double v) { return v > t; });
        m.exceedance[t] = static_cast<double>(above) / static_cast<double>(values.size());
    }
    for (double level : levels) m.percentiles[level] = quantile_type7(values, level);
    return m;
}

}  // namespace

PosteriorSummary summarize(const PosteriorSamples& samples, const std::vector<double>& thresholds,
                           const std::vector<double>& levels) {
    if (samples.mu.empty()) throw Error("sampler", "cannot summarise an empty sample");
    PosteriorSummary summary;
    auto mu = summarize_marginal(samples.mu, thresholds, levels);
    summary.mean_mu = mu.mean;
    summary.exceedance = std::move(mu.exceedance);
    summary.percentiles_mu = std::move(mu.percentiles);
    for (std::size_t i = 0; i < samples.n_studies; ++i) {
        auto d = summarize_marginal(samples.delta_column(i), thresholds, levels);
        summary.mean_delta.push_back(d.mean);
        summary.exceedance_delta.push_back(std::move(d.exceedance));
        summary.percentiles_delta.push_back(std::move(d.percentiles));
    }
    const auto diag = diagnostics(samples);
    summary.ess_mu = diag.ess_mu;
    summary.rhat_mu = diag.rhat_mu;
    return summary;
}

}  // namespace robmeta
