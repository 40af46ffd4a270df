// Convergence diagnostics for mu.
//
// Split R-hat: each chain is cut into two halves of length m = n / 2
// (a middle draw is dropped when n is odd), giving 2M sequences.
//   W     = mean of within-sequence variances (denominator m - 1)
//   B / m = variance of sequence means (denominator 2M - 1)
//   var+  = (m - 1) / m * W + B / m
//   R-hat = sqrt(var+ / W)
//
// ESS uses the M full chains:
//   rho_t = 1 - (W - mean_j acov_j(t)) / var+      (acov with denominator n)
//   tau   = -1 + 2 * sum_k P_k,   P_k = rho_{2k} + rho_{2k+1}
// where the sum stops at the first negative P_k and the P_k are forced
// non-increasing (Geyer's initial monotone sequence). ESS = M n / tau.
#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>

#include "robmeta/sampler.hpp"

namespace robmeta {
namespace {

struct Moments {
    double mean;
    double variance;  // denominator size - 1
};

Moments moments(const double* x, std::size_t size) {
    const double mean = std::accumulate(x, x + size, 0.0) / static_cast<double>(size);
    double ss = 0.0;
    for (std::size_t i = 0; i < size; ++i) ss += (x[i] - mean) * (x[i] - mean);
    return {mean, ss / static_cast<double>(size - 1)};
}

// Returns {W, var+} over the given sequences of common length m.
std::pair<double, double> variance_components(const std::vector<const double*>& seqs, std::size_t m) {
    std::vector<double> means;
    double w = 0.0;
    for (const double* s : seqs) {
        const auto mo = moments(s, m);
        means.push_back(mo.mean);
        w += mo.variance;
    }
    w /= static_cast<double>(seqs.size());
    double b_over_m = 0.0;
    if (seqs.size() > 1) {
        const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
        for (double mu : means) b_over_m += (mu - grand) * (mu - grand);
        b_over_m /= static_cast<double>(means.size() - 1);
    }
    const double md = static_cast<double>(m);
    return {w, (md - 1.0) / md * w + b_over_m};
}

}  // namespace

Diagnostics diagnostics(const std::vector<double>& draws, std::size_t n_chains, std::size_t n_samples) {
    Diagnostics out;
    if (n_chains < 1 || n_samples < 10 || draws.size() != n_chains * n_samples) return out;

    if (n_chains >= 2) {
        const std::size_t half = n_samples / 2;
        std::vector<const double*> seqs;
        for (std::size_t c = 0; c < n_chains; ++c) {
            const double* base = draws.data() + c * n_samples;
            seqs.push_back(base);
            seqs.push_back(base + (n_samples - half));
        }
        const auto [w, var_plus] = variance_components(seqs, half);
        if (w > 0.0 && std::isfinite(var_plus)) out.rhat_mu = std::sqrt(var_plus / w);
    }

    std::vector<const double*> chains;
    std::vector<double> chain_means;
    for (std::size_t c = 0; c < n_chains; ++c) {
        chains.push_back(draws.data() + c * n_samples);
        chain_means.push_back(moments(chains.back(), n_samples).mean);
    }
    const auto [w, var_plus] = variance_components(chains, n_samples);
    if (!(w > 0.0) || !std::isfinite(var_plus)) return out;

    const double n = static_cast<double>(n_samples);
    const auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t c = 0; c < n_chains; ++c) {
            const double* x = chains[c];
            const double m = chain_means[c];
            double sum = 0.0;
            for (std::size_t i = 0; i + lag < n_samples; ++i) sum += (x[i] - m) * (x[i + lag] - m);
            acov += sum / n;
        }
        acov /= static_cast<double>(n_chains);
        return 1.0 - (w - acov) / var_plus;
    };

    double pair_sum = 0.0;
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t lag = 0; lag + 1 < n_samples; lag += 2) {
        double p = rho(lag) + rho(lag + 1);
        if (p < 0.0) break;
        p = std::min(p, previous);
        previous = p;
        pair_sum += p;
    }
    const double tau = -1.0 + 2.0 * pair_sum;
    if (tau > 0.0) out.ess_mu = static_cast<double>(n_chains) * n / tau;
    return out;
}

Diagnostics diagnostics(const PosteriorSamples& samples) {
    return diagnostics(samples.mu, samples.n_chains, samples.n_samples);
}

}  // namespace robmeta
