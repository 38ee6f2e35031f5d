#ifndef NBPS_BNBP_HPP
#define NBPS_BNBP_HPP

#include <cmath>
#include <vector>

#include "count_matrix.hpp"
#include "kernels.hpp"
#include "mcmc.hpp"
#include "rng.hpp"
#include "sweep_common.hpp"

namespace nbps {

/// Hyperparameters of the beta-negative binomial process model:
/// gamma0 ~ Gamma(e0, 1/f0), r_j ~ Gamma(a0, 1/b0), c ~ Gamma(c0, 1/d0).
struct BnbpHyper {
    double e0 = 0.01, f0 = 0.01;
    double a0 = 1.0, b0 = 1.0;
    double c0 = 1.0, d0 = 1.0;

    void validate() const {
        if (!(e0 > 0 && f0 > 0 && a0 > 0 && b0 > 0 && c0 > 0 && d0 > 0)) {
            throw std::invalid_argument("BnbpHyper fields must be positive");
        }
    }
};

struct BnbpState {
    double gamma0 = 1.0;
    double c = 1.0;
    double p_star = 1.0;    // -sum(ln(1-p)) mass of the continuous part
    std::vector<double> p;  // per-gene NB probabilities; 0 for unexpressed genes
    std::vector<double> r;  // per-sample NB shapes
    std::vector<std::vector<long long>> l;  // sparse, parallel to DataStats::gene_cells

    double r_dot() const {
        double s = 0.0;
        for (double v : r) s += v;
        return s;
    }
};

inline BnbpState bnbp_init(const CountMatrix& data, const DataStats& stats,
                           const BnbpHyper& hyper) {
    hyper.validate();
    BnbpState st;
    st.p.assign(data.n_genes(), 0.0);
    st.r.assign(data.n_samples(), 1.0);
    st.l.resize(data.n_genes());
    for (std::size_t k = 0; k < data.n_genes(); ++k) {
        st.l[k].assign(stats.gene_cells[k].size(), 1);
    }
    return st;
}

/// Independence-chain MH update of the concentration parameter: propose from
/// the prior and accept on the ratio of the c-dependent factor of the
/// marginal matrix likelihood (the expressed columns contribute Beta-function
/// terms, the continuous part the digamma exponential). Returns whether the
/// proposal was accepted.
inline bool bnbp_update_c(BnbpState& st, const DataStats& stats, const BnbpHyper& hyper,
                          Rng& rng) {
    const double rd = st.r_dot();
    auto log_factor = [&](double c_value) {
        double lp = -st.gamma0 * (digamma(c_value + rd) - digamma(c_value));
        const double lg_a = log_gamma(c_value + rd);
        for (std::size_t k = 0; k < stats.gene_total.size(); ++k) {
            const long long total = stats.gene_total[k];
            if (total == 0) continue;
            lp += lg_a - log_gamma(static_cast<double>(total) + c_value + rd);
        }
        return lp;
    };
    const double proposal = sample_gamma(hyper.c0, 1.0 / hyper.d0, rng);
    const double log_ratio = log_factor(proposal) - log_factor(st.c);
    if (log_ratio >= 0.0 || std::log(rng.uniform_pos()) < log_ratio) {
        st.c = proposal;
        return true;
    }
    return false;
}

/// One sweep: gamma0; gene probabilities; continuous-part mass; table
/// counts; sample shapes; then the MH step on c unless frozen.
inline void bnbp_gibbs_sweep(BnbpState& st, const DataStats& stats, const BnbpHyper& hyper,
                             const RngHandle& chain, long sweep, bool freeze_c = false) {
    const auto handle = chain.derive(static_cast<std::uint64_t>(sweep));
    const double rd = st.r_dot();
    const auto k_expressed = static_cast<double>(stats.k_expressed);

    {
        auto rng = handle.derive(detail::var_gamma0).make();
        const double scale = 1.0 / (hyper.f0 + digamma(st.c + rd) - digamma(st.c));
        st.gamma0 = sample_gamma(hyper.e0 + k_expressed, scale, rng);
        detail::ensure_finite(st.gamma0, "gamma0", sweep);
    }
    for (std::size_t k = 0; k < stats.gene_total.size(); ++k) {
        if (stats.gene_total[k] == 0) continue;  // probability pinned at zero
        auto rng = handle.derive(detail::var_gene, k).make();
        st.p[k] = sample_beta(static_cast<double>(stats.gene_total[k]), st.c + rd, rng);
        detail::ensure_finite(st.p[k], "p_k", sweep);
    }
    {
        auto rng = handle.derive(detail::var_pstar).make();
        st.p_star = sample_logbeta({st.gamma0, st.c + rd}, rng);
        detail::ensure_finite(st.p_star, "p_star", sweep);
    }
    std::vector<long long> l_by_sample(st.r.size(), 0);
    for (std::size_t k = 0; k < stats.gene_cells.size(); ++k) {
        const auto& cells = stats.gene_cells[k];
        if (cells.empty()) continue;
        auto rng = handle.derive(detail::var_crt, k).make();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            st.l[k][i] = sample_crt(cells[i].second, st.r[cells[i].first], rng);
            l_by_sample[cells[i].first] += st.l[k][i];
        }
    }
    double ln_term = 0.0;
    for (std::size_t k = 0; k < st.p.size(); ++k) {
        if (stats.gene_total[k] > 0) ln_term += -std::log1p(-st.p[k]);
    }
    detail::ensure_finite(ln_term, "ln(1-p_k)", sweep);
    for (std::size_t j = 0; j < st.r.size(); ++j) {
        auto rng = handle.derive(detail::var_sample, j).make();
        st.r[j] = sample_gamma(hyper.a0 + static_cast<double>(l_by_sample[j]),
                               1.0 / (hyper.b0 + st.p_star + ln_term), rng);
        detail::ensure_finite(st.r[j], "r_j", sweep);
    }
    if (!freeze_c) {
        auto rng = handle.derive(detail::var_mh).make();
        bnbp_update_c(st, stats, hyper, rng);
        detail::ensure_finite(st.c, "c", sweep);
    }
}

inline PosteriorTrace bnbp_fit(const CountMatrix& data, const BnbpHyper& hyper,
                               const McmcConfig& mcmc, const RngHandle& chain) {
    hyper.validate();
    mcmc.validate();
    data.validate();
    const DataStats stats = compute_data_stats(data);
    BnbpState st = bnbp_init(data, stats, hyper);

    PosteriorTrace trace;
    trace.model = "bnbp";
    trace.statistic = "odds";
    trace.gene_ids = data.gene_ids;
    trace.expressed.resize(data.n_genes());
    for (std::size_t k = 0; k < data.n_genes(); ++k) {
        trace.expressed[k] = stats.gene_total[k] > 0;
    }

    for (long sweep = 1; sweep <= mcmc.total_sweeps(); ++sweep) {
        bnbp_gibbs_sweep(st, stats, hyper, chain, sweep, mcmc.freeze_c);
        const bool retain = sweep > mcmc.burn_in && (sweep - mcmc.burn_in) % mcmc.thin == 0;
        trace.diagnostics.push_back({sweep, retain, st.gamma0, st.c, st.r_dot()});
        if (retain) {
            for (std::size_t k = 0; k < data.n_genes(); ++k) {
                if (trace.expressed[k]) trace.draws.push_back(st.p[k] / (1.0 - st.p[k]));
            }
            trace.g_gamma0.push_back(st.gamma0);
            trace.g_c.push_back(st.c);
            trace.g_depth.push_back(st.r_dot());
            ++trace.n_draws;
        }
    }
    trace.validate();
    return trace;
}

}

#endif
