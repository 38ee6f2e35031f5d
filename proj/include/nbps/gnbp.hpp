#ifndef NBPS_GNBP_HPP
#define NBPS_GNBP_HPP

#include <cmath>
#include <span>
#include <vector>

#include "count_matrix.hpp"
#include "kernels.hpp"
#include "mcmc.hpp"
#include "rng.hpp"
#include "sweep_common.hpp"

namespace nbps {

/// Hyperparameters of the gamma-negative binomial process model:
/// gamma0 ~ Gamma(e0, 1/f0), p_j ~ Beta(a0, b0), c ~ Gamma(c0, 1/d0).
struct GnbpHyper {
    double e0 = 0.01, f0 = 0.01;
    double a0 = 1.0, b0 = 1.0;
    double c0 = 1.0, d0 = 1.0;

    void validate() const {
        if (!(e0 > 0 && f0 > 0 && a0 > 0 && b0 > 0 && c0 > 0 && d0 > 0)) {
            throw std::invalid_argument("GnbpHyper fields must be positive");
        }
    }
};

struct GnbpState {
    double gamma0 = 1.0;
    double c = 1.0;
    double g_rest = 1.0;
    std::vector<double> p;  // per-sample NB probabilities in (0,1)
    std::vector<double> r;  // per-gene NB shapes; 0 for unexpressed genes
    // Latent table counts, stored sparsely parallel to DataStats::gene_cells.
    std::vector<std::vector<long long>> l;

    double q_dot() const {
        double s = 0.0;
        for (double v : p) s += -std::log1p(-v);
        return s;
    }
    double g_total() const {
        double s = g_rest;
        for (double v : r) s += v;
        return s;
    }
};

inline GnbpState gnbp_init(const CountMatrix& data, const DataStats& stats,
                           const GnbpHyper& hyper) {
    hyper.validate();
    GnbpState st;
    st.p.assign(data.n_samples(), 0.5);
    st.r.assign(data.n_genes(), 0.0);
    st.l.resize(data.n_genes());
    for (std::size_t k = 0; k < data.n_genes(); ++k) {
        if (stats.gene_total[k] > 0) st.r[k] = 1.0;
        st.l[k].assign(stats.gene_cells[k].size(), 1);
    }
    return st;
}

/// One sweep: gamma0; table counts and shapes per expressed gene; residual
/// mass; sample probabilities; concentration.
inline void gnbp_gibbs_sweep(GnbpState& st, const DataStats& stats, const GnbpHyper& hyper,
                             const RngHandle& chain, long sweep) {
    const auto handle = chain.derive(static_cast<std::uint64_t>(sweep));
    const double qd = st.q_dot();
    const auto k_expressed = static_cast<double>(stats.k_expressed);

    {
        auto rng = handle.derive(detail::var_gamma0).make();
        const double scale = 1.0 / (hyper.f0 + std::log((st.c + qd) / st.c));
        st.gamma0 = sample_gamma(hyper.e0 + k_expressed, scale, rng);
        detail::ensure_finite(st.gamma0, "gamma0", sweep);
    }
    for (std::size_t k = 0; k < stats.gene_cells.size(); ++k) {
        const auto& cells = stats.gene_cells[k];
        if (cells.empty()) continue;
        auto rng = handle.derive(detail::var_gene, k).make();
        long long l_total = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            st.l[k][i] = sample_crt(cells[i].second, st.r[k], rng);
            l_total += st.l[k][i];
        }
        st.r[k] = sample_gamma(static_cast<double>(l_total), 1.0 / (st.c + qd), rng);
        detail::ensure_finite(st.r[k], "r_k", sweep);
    }
    {
        auto rng = handle.derive(detail::var_rest).make();
        st.g_rest = sample_gamma(st.gamma0, 1.0 / (st.c + qd), rng);
        detail::ensure_finite(st.g_rest, "g_rest", sweep);
    }
    const double g_total = st.g_total();
    for (std::size_t j = 0; j < st.p.size(); ++j) {
        auto rng = handle.derive(detail::var_sample, j).make();
        st.p[j] = sample_beta(hyper.a0 + static_cast<double>(stats.sample_total[j]),
                              hyper.b0 + g_total, rng);
        detail::ensure_finite(st.p[j], "p_j", sweep);
    }
    {
        auto rng = handle.derive(detail::var_conc).make();
        st.c = sample_gamma(hyper.c0 + st.gamma0, 1.0 / (hyper.d0 + g_total), rng);
        detail::ensure_finite(st.c, "c", sweep);
    }
}

inline PosteriorTrace gnbp_fit(const CountMatrix& data, const GnbpHyper& hyper,
                               const McmcConfig& mcmc, const RngHandle& chain) {
    hyper.validate();
    mcmc.validate();
    data.validate();
    const DataStats stats = compute_data_stats(data);
    GnbpState st = gnbp_init(data, stats, hyper);

    PosteriorTrace trace;
    trace.model = "gnbp";
    trace.statistic = "nb_shape";
    trace.gene_ids = data.gene_ids;
    trace.expressed.resize(data.n_genes());
    for (std::size_t k = 0; k < data.n_genes(); ++k) {
        trace.expressed[k] = stats.gene_total[k] > 0;
    }

    for (long sweep = 1; sweep <= mcmc.total_sweeps(); ++sweep) {
        gnbp_gibbs_sweep(st, stats, hyper, chain, sweep);
        const bool retain = sweep > mcmc.burn_in && (sweep - mcmc.burn_in) % mcmc.thin == 0;
        trace.diagnostics.push_back({sweep, retain, st.gamma0, st.c, st.q_dot()});
        if (retain) {
            for (std::size_t k = 0; k < data.n_genes(); ++k) {
                if (trace.expressed[k]) trace.draws.push_back(st.r[k]);
            }
            trace.g_gamma0.push_back(st.gamma0);
            trace.g_c.push_back(st.c);
            trace.g_depth.push_back(st.q_dot());
            ++trace.n_draws;
        }
    }
    trace.validate();
    return trace;
}

}

#endif
