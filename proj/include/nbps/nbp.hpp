#ifndef NBPS_NBP_HPP
#define NBPS_NBP_HPP

#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "count_matrix.hpp"
#include "kernels.hpp"
#include "mcmc.hpp"
#include "rng.hpp"
#include "sweep_common.hpp"

namespace nbps {

/// Hyperparameters of the (scaled) negative binomial process model:
/// gamma0 ~ Gamma(e0, 1/f0), c ~ Gamma(c0, 1/d0), q_j ~ Gamma(a0, 1/b0).
/// With scaled=false every q_j is pinned at one.
struct NbpHyper {
    double e0 = 0.01, f0 = 0.01;
    double a0 = 1.0, b0 = 1.0;
    double c0 = 1.0, d0 = 1.0;
    bool scaled = true;

    void validate() const {
        if (!(e0 > 0 && f0 > 0 && a0 > 0 && b0 > 0 && c0 > 0 && d0 > 0)) {
            throw std::invalid_argument("NbpHyper fields must be positive");
        }
    }
};

struct NbpState {
    double gamma0 = 1.0;
    double c = 1.0;
    double g_rest = 1.0;        // mass of the gamma process off the expressed atoms
    std::vector<double> q;      // per-sample scaling factors
    std::vector<double> r;      // per-gene rates; exactly 0 for unexpressed genes

    double q_dot() const {
        double s = 0.0;
        for (double v : q) s += v;
        return s;
    }
    double g_total() const {
        double s = g_rest;
        for (double v : r) s += v;
        return s;
    }
};

inline NbpState nbp_init(const CountMatrix& data, const NbpHyper& hyper) {
    hyper.validate();
    NbpState st;
    st.q.assign(data.n_samples(), 1.0);
    st.r.assign(data.n_genes(), 0.0);
    return st;
}

/// One full-conditional sweep: gamma0, gene rates, residual mass, sample
/// scales (scaled mode only), concentration -- in that order.
inline void nbp_gibbs_sweep(NbpState& st, const DataStats& stats, const NbpHyper& hyper,
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
    for (std::size_t k = 0; k < stats.gene_total.size(); ++k) {
        if (stats.gene_total[k] == 0) continue;  // rate pinned at zero
        auto rng = handle.derive(detail::var_gene, k).make();
        st.r[k] = sample_gamma(static_cast<double>(stats.gene_total[k]), 1.0 / (st.c + qd), rng);
        detail::ensure_finite(st.r[k], "r_k", sweep);
    }
    {
        auto rng = handle.derive(detail::var_rest).make();
        st.g_rest = sample_gamma(st.gamma0, 1.0 / (st.c + qd), rng);
        detail::ensure_finite(st.g_rest, "g_rest", sweep);
    }
    const double g_total = st.g_total();
    if (hyper.scaled) {
        for (std::size_t j = 0; j < st.q.size(); ++j) {
            auto rng = handle.derive(detail::var_sample, j).make();
            st.q[j] = sample_gamma(hyper.a0 + static_cast<double>(stats.sample_total[j]),
                                   1.0 / (hyper.b0 + g_total), rng);
            detail::ensure_finite(st.q[j], "q_j", sweep);
        }
    } else {
        std::fill(st.q.begin(), st.q.end(), 1.0);
    }
    {
        auto rng = handle.derive(detail::var_conc).make();
        st.c = sample_gamma(hyper.c0 + st.gamma0, 1.0 / (hyper.d0 + g_total), rng);
        detail::ensure_finite(st.c, "c", sweep);
    }
}

namespace detail {

inline std::string numbered_id(const char* prefix, std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%s%04zu", prefix, i + 1);
    return buf;
}

inline CountMatrix matrix_from_columns(std::size_t n_samples,
                                       const std::vector<std::vector<long long>>& columns) {
    CountMatrix m;
    for (std::size_t j = 0; j < n_samples; ++j) m.sample_ids.push_back(numbered_id("s", j));
    for (std::size_t k = 0; k < columns.size(); ++k) m.gene_ids.push_back(numbered_id("g", k));
    m.counts.assign(n_samples * columns.size(), 0);
    for (std::size_t k = 0; k < columns.size(); ++k) {
        for (std::size_t j = 0; j < n_samples; ++j) m(j, k) = columns[k][j];
    }
    return m;
}

}

/// Draws a random count matrix column by column: a Poisson number of i.i.d.
/// logarithmic-multinomial columns.
inline CountMatrix nbp_generate_columnwise(double gamma0, double c, std::span<const double> q,
                                           Rng& rng) {
    if (!(gamma0 > 0 && c > 0)) {
        throw std::domain_error("nbp_generate_columnwise requires positive gamma0 and c");
    }
    double qd = 0.0;
    for (double v : q) qd += v;
    const long long n_cols = sample_poisson(gamma0 * (std::log(c + qd) - std::log(c)), rng);
    std::vector<std::vector<long long>> columns;
    columns.reserve(static_cast<std::size_t>(n_cols));
    for (long long k = 0; k < n_cols; ++k) {
        const long long total = sample_logarithmic(qd / (c + qd), rng);
        columns.push_back(sample_multinomial(total, q, rng));
    }
    return detail::matrix_from_columns(q.size(), columns);
}

/// Draws the same law sample by sample via the prediction rule: negative
/// binomial counts at existing columns, a Poisson number of new columns,
/// logarithmic counts at the new columns.
inline CountMatrix nbp_generate_rowwise(double gamma0, double c, std::span<const double> q,
                                        Rng& rng) {
    if (!(gamma0 > 0 && c > 0)) {
        throw std::domain_error("nbp_generate_rowwise requires positive gamma0 and c");
    }
    std::vector<std::vector<long long>> columns;  // each of length q.size(), zero-padded
    std::vector<long long> col_total;
    double q_seen = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double qj = q[j];
        const double prob = qj / (c + q_seen + qj);
        for (std::size_t k = 0; k < columns.size(); ++k) {
            const long long n = sample_nb(static_cast<double>(col_total[k]), prob, rng);
            columns[k][j] = n;
            col_total[k] += n;
        }
        const long long fresh =
            sample_poisson(gamma0 * (std::log(c + q_seen + qj) - std::log(c + q_seen)), rng);
        for (long long t = 0; t < fresh; ++t) {
            std::vector<long long> col(q.size(), 0);
            col[j] = sample_logarithmic(prob, rng);
            col_total.push_back(col[j]);
            columns.push_back(std::move(col));
        }
        q_seen += qj;
    }
    return detail::matrix_from_columns(q.size(), columns);
}

/// Log PMF of a random count matrix under the scaled NBP; columns with all
/// zero counts are not part of the random matrix and are skipped.
inline double nbp_matrix_log_pmf(const CountMatrix& m, double gamma0, double c,
                                 std::span<const double> q) {
    if (!(gamma0 > 0 && c > 0)) {
        throw std::domain_error("nbp_matrix_log_pmf requires positive gamma0 and c");
    }
    if (q.size() != m.n_samples()) {
        throw std::invalid_argument("nbp_matrix_log_pmf: q length must match sample count");
    }
    double qd = 0.0;
    for (double v : q) qd += v;
    double lp = -gamma0 * std::log((qd + c) / c);
    for (std::size_t k = 0; k < m.n_genes(); ++k) {
        long long total = 0;
        double cell_terms = 0.0;
        for (std::size_t j = 0; j < m.n_samples(); ++j) {
            const long long n = m(j, k);
            total += n;
            cell_terms += log_gamma(static_cast<double>(n) + 1.0);
        }
        if (total == 0) continue;
        lp += std::log(gamma0);
        lp += log_gamma(static_cast<double>(total)) - static_cast<double>(total) * std::log(qd + c);
        lp -= cell_terms;
    }
    for (std::size_t j = 0; j < m.n_samples(); ++j) {
        lp += static_cast<double>(m.sample_total(j)) * std::log(q[j]);
    }
    return lp;
}

/// Ranking statistic per retained draw: raw rates in scaled mode, rates
/// normalized to the expressed-gene simplex otherwise. An all-zero draw maps
/// to all zeros.
inline std::vector<double> nbp_rank_statistic(std::span<const double> rate_draw, bool scaled) {
    std::vector<double> out(rate_draw.begin(), rate_draw.end());
    if (scaled) return out;
    double total = 0.0;
    for (double v : out) total += v;
    if (total > 0) {
        for (double& v : out) v /= total;
    }
    return out;
}

inline PosteriorTrace nbp_fit(const CountMatrix& data, const NbpHyper& hyper,
                              const McmcConfig& mcmc, const RngHandle& chain) {
    hyper.validate();
    mcmc.validate();
    data.validate();
    const DataStats stats = compute_data_stats(data);
    NbpState st = nbp_init(data, hyper);

    PosteriorTrace trace;
    trace.model = hyper.scaled ? "nbp-scaled" : "nbp";
    trace.statistic = hyper.scaled ? "rate" : "rate_normalized";
    trace.gene_ids = data.gene_ids;
    trace.expressed.resize(data.n_genes());
    for (std::size_t k = 0; k < data.n_genes(); ++k) {
        trace.expressed[k] = stats.gene_total[k] > 0;
    }

    std::vector<double> expressed_rates(stats.k_expressed);
    for (long sweep = 1; sweep <= mcmc.total_sweeps(); ++sweep) {
        nbp_gibbs_sweep(st, stats, hyper, chain, sweep);
        const bool retain = sweep > mcmc.burn_in && (sweep - mcmc.burn_in) % mcmc.thin == 0;
        trace.diagnostics.push_back({sweep, retain, st.gamma0, st.c, st.q_dot()});
        if (retain) {
            std::size_t col = 0;
            for (std::size_t k = 0; k < data.n_genes(); ++k) {
                if (trace.expressed[k]) expressed_rates[col++] = st.r[k];
            }
            const auto row = nbp_rank_statistic(expressed_rates, hyper.scaled);
            trace.draws.insert(trace.draws.end(), row.begin(), row.end());
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
