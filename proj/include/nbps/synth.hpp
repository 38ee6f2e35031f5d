#ifndef NBPS_SYNTH_HPP
#define NBPS_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "bnbp.hpp"
#include "count_matrix.hpp"
#include "gnbp.hpp"
#include "kernels.hpp"
#include "mcmc.hpp"
#include "rng.hpp"
#include "version.hpp"

namespace nbps {

enum class SynthSetup { gnbp, bnbp, bayseq };

inline const char* to_string(SynthSetup s) {
    switch (s) {
        case SynthSetup::gnbp: return "gnbp";
        case SynthSetup::bnbp: return "bnbp";
        default: return "bayseq";
    }
}

inline SynthSetup synth_setup_from_string(const std::string& s) {
    if (s == "gnbp") return SynthSetup::gnbp;
    if (s == "bnbp") return SynthSetup::bnbp;
    if (s == "bayseq") return SynthSetup::bayseq;
    throw std::invalid_argument("unknown synthetic setup: " + s);
}

/// Fold change for differentially expressed genes: a fixed b > 1 when
/// lo == hi, otherwise drawn uniformly from [lo, hi].
struct FoldChange {
    double lo = 2.0, hi = 2.0;

    bool fixed() const { return lo == hi; }
    void validate() const {
        if (!(lo > 1.0) || !(hi >= lo)) {
            throw std::invalid_argument("fold change requires 1 < lo <= hi");
        }
    }
};

struct ParamSource {
    enum Kind { defaults, fit_from_data } kind = defaults;
    std::string path;  // reference counts table when kind == fit_from_data
};

struct SynthSpec {
    SynthSetup setup = SynthSetup::gnbp;
    int n_genes = 1000;
    int replicates = 5;
    double de_fraction = 0.10;
    FoldChange fold;
    double up_fraction = 0.5;
    double qc_drop_fraction = 0.10;
    ParamSource source;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_genes < 1) throw std::invalid_argument("n_genes must be >= 1");
        if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
        if (!(de_fraction >= 0 && de_fraction <= 1)) {
            throw std::invalid_argument("de_fraction must lie in [0, 1]");
        }
        fold.validate();
        if (!(up_fraction >= 0 && up_fraction <= 1)) {
            throw std::invalid_argument("up_fraction must lie in [0, 1]");
        }
        if (!(qc_drop_fraction >= 0 && qc_drop_fraction < 1)) {
            throw std::invalid_argument("qc_drop_fraction must lie in [0, 1)");
        }
    }
};

struct GeneTruth {
    bool de = false;
    int direction = 0;  // +1 up, -1 down, 0 none
    double realized_fold = 1.0;
};

struct SynthTruth {
    std::vector<std::string> gene_ids;
    std::vector<GeneTruth> rows;
};

/// Generator parameters for one setup. gene_* vectors run over genes,
/// sample_* over the 2R samples (group A first).
struct GeneratorParams {
    std::vector<double> gene_shape;   // gnbp: r_k
    std::vector<double> sample_prob;  // gnbp: p_j
    std::vector<double> gene_prob;    // bnbp: p_k
    std::vector<double> sample_shape; // bnbp: r_j
    std::vector<double> mu;           // bayseq: per-gene mean
    std::vector<double> phi;          // bayseq: per-gene dispersion
};

struct SynthResult {
    GroupedDataset data;
    SynthTruth truth;
    GeneratorParams params;            // post-QC, group-A view
    std::vector<double> gene_param_a;  // per surviving gene: shape / prob / mean used for group A
    std::vector<double> gene_param_b;  // same for group B
};

/// Desk-scale defaults when no reference dataset is supplied: skewed,
/// over-dispersed counts with a realistic dynamic range.
inline GeneratorParams default_generator_params(const SynthSpec& spec, Rng& rng) {
    GeneratorParams params;
    const int n_samples = 2 * spec.replicates;
    switch (spec.setup) {
        case SynthSetup::gnbp:
            // Shape 1.5 keeps the never-expressed tail small enough that the
            // 10% QC drop removes nearly all genes whose group split is pure
            // sampling noise.
            for (int k = 0; k < spec.n_genes; ++k) {
                params.gene_shape.push_back(sample_gamma(1.5, 2.0, rng));
            }
            for (int j = 0; j < n_samples; ++j) {
                params.sample_prob.push_back(sample_beta(8.0, 2.0, rng));
            }
            break;
        case SynthSetup::bnbp:
            for (int k = 0; k < spec.n_genes; ++k) {
                params.gene_prob.push_back(sample_beta(1.0, 3.0, rng));
            }
            for (int j = 0; j < n_samples; ++j) {
                params.sample_shape.push_back(sample_gamma(10.0, 1.0, rng));
            }
            break;
        case SynthSetup::bayseq:
            for (int k = 0; k < spec.n_genes; ++k) {
                params.mu.push_back(std::exp(std::log(50.0) + 1.5 * sample_normal(rng)));
                params.phi.push_back(sample_gamma(1.0, 0.25, rng));
            }
            break;
    }
    return params;
}

/// Infers generator parameters from a reference dataset: posterior means of
/// the fitted sampler for the gnbp/bnbp setups, per-gene method-of-moments
/// mean and dispersion for the bayseq setup.
inline GeneratorParams fit_generator_params(const CountMatrix& reference, SynthSetup setup,
                                            const McmcConfig& mcmc = McmcConfig{}) {
    if (reference.n_samples() < 2) {
        throw std::invalid_argument("fit_generator_params needs at least two reference samples");
    }
    GeneratorParams params;
    const RngHandle rng{mcmc.seed, 0};
    const DataStats stats = compute_data_stats(reference);
    switch (setup) {
        case SynthSetup::gnbp: {
            GnbpState st = gnbp_init(reference, stats, GnbpHyper{});
            std::vector<double> r_sum(reference.n_genes(), 0.0);
            std::vector<double> p_sum(reference.n_samples(), 0.0);
            long kept = 0;
            for (long sweep = 1; sweep <= mcmc.total_sweeps(); ++sweep) {
                gnbp_gibbs_sweep(st, stats, GnbpHyper{}, rng, sweep);
                if (sweep > mcmc.burn_in && (sweep - mcmc.burn_in) % mcmc.thin == 0) {
                    for (std::size_t k = 0; k < r_sum.size(); ++k) r_sum[k] += st.r[k];
                    for (std::size_t j = 0; j < p_sum.size(); ++j) p_sum[j] += st.p[j];
                    ++kept;
                }
            }
            for (double v : r_sum) params.gene_shape.push_back(v / static_cast<double>(kept));
            for (double v : p_sum) params.sample_prob.push_back(v / static_cast<double>(kept));
            break;
        }
        case SynthSetup::bnbp: {
            BnbpState st = bnbp_init(reference, stats, BnbpHyper{});
            std::vector<double> p_sum(reference.n_genes(), 0.0);
            std::vector<double> r_sum(reference.n_samples(), 0.0);
            long kept = 0;
            for (long sweep = 1; sweep <= mcmc.total_sweeps(); ++sweep) {
                bnbp_gibbs_sweep(st, stats, BnbpHyper{}, rng, sweep, mcmc.freeze_c);
                if (sweep > mcmc.burn_in && (sweep - mcmc.burn_in) % mcmc.thin == 0) {
                    for (std::size_t k = 0; k < p_sum.size(); ++k) p_sum[k] += st.p[k];
                    for (std::size_t j = 0; j < r_sum.size(); ++j) r_sum[j] += st.r[j];
                    ++kept;
                }
            }
            for (double v : p_sum) params.gene_prob.push_back(v / static_cast<double>(kept));
            for (double v : r_sum) params.sample_shape.push_back(v / static_cast<double>(kept));
            break;
        }
        case SynthSetup::bayseq: {
            const auto nj = static_cast<double>(reference.n_samples());
            for (std::size_t k = 0; k < reference.n_genes(); ++k) {
                double mean = 0.0;
                for (std::size_t j = 0; j < reference.n_samples(); ++j) {
                    mean += static_cast<double>(reference(j, k));
                }
                mean /= nj;
                double ss = 0.0;
                for (std::size_t j = 0; j < reference.n_samples(); ++j) {
                    const double d = static_cast<double>(reference(j, k)) - mean;
                    ss += d * d;
                }
                const double var = ss / (nj - 1.0);
                params.mu.push_back(mean);
                params.phi.push_back(mean > 0 ? std::max(0.0, (var - mean) / (mean * mean)) : 0.0);
            }
            break;
        }
    }
    return params;
}

namespace detail {

inline long long nb_mean_dispersion_draw(double mean, double phi, Rng& rng) {
    if (mean <= 0) return 0;
    if (phi <= 0) return sample_poisson(mean, rng);
    const double shape = 1.0 / phi;
    return sample_nb(shape, mean / (mean + shape), rng);
}

inline double odds_scale(double p, double factor) {
    const double odds = factor * p / (1.0 - p);
    return odds / (1.0 + odds);
}

inline std::string synth_gene_id(int k) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "g%05d", k + 1);
    return buf;
}

}

/// Generates a two-group dataset plus ground truth. Quality control drops
/// the lowest-expressed fraction of genes from a provisional null matrix
/// before DE assignment, so no DE gene is silently removed.
inline SynthResult synth_generate(const SynthSpec& spec, const RngHandle& handle) {
    spec.validate();
    const int R = spec.replicates;
    const int n_samples = 2 * R;

    GeneratorParams params;
    if (spec.source.kind == ParamSource::fit_from_data) {
        params = fit_generator_params(load_counts(spec.source.path), spec.setup);
        // Reference parameter vectors are recycled to the requested sizes.
        auto recycle = [](std::vector<double>& v, std::size_t n) {
            if (v.empty()) return;
            std::vector<double> out(n);
            for (std::size_t i = 0; i < n; ++i) out[i] = v[i % v.size()];
            v = std::move(out);
        };
        recycle(params.gene_shape, spec.n_genes);
        recycle(params.gene_prob, spec.n_genes);
        recycle(params.mu, spec.n_genes);
        recycle(params.phi, spec.n_genes);
        recycle(params.sample_prob, n_samples);
        recycle(params.sample_shape, n_samples);
    } else {
        auto rng = handle.derive(1).make();
        params = default_generator_params(spec, rng);
    }

    auto null_draw = [&](int k, int j, Rng& rng) -> long long {
        switch (spec.setup) {
            case SynthSetup::gnbp:
                if (params.gene_shape[k] <= 0) return 0;
                return sample_nb(params.gene_shape[k], params.sample_prob[j], rng);
            case SynthSetup::bnbp:
                if (params.gene_prob[k] <= 0) return 0;
                return sample_nb(params.sample_shape[j], params.gene_prob[k], rng);
            default:
                return detail::nb_mean_dispersion_draw(params.mu[k], params.phi[k], rng);
        }
    };

    // Provisional null matrix for the quality-control ranking.
    std::vector<long long> pooled(spec.n_genes, 0);
    for (int k = 0; k < spec.n_genes; ++k) {
        auto rng = handle.derive(2, static_cast<std::uint64_t>(k)).make();
        for (int j = 0; j < n_samples; ++j) pooled[k] += null_draw(k, j, rng);
    }
    const int n_drop = static_cast<int>(std::floor(spec.qc_drop_fraction * spec.n_genes));
    std::vector<int> order(spec.n_genes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pooled[a] < pooled[b]; });
    std::vector<char> dropped(spec.n_genes, 0);
    for (int i = 0; i < n_drop; ++i) dropped[order[i]] = 1;
    std::vector<int> survivors;
    for (int k = 0; k < spec.n_genes; ++k) {
        if (!dropped[k]) survivors.push_back(k);
    }
    const int n_after = static_cast<int>(survivors.size());

    // DE assignment among survivors.
    const int n_de = static_cast<int>(std::lround(spec.de_fraction * n_after));
    const int n_up = static_cast<int>(std::lround(spec.up_fraction * n_de));
    std::vector<int> shuffled(survivors);
    {
        auto rng = handle.derive(3).make();
        for (int i = n_after - 1; i > 0; --i) {
            const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(shuffled[i], shuffled[j]);
        }
    }
    std::vector<GeneTruth> truth_by_original(spec.n_genes);
    {
        auto rng = handle.derive(4).make();
        for (int i = 0; i < n_de; ++i) {
            GeneTruth t;
            t.de = true;
            t.direction = i < n_up ? +1 : -1;
            t.realized_fold = spec.fold.fixed()
                                  ? spec.fold.lo
                                  : spec.fold.lo + (spec.fold.hi - spec.fold.lo) * rng.uniform();
            truth_by_original[shuffled[i]] = t;
        }
    }

    // Final counts for the surviving genes.
    SynthResult result;
    result.truth.gene_ids.reserve(n_after);
    CountMatrix& a = result.data.group_a;
    CountMatrix& b = result.data.group_b;
    for (int j = 0; j < R; ++j) a.sample_ids.push_back("a" + std::to_string(j + 1));
    for (int j = 0; j < R; ++j) b.sample_ids.push_back("b" + std::to_string(j + 1));
    a.counts.assign(static_cast<std::size_t>(R) * n_after, 0);
    b.counts.assign(static_cast<std::size_t>(R) * n_after, 0);
    result.gene_param_a.resize(n_after);
    result.gene_param_b.resize(n_after);

    for (int i = 0; i < n_after; ++i) {
        const int k = survivors[i];
        const GeneTruth& t = truth_by_original[k];
        a.gene_ids.push_back(detail::synth_gene_id(k));
        b.gene_ids.push_back(detail::synth_gene_id(k));
        result.truth.gene_ids.push_back(detail::synth_gene_id(k));
        result.truth.rows.push_back(t);

        auto rng = handle.derive(5, static_cast<std::uint64_t>(k)).make();
        const double fold = t.realized_fold;
        switch (spec.setup) {
            case SynthSetup::gnbp: {
                const double shape_a = params.gene_shape[k];
                const double shape_b = !t.de ? shape_a
                                      : t.direction > 0 ? fold * shape_a
                                                        : shape_a / fold;
                result.gene_param_a[i] = shape_a;
                result.gene_param_b[i] = shape_b;
                for (int j = 0; j < R; ++j) {
                    a.counts[static_cast<std::size_t>(j) * n_after + i] =
                        shape_a > 0 ? sample_nb(shape_a, params.sample_prob[j], rng) : 0;
                }
                for (int j = 0; j < R; ++j) {
                    b.counts[static_cast<std::size_t>(j) * n_after + i] =
                        shape_b > 0 ? sample_nb(shape_b, params.sample_prob[R + j], rng) : 0;
                }
                break;
            }
            case SynthSetup::bnbp: {
                const double p = params.gene_prob[k];
                double p_a = p, p_b = p;
                if (t.de) {
                    if (t.direction > 0) {
                        p_b = detail::odds_scale(p, fold);  // group B odds scaled up
                    } else {
                        p_a = detail::odds_scale(p, 1.0 / fold);  // group A gets reduced odds
                    }
                }
                result.gene_param_a[i] = p_a;
                result.gene_param_b[i] = p_b;
                for (int j = 0; j < R; ++j) {
                    a.counts[static_cast<std::size_t>(j) * n_after + i] =
                        p_a > 0 ? sample_nb(params.sample_shape[j], p_a, rng) : 0;
                }
                for (int j = 0; j < R; ++j) {
                    b.counts[static_cast<std::size_t>(j) * n_after + i] =
                        p_b > 0 ? sample_nb(params.sample_shape[R + j], p_b, rng) : 0;
                }
                break;
            }
            case SynthSetup::bayseq: {
                const double mu_a = params.mu[k];
                const double mu_b = !t.de ? mu_a : t.direction > 0 ? fold * mu_a : mu_a / fold;
                result.gene_param_a[i] = mu_a;
                result.gene_param_b[i] = mu_b;
                for (int j = 0; j < R; ++j) {
                    a.counts[static_cast<std::size_t>(j) * n_after + i] =
                        detail::nb_mean_dispersion_draw(mu_a, params.phi[k], rng);
                }
                for (int j = 0; j < R; ++j) {
                    b.counts[static_cast<std::size_t>(j) * n_after + i] =
                        detail::nb_mean_dispersion_draw(mu_b, params.phi[k], rng);
                }
                break;
            }
        }
    }

    // Post-QC view of the base parameters, for inspection and tests.
    result.params = params;
    auto subset_genes = [&](std::vector<double>& v) {
        if (v.empty()) return;
        std::vector<double> out;
        out.reserve(n_after);
        for (int k : survivors) out.push_back(v[k]);
        v = std::move(out);
    };
    subset_genes(result.params.gene_shape);
    subset_genes(result.params.gene_prob);
    subset_genes(result.params.mu);
    subset_genes(result.params.phi);

    result.data.validate();
    return result;
}

inline void write_truth_csv(std::ostream& out, const SynthTruth& truth,
                            const std::string& manifest_hash) {
    out << "# nbps-truth v" << trace_format_version << '\n';
    out << "# manifest=" << manifest_hash << " tool_version=" << tool_version << '\n';
    out << "gene_id,de,direction,realized_fold\n";
    for (std::size_t i = 0; i < truth.gene_ids.size(); ++i) {
        const auto& t = truth.rows[i];
        out << truth.gene_ids[i] << ',' << (t.de ? 1 : 0) << ','
            << (t.direction > 0 ? "up" : t.direction < 0 ? "down" : "none") << ','
            << format_double(t.realized_fold) << '\n';
    }
}

inline void write_truth_csv(const SynthTruth& truth, const std::string& path,
                            const std::string& manifest_hash) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write truth file: " + path);
    write_truth_csv(out, truth, manifest_hash);
}

}

#endif
