#ifndef NBPS_RANKING_HPP
#define NBPS_RANKING_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "mcmc.hpp"
#include "version.hpp"

namespace nbps {

struct HistogramConfig {
    int n_bins = 100;
    double epsilon = 1e-10;
    double whisker = 1.5;

    void validate() const {
        if (n_bins < 2) throw std::invalid_argument("n_bins must be >= 2");
        if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
        if (!(whisker >= 0)) throw std::invalid_argument("whisker must be nonnegative");
    }
};

struct Support {
    double lo = 0, hi = 0;
};

namespace detail {

/// Linear-interpolation quantile on a sorted copy of the data.
inline double quantile(std::vector<double> sorted, double prob) {
    const double h = prob * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}

/// Interval shared by the two groups' histograms: quartiles of the pooled
/// sample, whiskered outward and clipped below at zero.
inline Support build_support(std::span<const double> samples_a, std::span<const double> samples_b,
                             const HistogramConfig& cfg) {
    cfg.validate();
    if (samples_a.empty() || samples_b.empty()) {
        throw std::invalid_argument("build_support requires nonempty sample vectors");
    }
    std::vector<double> pooled;
    pooled.reserve(samples_a.size() + samples_b.size());
    pooled.insert(pooled.end(), samples_a.begin(), samples_a.end());
    pooled.insert(pooled.end(), samples_b.begin(), samples_b.end());
    std::sort(pooled.begin(), pooled.end());
    const double q1 = detail::quantile(pooled, 0.25);
    const double q3 = detail::quantile(pooled, 0.75);
    const double iqr = q3 - q1;
    Support s;
    s.lo = std::max(0.0, q1 - cfg.whisker * iqr);
    s.hi = q3 + cfg.whisker * iqr;
    if (s.lo == s.hi) {
        s.hi = s.lo + 1e-12;
    }
    return s;
}

/// Equal-width bin probabilities over the interval; out-of-interval samples
/// are clamped into the edge bins. Bins are half-open with the last closed,
/// so a sample on a boundary lands in the bin to its right.
inline std::vector<double> histogram_probability(std::span<const double> samples,
                                                 const Support& support,
                                                 const HistogramConfig& cfg) {
    cfg.validate();
    if (samples.empty()) {
        throw std::invalid_argument("histogram_probability requires a nonempty sample vector");
    }
    const int n = cfg.n_bins;
    const double width = (support.hi - support.lo) / static_cast<double>(n);
    std::vector<double> prob(static_cast<std::size_t>(n), 0.0);
    for (double x : samples) {
        long long idx = static_cast<long long>(std::floor((x - support.lo) / width));
        if (idx < 0) idx = 0;
        if (idx >= n) idx = n - 1;
        prob[static_cast<std::size_t>(idx)] += 1.0;
    }
    const double total = static_cast<double>(samples.size());
    for (double& v : prob) v /= total;
    return prob;
}

/// Symmetric KL divergence between two discrete probability vectors,
/// stabilized by epsilon inside the logarithm; natural log throughout.
inline double symmetric_kl(std::span<const double> pi_a, std::span<const double> pi_b,
                           double epsilon) {
    if (pi_a.size() != pi_b.size()) {
        throw std::invalid_argument("symmetric_kl requires equal-length vectors");
    }
    double sum_a = 0, sum_b = 0;
    for (std::size_t i = 0; i < pi_a.size(); ++i) {
        sum_a += pi_a[i];
        sum_b += pi_b[i];
    }
    if (std::fabs(sum_a - 1.0) > 1e-9 || std::fabs(sum_b - 1.0) > 1e-9) {
        throw std::invalid_argument("symmetric_kl inputs must each sum to one");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < pi_a.size(); ++i) {
        kl += (pi_a[i] - pi_b[i]) * std::log((pi_a[i] + epsilon) / (pi_b[i] + epsilon));
    }
    return kl;
}

struct GeneKl {
    std::string gene_id;
    double kl = 0;
};

/// Genes sorted by descending symmetric KL; ties broken by gene id.
struct GeneRanking {
    std::vector<GeneKl> entries;
};

inline double gene_kl(std::span<const double> samples_a, std::span<const double> samples_b,
                      const HistogramConfig& cfg) {
    const Support support = build_support(samples_a, samples_b, cfg);
    const auto pa = histogram_probability(samples_a, support, cfg);
    const auto pb = histogram_probability(samples_b, support, cfg);
    return symmetric_kl(pa, pb, cfg.epsilon);
}

/// Ranks the union of the two traces' gene universes. A gene listed in only
/// one trace is treated as a constant-zero trace on the other side, per the
/// fixed-at-zero convention for unexpressed genes; such genes are reported
/// through `warnings` when provided.
inline GeneRanking rank_genes(const PosteriorTrace& trace_a, const PosteriorTrace& trace_b,
                              const HistogramConfig& cfg,
                              std::vector<std::string>* warnings = nullptr) {
    cfg.validate();
    std::vector<std::string> universe = trace_a.gene_ids;
    std::map<std::string, std::size_t> index_a, index_b;
    for (std::size_t k = 0; k < trace_a.gene_ids.size(); ++k) index_a[trace_a.gene_ids[k]] = k;
    for (std::size_t k = 0; k < trace_b.gene_ids.size(); ++k) index_b[trace_b.gene_ids[k]] = k;
    for (const auto& id : trace_b.gene_ids) {
        if (!index_a.count(id)) universe.push_back(id);
    }

    GeneRanking ranking;
    ranking.entries.reserve(universe.size());
    const std::vector<double> zeros_a(trace_a.n_draws, 0.0);
    const std::vector<double> zeros_b(trace_b.n_draws, 0.0);
    for (const auto& id : universe) {
        const auto it_a = index_a.find(id);
        const auto it_b = index_b.find(id);
        if (warnings && (it_a == index_a.end() || it_b == index_b.end())) {
            warnings->push_back("gene " + id + " missing from trace " +
                                (it_a == index_a.end() ? "A" : "B") +
                                "; treated as a constant-zero trace");
        }
        const auto samples_a = it_a == index_a.end() ? zeros_a : trace_a.gene_samples(it_a->second);
        const auto samples_b = it_b == index_b.end() ? zeros_b : trace_b.gene_samples(it_b->second);
        ranking.entries.push_back({id, gene_kl(samples_a, samples_b, cfg)});
    }
    std::sort(ranking.entries.begin(), ranking.entries.end(), [](const GeneKl& a, const GeneKl& b) {
        if (a.kl != b.kl) return a.kl > b.kl;
        return a.gene_id < b.gene_id;
    });
    return ranking;
}

inline void write_ranking_csv(std::ostream& out, const GeneRanking& ranking,
                              const std::string& manifest_hash) {
    out << "# nbps-ranking v" << trace_format_version << '\n';
    out << "# manifest=" << manifest_hash << " tool_version=" << tool_version << '\n';
    out << "gene_id,kl,rank\n";
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
        out << ranking.entries[i].gene_id << ',' << format_double(ranking.entries[i].kl) << ','
            << (i + 1) << '\n';
    }
}

inline void write_ranking_csv(const GeneRanking& ranking, const std::string& path,
                              const std::string& manifest_hash) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write ranking file: " + path);
    write_ranking_csv(out, ranking, manifest_hash);
}

inline GeneRanking read_ranking_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open ranking file: " + path);
    GeneRanking ranking;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            if (line.rfind("gene_id,kl,rank", 0) != 0) {
                throw SchemaError(path + ": malformed ranking header");
            }
            have_header = true;
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw SchemaError(path + ": malformed ranking row");
        }
        ranking.entries.push_back({line.substr(0, c1), std::stod(line.substr(c1 + 1, c2 - c1 - 1))});
    }
    if (!have_header) throw SchemaError(path + ": no ranking header");
    return ranking;
}

}

#endif
