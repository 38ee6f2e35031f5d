#ifndef NBPS_COUNT_MATRIX_HPP
#define NBPS_COUNT_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"

namespace nbps {

/// Raw samples-by-genes count matrix. Counts are never normalized; samplers
/// consume them exactly as loaded.
struct CountMatrix {
    std::string corner = "sample_id";  // top-left header cell, kept for round-trips
    std::vector<std::string> sample_ids;
    std::vector<std::string> gene_ids;
    std::vector<long long> counts;  // row-major, n_samples x n_genes

    std::size_t n_samples() const { return sample_ids.size(); }
    std::size_t n_genes() const { return gene_ids.size(); }

    long long operator()(std::size_t j, std::size_t k) const {
        return counts[j * n_genes() + k];
    }
    long long& operator()(std::size_t j, std::size_t k) {
        return counts[j * n_genes() + k];
    }

    long long gene_total(std::size_t k) const {
        long long total = 0;
        for (std::size_t j = 0; j < n_samples(); ++j) total += (*this)(j, k);
        return total;
    }

    long long sample_total(std::size_t j) const {
        long long total = 0;
        for (std::size_t k = 0; k < n_genes(); ++k) total += (*this)(j, k);
        return total;
    }

    /// Number of genes with at least one read across the samples.
    std::size_t expressed_count() const {
        std::size_t n = 0;
        for (std::size_t k = 0; k < n_genes(); ++k) n += gene_total(k) > 0;
        return n;
    }

    void validate() const {
        if (counts.size() != n_samples() * n_genes()) {
            throw SchemaError("count matrix dimensions do not match id lists");
        }
        for (long long v : counts) {
            if (v < 0) throw SchemaError("count matrix contains a negative entry");
        }
        auto check_unique = [](const std::vector<std::string>& ids, const char* what) {
            std::unordered_set<std::string> seen;
            for (const auto& id : ids) {
                if (!seen.insert(id).second) {
                    throw SchemaError(std::string("duplicate ") + what + " id: " + id);
                }
            }
        };
        check_unique(sample_ids, "sample");
        check_unique(gene_ids, "gene");
    }
};

/// Per-fit summaries of a count matrix, computed once per chain.
struct DataStats {
    std::vector<long long> gene_total;
    std::vector<long long> sample_total;
    long long grand_total = 0;
    std::size_t k_expressed = 0;
    // For each gene, the (sample index, count) pairs of its nonzero cells.
    std::vector<std::vector<std::pair<std::size_t, long long>>> gene_cells;
};

inline DataStats compute_data_stats(const CountMatrix& data) {
    DataStats s;
    const std::size_t nj = data.n_samples(), nk = data.n_genes();
    s.gene_total.assign(nk, 0);
    s.sample_total.assign(nj, 0);
    s.gene_cells.resize(nk);
    for (std::size_t j = 0; j < nj; ++j) {
        for (std::size_t k = 0; k < nk; ++k) {
            const long long v = data(j, k);
            if (v > 0) {
                s.gene_total[k] += v;
                s.sample_total[j] += v;
                s.grand_total += v;
                s.gene_cells[k].emplace_back(j, v);
            }
        }
    }
    for (std::size_t k = 0; k < nk; ++k) s.k_expressed += s.gene_total[k] > 0;
    return s;
}

/// Two-condition dataset; both groups must list the same genes in the same order.
struct GroupedDataset {
    CountMatrix group_a;
    CountMatrix group_b;

    void validate() const {
        group_a.validate();
        group_b.validate();
        if (group_a.gene_ids != group_b.gene_ids) {
            throw SchemaError("grouped dataset requires identical gene lists in identical order");
        }
    }
};

namespace detail {

inline char delimiter_for(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == "csv") return ',';
    return '\t';  // default to TSV
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(field);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

inline long long parse_count(const std::string& token, std::size_t row, const std::string& gene_id) {
    auto fail = [&](const char* why) {
        throw ParseError("parse error at (row " + std::to_string(row) + ", gene " + gene_id +
                         "): " + why + " '" + token + "'");
    };
    if (token.empty()) fail("empty cell");
    std::size_t start = 0;
    if (token[0] == '-') fail("negative count");
    if (token[0] == '+') start = 1;
    if (start == token.size()) fail("malformed integer");
    long long value = 0;
    for (std::size_t i = start; i < token.size(); ++i) {
        if (token[i] < '0' || token[i] > '9') fail("malformed integer");
        value = value * 10 + (token[i] - '0');
        if (value < 0) fail("count overflows");
    }
    return value;
}

}

inline CountMatrix parse_counts(std::istream& in, char delim, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError(source + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_line(line, delim);
    if (header.size() < 2) {
        throw SchemaError(source + ": header must list at least one gene id");
    }
    CountMatrix m;
    m.corner = header[0];
    m.gene_ids.assign(header.begin() + 1, header.end());

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        auto fields = detail::split_line(line, delim);
        if (fields.size() != m.gene_ids.size() + 1) {
            throw SchemaError(source + ": row " + std::to_string(row) + " has " +
                              std::to_string(fields.size() - 1) + " cells, expected " +
                              std::to_string(m.gene_ids.size()));
        }
        m.sample_ids.push_back(fields[0]);
        for (std::size_t k = 0; k < m.gene_ids.size(); ++k) {
            m.counts.push_back(detail::parse_count(fields[k + 1], row, m.gene_ids[k]));
        }
    }
    if (m.sample_ids.empty()) {
        throw SchemaError(source + ": empty data section");
    }
    m.validate();
    return m;
}

/// Loads a counts table; delimiter chosen from the file extension
/// (.csv -> comma, anything else -> tab).
inline CountMatrix load_counts(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open counts file: " + path);
    }
    return parse_counts(in, detail::delimiter_for(path), path);
}

inline void write_counts(std::ostream& out, const CountMatrix& m, char delim) {
    out << m.corner;
    for (const auto& g : m.gene_ids) out << delim << g;
    out << '\n';
    for (std::size_t j = 0; j < m.n_samples(); ++j) {
        out << m.sample_ids[j];
        for (std::size_t k = 0; k < m.n_genes(); ++k) out << delim << m(j, k);
        out << '\n';
    }
}

inline void save_counts(const CountMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw SchemaError("cannot write counts file: " + path);
    }
    write_counts(out, m, detail::delimiter_for(path));
}

namespace detail {

inline GroupedDataset keep_genes(const GroupedDataset& data, const std::vector<std::size_t>& keep) {
    auto select = [&](const CountMatrix& src) {
        CountMatrix out;
        out.corner = src.corner;
        out.sample_ids = src.sample_ids;
        out.gene_ids.reserve(keep.size());
        for (std::size_t k : keep) out.gene_ids.push_back(src.gene_ids[k]);
        out.counts.reserve(src.n_samples() * keep.size());
        for (std::size_t j = 0; j < src.n_samples(); ++j) {
            for (std::size_t k : keep) out.counts.push_back(src(j, k));
        }
        return out;
    };
    return GroupedDataset{select(data.group_a), select(data.group_b)};
}

inline std::vector<long long> pooled_totals(const GroupedDataset& data) {
    std::vector<long long> totals(data.group_a.n_genes(), 0);
    for (std::size_t k = 0; k < totals.size(); ++k) {
        totals[k] = data.group_a.gene_total(k) + data.group_b.gene_total(k);
    }
    return totals;
}

}

/// Drops the floor(drop_fraction * K) genes with the lowest totals pooled
/// over both groups; ties broken by original gene order. Survivors keep
/// their relative order.
inline GroupedDataset filter_low_expression(const GroupedDataset& data, double drop_fraction) {
    if (!(drop_fraction >= 0 && drop_fraction < 1)) {
        throw std::invalid_argument("drop_fraction must lie in [0, 1)");
    }
    data.validate();
    const std::size_t n_drop = static_cast<std::size_t>(
        std::floor(drop_fraction * static_cast<double>(data.group_a.n_genes())));
    if (n_drop == 0) {
        return data;
    }
    const auto totals = detail::pooled_totals(data);
    std::vector<std::size_t> order(totals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return totals[a] < totals[b]; });
    std::vector<char> dropped(totals.size(), 0);
    for (std::size_t i = 0; i < n_drop; ++i) dropped[order[i]] = 1;
    std::vector<std::size_t> keep;
    keep.reserve(totals.size() - n_drop);
    for (std::size_t k = 0; k < totals.size(); ++k) {
        if (!dropped[k]) keep.push_back(k);
    }
    return detail::keep_genes(data, keep);
}

/// Removes genes whose total count pooled over both groups is strictly
/// below min_total.
inline GroupedDataset min_total_filter(const GroupedDataset& data, long long min_total) {
    data.validate();
    const auto totals = detail::pooled_totals(data);
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < totals.size(); ++k) {
        if (totals[k] >= min_total) keep.push_back(k);
    }
    return detail::keep_genes(data, keep);
}

}

#endif
