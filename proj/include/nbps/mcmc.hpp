#ifndef NBPS_MCMC_HPP
#define NBPS_MCMC_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "error.hpp"
#include "version.hpp"

namespace nbps {

struct McmcConfig {
    long burn_in = 1000;
    long retained = 1000;
    long thin = 1;
    std::uint64_t seed = 0;
    bool freeze_c = false;  // BNBP only: skip the MH update of c

    long total_sweeps() const { return burn_in + retained * thin; }

    void validate() const {
        if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
        if (retained < 1) throw std::invalid_argument("retained must be >= 1");
        if (thin < 1) throw std::invalid_argument("thin must be >= 1");
    }
};

/// Exact shortest-round-trip style formatting used for every floating point
/// value this library writes; keeps repeated runs byte-identical.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct SweepDiag {
    long sweep = 0;
    bool retained = false;
    double gamma0 = 0, c = 0, depth = 0;
};

/// Retained draws of one chain's ranking statistic plus global-parameter
/// traces. Gene columns are stored for expressed genes only; never-expressed
/// genes are carried as ids with an implicit all-zero trace.
struct PosteriorTrace {
    std::string model;      // nbp | nbp-scaled | gnbp | bnbp
    std::string statistic;  // rate | rate_normalized | nb_shape | odds
    std::vector<std::string> gene_ids;  // full gene universe, data order
    std::vector<std::uint8_t> expressed;
    std::size_t n_draws = 0;
    std::vector<double> draws;  // n_draws x n_expressed, row-major
    std::vector<double> g_gamma0, g_c, g_depth;  // per retained draw
    std::vector<SweepDiag> diagnostics;          // per sweep, burn-in included

    std::size_t n_expressed() const {
        std::size_t n = 0;
        for (auto e : expressed) n += e != 0;
        return n;
    }

    /// Column index of gene k among expressed columns, or npos.
    std::size_t column_of(std::size_t k) const {
        if (!expressed[k]) return static_cast<std::size_t>(-1);
        std::size_t col = 0;
        for (std::size_t i = 0; i < k; ++i) col += expressed[i] != 0;
        return col;
    }

    bool has_gene(const std::string& id) const {
        for (const auto& g : gene_ids) {
            if (g == id) return true;
        }
        return false;
    }

    /// Per-draw samples of one gene's statistic; zeros for unexpressed genes.
    std::vector<double> gene_samples(std::size_t k) const {
        std::vector<double> out(n_draws, 0.0);
        const std::size_t col = column_of(k);
        if (col == static_cast<std::size_t>(-1)) return out;
        const std::size_t width = n_expressed();
        for (std::size_t d = 0; d < n_draws; ++d) out[d] = draws[d * width + col];
        return out;
    }

    void validate() const {
        if (gene_ids.size() != expressed.size()) {
            throw SchemaError("trace gene ids and expressed flags disagree");
        }
        if (draws.size() != n_draws * n_expressed()) {
            throw SchemaError("trace draw matrix has wrong size");
        }
        if (g_gamma0.size() != n_draws || g_c.size() != n_draws || g_depth.size() != n_draws) {
            throw SchemaError("trace global columns have wrong length");
        }
    }
};

namespace detail {

inline void write_trace_header(std::ostream& out, const PosteriorTrace& t,
                               const std::string& manifest_hash) {
    out << "# nbps-trace v" << trace_format_version << '\n';
    out << "# model=" << t.model << " statistic=" << t.statistic << '\n';
    out << "# manifest=" << manifest_hash << " tool_version=" << tool_version << '\n';
    out << "# retained=" << t.n_draws << '\n';
    out << "# zero_genes=";
    bool first = true;
    for (std::size_t k = 0; k < t.gene_ids.size(); ++k) {
        if (!t.expressed[k]) {
            if (!first) out << ',';
            out << t.gene_ids[k];
            first = false;
        }
    }
    out << '\n';
}

inline std::map<std::string, std::string> parse_meta_line(const std::string& line) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(line.substr(1));  // skip '#'
    std::string token;
    while (ss >> token) {
        auto eq = token.find('=');
        if (eq != std::string::npos) {
            kv[token.substr(0, eq)] = token.substr(eq + 1);
        }
    }
    return kv;
}

}

inline void write_trace_csv(std::ostream& out, const PosteriorTrace& t,
                            const std::string& manifest_hash) {
    t.validate();
    detail::write_trace_header(out, t, manifest_hash);
    out << "draw,gamma0,c,depth";
    for (std::size_t k = 0; k < t.gene_ids.size(); ++k) {
        if (t.expressed[k]) out << ',' << t.gene_ids[k];
    }
    out << '\n';
    const std::size_t width = t.n_expressed();
    for (std::size_t d = 0; d < t.n_draws; ++d) {
        out << (d + 1) << ',' << format_double(t.g_gamma0[d]) << ',' << format_double(t.g_c[d])
            << ',' << format_double(t.g_depth[d]);
        for (std::size_t c = 0; c < width; ++c) {
            out << ',' << format_double(t.draws[d * width + c]);
        }
        out << '\n';
    }
}

inline void write_trace_csv(const PosteriorTrace& t, const std::string& path,
                            const std::string& manifest_hash) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write trace file: " + path);
    write_trace_csv(out, t, manifest_hash);
}

inline PosteriorTrace read_trace_csv(std::istream& in, const std::string& source = "<stream>") {
    PosteriorTrace t;
    std::string line;
    std::vector<std::string> zero_genes;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("zero_genes=") != std::string::npos) {
                auto pos = line.find("zero_genes=") + std::strlen("zero_genes=");
                std::string ids = line.substr(pos);
                std::istringstream ss(ids);
                std::string id;
                while (std::getline(ss, id, ',')) {
                    if (!id.empty()) zero_genes.push_back(id);
                }
            } else {
                auto kv = detail::parse_meta_line(line);
                if (kv.count("model")) t.model = kv["model"];
                if (kv.count("statistic")) t.statistic = kv["statistic"];
            }
            continue;
        }
        if (!have_header) {
            std::istringstream ss(line);
            std::string col;
            std::vector<std::string> cols;
            while (std::getline(ss, col, ',')) cols.push_back(col);
            if (cols.size() < 4 || cols[0] != "draw" || cols[1] != "gamma0" || cols[2] != "c" ||
                cols[3] != "depth") {
                throw SchemaError(source + ": malformed trace header row");
            }
            for (std::size_t i = 4; i < cols.size(); ++i) {
                t.gene_ids.push_back(cols[i]);
                t.expressed.push_back(1);
            }
            have_header = true;
            continue;
        }
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        const std::size_t width = t.gene_ids.size();
        if (row.size() != width + 4) {
            throw SchemaError(source + ": trace row has wrong cell count");
        }
        t.g_gamma0.push_back(row[1]);
        t.g_c.push_back(row[2]);
        t.g_depth.push_back(row[3]);
        for (std::size_t i = 0; i < width; ++i) t.draws.push_back(row[4 + i]);
        ++t.n_draws;
    }
    if (!have_header) throw SchemaError(source + ": no trace header row");
    for (const auto& id : zero_genes) {
        t.gene_ids.push_back(id);
        t.expressed.push_back(0);
    }
    t.validate();
    return t;
}

inline PosteriorTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open trace file: " + path);
    return read_trace_csv(in, path);
}

// Compact binary trace: magic, sizes, id blob, then raw doubles.
inline void write_trace_binary(const PosteriorTrace& t, const std::string& path,
                               const std::string& manifest_hash) {
    t.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot write trace file: " + path);
    const char magic[8] = {'N', 'B', 'P', 'S', 'T', 'R', '0' + trace_format_version, '\0'};
    out.write(magic, 8);
    auto write_str = [&](const std::string& s) {
        std::uint64_t n = s.size();
        out.write(reinterpret_cast<const char*>(&n), 8);
        out.write(s.data(), static_cast<std::streamsize>(n));
    };
    write_str(t.model);
    write_str(t.statistic);
    write_str(manifest_hash);
    std::uint64_t n_genes = t.gene_ids.size(), n_draws = t.n_draws;
    out.write(reinterpret_cast<const char*>(&n_genes), 8);
    out.write(reinterpret_cast<const char*>(&n_draws), 8);
    for (std::size_t k = 0; k < t.gene_ids.size(); ++k) {
        write_str(t.gene_ids[k]);
        out.put(t.expressed[k] ? 1 : 0);
    }
    auto write_doubles = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    write_doubles(t.g_gamma0);
    write_doubles(t.g_c);
    write_doubles(t.g_depth);
    write_doubles(t.draws);
}

inline PosteriorTrace read_trace_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open trace file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::strncmp(magic, "NBPSTR", 6) != 0) {
        throw SchemaError(path + ": not a binary trace file");
    }
    auto read_str = [&]() {
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), 8);
        std::string s(n, '\0');
        in.read(s.data(), static_cast<std::streamsize>(n));
        return s;
    };
    PosteriorTrace t;
    t.model = read_str();
    t.statistic = read_str();
    read_str();  // manifest hash
    std::uint64_t n_genes = 0, n_draws = 0;
    in.read(reinterpret_cast<char*>(&n_genes), 8);
    in.read(reinterpret_cast<char*>(&n_draws), 8);
    t.n_draws = n_draws;
    for (std::uint64_t k = 0; k < n_genes; ++k) {
        t.gene_ids.push_back(read_str());
        t.expressed.push_back(static_cast<std::uint8_t>(in.get()));
    }
    auto read_doubles = [&](std::vector<double>& v, std::size_t n) {
        v.resize(n);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    };
    read_doubles(t.g_gamma0, t.n_draws);
    read_doubles(t.g_c, t.n_draws);
    read_doubles(t.g_depth, t.n_draws);
    read_doubles(t.draws, t.n_draws * t.n_expressed());
    if (!in) throw SchemaError(path + ": truncated binary trace");
    t.validate();
    return t;
}

/// Reads either format, sniffing the binary magic.
inline PosteriorTrace read_trace(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw SchemaError("cannot open trace file: " + path);
    char magic[6] = {0};
    probe.read(magic, 6);
    probe.close();
    if (std::strncmp(magic, "NBPSTR", 6) == 0) return read_trace_binary(path);
    return read_trace_csv(path);
}

inline void write_diagnostics_csv(const PosteriorTrace& t, const std::string& path,
                                  const std::string& manifest_hash) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write diagnostics file: " + path);
    out << "# nbps-diagnostics v" << trace_format_version << '\n';
    out << "# model=" << t.model << " manifest=" << manifest_hash
        << " tool_version=" << tool_version << '\n';
    out << "sweep,phase,gamma0,c,depth\n";
    for (const auto& d : t.diagnostics) {
        out << d.sweep << ',' << (d.retained ? "retained" : "burnin") << ','
            << format_double(d.gamma0) << ',' << format_double(d.c) << ','
            << format_double(d.depth) << '\n';
    }
}

}

#endif
