#ifndef NBPS_EVAL_HPP
#define NBPS_EVAL_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "mcmc.hpp"
#include "ranking.hpp"
#include "version.hpp"

namespace nbps {

struct TruthLabels {
    std::vector<std::string> gene_ids;
    std::vector<std::uint8_t> de;
};

/// Defines ground truth by thresholding the binary log of the intensity
/// ratio; the cutoff is inclusive.
inline TruthLabels label_from_intensity(const std::vector<std::string>& gene_ids,
                                        std::span<const double> intensity_a,
                                        std::span<const double> intensity_b,
                                        double log2_cutoff) {
    if (gene_ids.size() != intensity_a.size() || gene_ids.size() != intensity_b.size()) {
        throw std::invalid_argument("label_from_intensity requires matching lengths");
    }
    TruthLabels labels;
    labels.gene_ids = gene_ids;
    labels.de.resize(gene_ids.size());
    for (std::size_t k = 0; k < gene_ids.size(); ++k) {
        if (!(intensity_a[k] > 0) || !(intensity_b[k] > 0)) {
            throw std::domain_error("label_from_intensity requires positive intensities (gene " +
                                    gene_ids[k] + ")");
        }
        labels.de[k] = std::fabs(std::log2(intensity_a[k] / intensity_b[k])) >= log2_cutoff;
    }
    return labels;
}

struct EvalReport {
    double auc_roc = 0, auc_pr = 0;
    double partial_auc_roc = 0, partial_auc_pr = 0;
    double tau = 0.1;
    std::vector<std::pair<double, double>> roc_points;  // (fpr, tpr)
    std::vector<std::pair<double, double>> pr_points;   // (recall, precision)
    std::vector<long long> fd_curve;  // cumulative false positives for top-N, N = 1..#positives
};

/// Sweeps the ranked list: ROC by the trapezoid rule with tie groups as
/// diagonal segments, PR by rectangles (conservative against interpolation
/// bias), partial areas clipped at tau.
inline EvalReport roc_pr_report(const GeneRanking& ranking, const TruthLabels& truth,
                                double tau = 0.1) {
    if (!(tau > 0 && tau <= 1)) {
        throw std::invalid_argument("tau must lie in (0, 1]");
    }
    std::map<std::string, bool> truth_map;
    for (std::size_t k = 0; k < truth.gene_ids.size(); ++k) {
        truth_map[truth.gene_ids[k]] = truth.de[k] != 0;
    }
    std::vector<std::pair<double, bool>> scored;  // (kl, de) restricted to the truth universe
    scored.reserve(truth_map.size());
    std::size_t covered = 0;
    for (const auto& entry : ranking.entries) {
        auto it = truth_map.find(entry.gene_id);
        if (it == truth_map.end()) continue;
        scored.emplace_back(entry.kl, it->second);
        ++covered;
    }
    if (covered != truth_map.size()) {
        throw SchemaError("ranking does not cover the truth universe");
    }
    long long positives = 0;
    for (const auto& [id, de] : truth_map) positives += de;
    const long long negatives = static_cast<long long>(truth_map.size()) - positives;
    if (positives == 0 || negatives == 0) {
        throw std::invalid_argument("truth must contain at least one positive and one negative");
    }

    EvalReport report;
    report.tau = tau;
    report.roc_points.emplace_back(0.0, 0.0);
    long long tp = 0, fp = 0;
    double prev_fpr = 0.0, prev_tpr = 0.0, prev_recall = 0.0;

    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        long long d_tp = 0, d_fp = 0;
        while (j < scored.size() && scored[j].first == scored[i].first) {
            (scored[j].second ? d_tp : d_fp) += 1;
            ++j;
        }
        tp += d_tp;
        fp += d_fp;
        const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        report.auc_roc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        if (prev_fpr < tau) {
            const double fpr_hi = std::min(fpr, tau);
            const double tpr_hi =
                fpr > prev_fpr ? prev_tpr + (tpr - prev_tpr) * (fpr_hi - prev_fpr) / (fpr - prev_fpr)
                               : tpr;
            report.partial_auc_roc += (fpr_hi - prev_fpr) * (tpr_hi + prev_tpr) / 2.0;
        }
        report.roc_points.emplace_back(fpr, tpr);
        if (d_tp > 0) {
            const double recall = tpr;
            const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            report.auc_pr += (recall - prev_recall) * precision;
            report.partial_auc_pr +=
                (std::min(recall, tau) - std::min(prev_recall, tau)) * precision;
            report.pr_points.emplace_back(recall, precision);
            prev_recall = recall;
        }
        prev_fpr = fpr;
        prev_tpr = tpr;
        i = j;
    }

    long long cum_fp = 0;
    for (std::size_t n = 0; n < scored.size() && static_cast<long long>(n) < positives; ++n) {
        cum_fp += scored[n].second ? 0 : 1;
        report.fd_curve.push_back(cum_fp);
    }
    return report;
}

inline nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    j["auc_roc"] = report.auc_roc;
    j["auc_pr"] = report.auc_pr;
    j["partial_auc_roc"] = report.partial_auc_roc;
    j["partial_auc_pr"] = report.partial_auc_pr;
    j["tau"] = report.tau;
    return j;
}

inline void write_report_json(const EvalReport& report, const std::string& path,
                              const std::string& manifest_hash) {
    nlohmann::json j = to_json(report);
    j["manifest"] = manifest_hash;
    j["tool_version"] = tool_version;
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write report file: " + path);
    out << j.dump(2) << '\n';
}

inline void write_curves_csv(const EvalReport& report, const std::string& dir,
                             const std::string& manifest_hash) {
    auto open = [&](const std::string& name) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw SchemaError("cannot write curve file: " + dir + "/" + name);
        out << "# manifest=" << manifest_hash << " tool_version=" << tool_version << '\n';
        return out;
    };
    {
        auto out = open("roc_points.csv");
        out << "fpr,tpr\n";
        for (const auto& [x, y] : report.roc_points) {
            out << format_double(x) << ',' << format_double(y) << '\n';
        }
    }
    {
        auto out = open("pr_points.csv");
        out << "recall,precision\n";
        for (const auto& [x, y] : report.pr_points) {
            out << format_double(x) << ',' << format_double(y) << '\n';
        }
    }
    {
        auto out = open("fd_curve.csv");
        out << "n_selected,false_discoveries\n";
        for (std::size_t n = 0; n < report.fd_curve.size(); ++n) {
            out << (n + 1) << ',' << report.fd_curve[n] << '\n';
        }
    }
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                           std::string& header_line) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            header_line = line;
            have_header = true;
            continue;
        }
        rows.push_back(std::move(cells));
    }
    if (!have_header) throw SchemaError(path + ": missing header row");
    return rows;
}

}

/// Reads the truth format written by the simulator (gene_id and de columns).
inline TruthLabels read_truth_csv(const std::string& path) {
    std::string header;
    const auto rows = detail::read_csv_rows(path, header);
    if (header.rfind("gene_id,de", 0) != 0) {
        throw SchemaError(path + ": expected a gene_id,de,... header");
    }
    TruthLabels labels;
    for (const auto& row : rows) {
        if (row.size() < 2) throw SchemaError(path + ": malformed truth row");
        labels.gene_ids.push_back(row[0]);
        labels.de.push_back(row[1] == "1" || row[1] == "true");
    }
    return labels;
}

/// Reads a gene_id,intensity_a,intensity_b table.
inline void read_intensity_csv(const std::string& path, std::vector<std::string>& gene_ids,
                               std::vector<double>& intensity_a, std::vector<double>& intensity_b) {
    std::string header;
    const auto rows = detail::read_csv_rows(path, header);
    if (header.rfind("gene_id,intensity_a,intensity_b", 0) != 0) {
        throw SchemaError(path + ": expected a gene_id,intensity_a,intensity_b header");
    }
    for (const auto& row : rows) {
        if (row.size() < 3) throw SchemaError(path + ": malformed intensity row");
        gene_ids.push_back(row[0]);
        intensity_a.push_back(std::stod(row[1]));
        intensity_b.push_back(std::stod(row[2]));
    }
}

}

#endif
