#ifndef NBPS_PIPELINE_HPP
#define NBPS_PIPELINE_HPP

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bnbp.hpp"
#include "eval.hpp"
#include "gnbp.hpp"
#include "manifest.hpp"
#include "mcmc.hpp"
#include "nbp.hpp"
#include "ranking.hpp"
#include "synth.hpp"

namespace nbps {

/// Prior hyperparameters shared across model families; the (a0, b0) pair is
/// interpreted by each model (sample scales, probabilities, or shapes).
struct HyperValues {
    double e0 = 0.01, f0 = 0.01;
    double a0 = 1.0, b0 = 1.0;
    double c0 = 1.0, d0 = 1.0;
};

inline bool is_known_model(const std::string& model) {
    return model == "nbp" || model == "nbp-scaled" || model == "gnbp" || model == "bnbp";
}

/// Fits one chain of the named model and returns its posterior trace.
inline PosteriorTrace fit_model(const std::string& model, const CountMatrix& data,
                                const HyperValues& hyper, const McmcConfig& mcmc,
                                const RngHandle& rng) {
    if (model == "nbp" || model == "nbp-scaled") {
        NbpHyper h;
        h.e0 = hyper.e0; h.f0 = hyper.f0; h.a0 = hyper.a0; h.b0 = hyper.b0;
        h.c0 = hyper.c0; h.d0 = hyper.d0;
        h.scaled = model == "nbp-scaled";
        return nbp_fit(data, h, mcmc, rng);
    }
    if (model == "gnbp") {
        GnbpHyper h;
        h.e0 = hyper.e0; h.f0 = hyper.f0; h.a0 = hyper.a0; h.b0 = hyper.b0;
        h.c0 = hyper.c0; h.d0 = hyper.d0;
        return gnbp_fit(data, h, mcmc, rng);
    }
    if (model == "bnbp") {
        BnbpHyper h;
        h.e0 = hyper.e0; h.f0 = hyper.f0; h.a0 = hyper.a0; h.b0 = hyper.b0;
        h.c0 = hyper.c0; h.d0 = hyper.d0;
        return bnbp_fit(data, h, mcmc, rng);
    }
    throw std::invalid_argument("unknown model: " + model);
}

struct PipelineConfig {
    SynthSpec synth;
    std::vector<std::string> models{"gnbp", "bnbp"};
    int trials = 10;
    McmcConfig mcmc;
    HyperValues hyper;
    HistogramConfig hist;
    double tau = 0.1;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const {
        synth.validate();
        mcmc.validate();
        hist.validate();
        if (trials < 1) throw std::invalid_argument("trials must be >= 1");
        if (models.empty()) throw std::invalid_argument("at least one model is required");
        for (const auto& m : models) {
            if (!is_known_model(m)) throw std::invalid_argument("unknown model: " + m);
        }
    }
};

namespace detail {

inline std::vector<std::string> split_csv_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(value);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

}

/// Applies one `key = value` setting to a pipeline configuration. Used for
/// both config files and --set command-line overrides.
inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
    auto as_double = [&]() { return std::stod(value); };
    auto as_long = [&]() { return std::stol(value); };
    if (key == "setup") {
        cfg.synth.setup = synth_setup_from_string(value);
    } else if (key == "genes") {
        cfg.synth.n_genes = static_cast<int>(as_long());
    } else if (key == "replicates") {
        cfg.synth.replicates = static_cast<int>(as_long());
    } else if (key == "de_fraction") {
        cfg.synth.de_fraction = as_double();
    } else if (key == "fold_change") {
        const auto colon = value.find(':');
        if (colon == std::string::npos) {
            cfg.synth.fold = {as_double(), std::stod(value)};
        } else {
            cfg.synth.fold = {std::stod(value.substr(0, colon)), std::stod(value.substr(colon + 1))};
        }
    } else if (key == "up_fraction") {
        cfg.synth.up_fraction = as_double();
    } else if (key == "qc_drop_fraction") {
        cfg.synth.qc_drop_fraction = as_double();
    } else if (key == "param_source") {
        if (value == "defaults") {
            cfg.synth.source = {ParamSource::defaults, ""};
        } else if (value.rfind("fit:", 0) == 0) {
            cfg.synth.source = {ParamSource::fit_from_data, value.substr(4)};
        } else {
            throw std::invalid_argument("param_source must be 'defaults' or 'fit:<path>'");
        }
    } else if (key == "seed") {
        cfg.synth.seed = static_cast<std::uint64_t>(std::stoull(value));
        cfg.mcmc.seed = cfg.synth.seed;
    } else if (key == "models") {
        cfg.models = detail::split_csv_list(value);
    } else if (key == "trials") {
        cfg.trials = static_cast<int>(as_long());
    } else if (key == "burn_in") {
        cfg.mcmc.burn_in = as_long();
    } else if (key == "retained") {
        cfg.mcmc.retained = as_long();
    } else if (key == "thin") {
        cfg.mcmc.thin = as_long();
    } else if (key == "freeze_c") {
        cfg.mcmc.freeze_c = value == "1" || value == "true";
    } else if (key == "n_bins") {
        cfg.hist.n_bins = static_cast<int>(as_long());
    } else if (key == "epsilon") {
        cfg.hist.epsilon = as_double();
    } else if (key == "whisker") {
        cfg.hist.whisker = as_double();
    } else if (key == "tau") {
        cfg.tau = as_double();
    } else if (key == "threads") {
        cfg.threads = static_cast<int>(as_long());
    } else if (key == "e0") {
        cfg.hyper.e0 = as_double();
    } else if (key == "f0") {
        cfg.hyper.f0 = as_double();
    } else if (key == "a0") {
        cfg.hyper.a0 = as_double();
    } else if (key == "b0") {
        cfg.hyper.b0 = as_double();
    } else if (key == "c0") {
        cfg.hyper.c0 = as_double();
    } else if (key == "d0") {
        cfg.hyper.d0 = as_double();
    } else {
        throw std::invalid_argument("unknown configuration key: " + key);
    }
}

/// Parses the declarative key = value configuration format ('#' comments).
inline PipelineConfig parse_pipeline_config(std::istream& in, const std::string& source) {
    PipelineConfig cfg;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(source + ":" + std::to_string(lineno) + ": expected key = value");
        }
        apply_config_entry(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open config file: " + path);
    return parse_pipeline_config(in, path);
}

struct TrialOutcome {
    std::string model;
    int trial = 0;
    bool ok = false;
    std::string error;
    EvalReport report;
};

struct MetricSummary {
    double mean = 0, sd = 0;
    std::vector<double> values;
};

struct ModelSummary {
    std::string model;
    int n_ok = 0;
    MetricSummary auc_roc, auc_pr, partial_auc_roc, partial_auc_pr;
};

struct PipelineReport {
    std::vector<TrialOutcome> trials;
    std::vector<ModelSummary> models;
};

namespace detail {

inline MetricSummary summarize(std::vector<double> values) {
    MetricSummary s;
    s.values = values;
    if (values.empty()) return s;
    double total = 0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

}

/// Runs trials x models: per trial, generate one dataset (shared by every
/// model, so comparisons are paired), fit both groups, rank, evaluate.
/// Trials fan out across a worker pool; a failing trial/model pair is
/// recorded and the run continues.
inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    const RngHandle root{cfg.synth.seed, 0};
    const int n_trials = cfg.trials;
    const auto n_models = cfg.models.size();
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(n_trials) * n_models);

    auto run_trial = [&](int trial) {
        GroupedDataset data;
        SynthTruth truth;
        std::string generation_error;
        try {
            auto result = synth_generate(cfg.synth, root.derive(1, static_cast<std::uint64_t>(trial)));
            data = std::move(result.data);
            truth = std::move(result.truth);
        } catch (const std::exception& e) {
            generation_error = e.what();
        }
        TruthLabels labels;
        if (generation_error.empty()) {
            labels.gene_ids = truth.gene_ids;
            for (const auto& row : truth.rows) labels.de.push_back(row.de);
        }
        for (std::size_t m = 0; m < n_models; ++m) {
            TrialOutcome& out = outcomes[static_cast<std::size_t>(trial) * n_models + m];
            out.model = cfg.models[m];
            out.trial = trial;
            if (!generation_error.empty()) {
                out.error = "data generation failed: " + generation_error;
                continue;
            }
            try {
                const auto fit_rng = root.derive(2, static_cast<std::uint64_t>(trial), m);
                const auto trace_a = fit_model(out.model, data.group_a, cfg.hyper, cfg.mcmc,
                                               fit_rng.derive(0));
                const auto trace_b = fit_model(out.model, data.group_b, cfg.hyper, cfg.mcmc,
                                               fit_rng.derive(1));
                const auto ranking = rank_genes(trace_a, trace_b, cfg.hist);
                out.report = roc_pr_report(ranking, labels, cfg.tau);
                out.ok = true;
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };

    unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_trials));
    if (n_threads <= 1) {
        for (int t = 0; t < n_trials; ++t) run_trial(t);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        workers.reserve(n_threads);
        for (unsigned w = 0; w < n_threads; ++w) {
            workers.emplace_back([&]() {
                for (int t = next.fetch_add(1); t < n_trials; t = next.fetch_add(1)) {
                    run_trial(t);
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    PipelineReport report;
    report.trials = std::move(outcomes);
    for (std::size_t m = 0; m < n_models; ++m) {
        ModelSummary summary;
        summary.model = cfg.models[m];
        std::vector<double> roc, pr, proc, ppr;
        for (int t = 0; t < n_trials; ++t) {
            const auto& out = report.trials[static_cast<std::size_t>(t) * n_models + m];
            if (!out.ok) continue;
            ++summary.n_ok;
            roc.push_back(out.report.auc_roc);
            pr.push_back(out.report.auc_pr);
            proc.push_back(out.report.partial_auc_roc);
            ppr.push_back(out.report.partial_auc_pr);
        }
        summary.auc_roc = detail::summarize(roc);
        summary.auc_pr = detail::summarize(pr);
        summary.partial_auc_roc = detail::summarize(proc);
        summary.partial_auc_pr = detail::summarize(ppr);
        report.models.push_back(std::move(summary));
    }
    return report;
}

inline nlohmann::json to_json(const MetricSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"sd", s.sd}, {"values", s.values}};
}

inline nlohmann::json to_json(const PipelineReport& report, const PipelineConfig& cfg,
                              const std::string& manifest_hash) {
    nlohmann::json j;
    j["tool_version"] = tool_version;
    j["manifest"] = manifest_hash;
    j["config"] = {
        {"setup", to_string(cfg.synth.setup)},
        {"genes", cfg.synth.n_genes},
        {"replicates", cfg.synth.replicates},
        {"de_fraction", cfg.synth.de_fraction},
        {"fold_lo", cfg.synth.fold.lo},
        {"fold_hi", cfg.synth.fold.hi},
        {"up_fraction", cfg.synth.up_fraction},
        {"qc_drop_fraction", cfg.synth.qc_drop_fraction},
        {"seed", cfg.synth.seed},
        {"trials", cfg.trials},
        {"burn_in", cfg.mcmc.burn_in},
        {"retained", cfg.mcmc.retained},
        {"thin", cfg.mcmc.thin},
        {"tau", cfg.tau},
    };
    j["models"] = nlohmann::json::array();
    for (const auto& m : report.models) {
        j["models"].push_back({
            {"model", m.model},
            {"trials_ok", m.n_ok},
            {"auc_roc", to_json(m.auc_roc)},
            {"auc_pr", to_json(m.auc_pr)},
            {"partial_auc_roc", to_json(m.partial_auc_roc)},
            {"partial_auc_pr", to_json(m.partial_auc_pr)},
        });
    }
    j["failures"] = nlohmann::json::array();
    for (const auto& t : report.trials) {
        if (!t.ok) {
            j["failures"].push_back({{"model", t.model}, {"trial", t.trial}, {"error", t.error}});
        }
    }
    return j;
}

}

#endif
