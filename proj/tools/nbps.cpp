#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "nbps/bnbp.hpp"
#include "nbps/count_matrix.hpp"
#include "nbps/error.hpp"
#include "nbps/eval.hpp"
#include "nbps/gnbp.hpp"
#include "nbps/manifest.hpp"
#include "nbps/mcmc.hpp"
#include "nbps/nbp.hpp"
#include "nbps/pipeline.hpp"
#include "nbps/ranking.hpp"
#include "nbps/synth.hpp"
#include "nbps/version.hpp"

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("NBPS_OUT_DIR");
    return env && *env ? env : ".";
}

void ensure_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
}

struct KeyValue {
    std::string key, value;
};

KeyValue split_setting(const std::string& setting) {
    const auto eq = setting.find('=');
    if (eq == std::string::npos) {
        throw std::invalid_argument("--set expects key=value, got '" + setting + "'");
    }
    return {setting.substr(0, eq), setting.substr(eq + 1)};
}

struct FitOptions {
    std::string model;
    std::string counts_path;
    std::string out_dir = default_out_dir();
    std::string prefix;
    nbps::McmcConfig mcmc;
    nbps::HyperValues hyper;
    bool binary = false;
    std::vector<std::string> settings;
};

void run_fit(const FitOptions& opt) {
    nbps::PipelineConfig hyper_holder;
    hyper_holder.hyper = opt.hyper;
    for (const auto& setting : opt.settings) {
        const auto [key, value] = split_setting(setting);
        nbps::apply_config_entry(hyper_holder, key, value);
    }

    const auto data = nbps::load_counts(opt.counts_path);
    nbps::RunManifest manifest;
    manifest.set("command", "fit");
    manifest.set("model", opt.model);
    manifest.set_file("counts", opt.counts_path);
    manifest.set("burn_in", std::to_string(opt.mcmc.burn_in));
    manifest.set("retained", std::to_string(opt.mcmc.retained));
    manifest.set("thin", std::to_string(opt.mcmc.thin));
    manifest.set("seed", std::to_string(opt.mcmc.seed));
    manifest.set("freeze_c", opt.mcmc.freeze_c ? "1" : "0");
    manifest.set("e0", nbps::format_double(hyper_holder.hyper.e0));
    manifest.set("f0", nbps::format_double(hyper_holder.hyper.f0));
    manifest.set("a0", nbps::format_double(hyper_holder.hyper.a0));
    manifest.set("b0", nbps::format_double(hyper_holder.hyper.b0));
    manifest.set("c0", nbps::format_double(hyper_holder.hyper.c0));
    manifest.set("d0", nbps::format_double(hyper_holder.hyper.d0));
    const std::string hash = manifest.hash();

    const nbps::RngHandle rng{opt.mcmc.seed, 0};
    const auto trace = nbps::fit_model(opt.model, data, hyper_holder.hyper, opt.mcmc, rng);

    ensure_dir(opt.out_dir);
    const std::string prefix = opt.prefix.empty() ? opt.model : opt.prefix;
    const std::string trace_path =
        opt.out_dir + "/" + prefix + (opt.binary ? "_trace.bin" : "_trace.csv");
    if (opt.binary) {
        nbps::write_trace_binary(trace, trace_path, hash);
    } else {
        nbps::write_trace_csv(trace, trace_path, hash);
    }
    nbps::write_diagnostics_csv(trace, opt.out_dir + "/" + prefix + "_diagnostics.csv", hash);
    std::cout << "wrote " << trace_path << " (" << trace.n_draws << " draws, manifest " << hash
              << ")\n";
}

struct RankOptions {
    std::string trace_a, trace_b;
    std::string out = default_out_dir() + "/ranking.csv";
    nbps::HistogramConfig hist;
};

void run_rank(const RankOptions& opt) {
    const auto trace_a = nbps::read_trace(opt.trace_a);
    const auto trace_b = nbps::read_trace(opt.trace_b);
    nbps::RunManifest manifest;
    manifest.set("command", "rank");
    manifest.set_file("trace_a", opt.trace_a);
    manifest.set_file("trace_b", opt.trace_b);
    manifest.set("n_bins", std::to_string(opt.hist.n_bins));
    manifest.set("epsilon", nbps::format_double(opt.hist.epsilon));
    manifest.set("whisker", nbps::format_double(opt.hist.whisker));
    const std::string hash = manifest.hash();

    std::vector<std::string> warnings;
    const auto ranking = nbps::rank_genes(trace_a, trace_b, opt.hist, &warnings);
    nbps::write_ranking_csv(ranking, opt.out, hash);
    if (!warnings.empty()) {
        std::ofstream side(opt.out + ".warnings.txt");
        for (const auto& w : warnings) side << w << '\n';
        std::cerr << warnings.size() << " warning(s); see " << opt.out << ".warnings.txt\n";
    }
    std::cout << "wrote " << opt.out << " (" << ranking.entries.size() << " genes, manifest "
              << hash << ")\n";
}

struct SimulateOptions {
    std::string spec_path;
    std::string out_dir = default_out_dir();
    std::vector<std::string> settings;
};

void run_simulate(const SimulateOptions& opt) {
    nbps::PipelineConfig cfg;
    if (!opt.spec_path.empty()) {
        cfg = nbps::load_pipeline_config(opt.spec_path);
    }
    for (const auto& setting : opt.settings) {
        const auto [key, value] = split_setting(setting);
        nbps::apply_config_entry(cfg, key, value);
    }
    cfg.synth.validate();

    nbps::RunManifest manifest;
    manifest.set("command", "simulate");
    manifest.set("setup", nbps::to_string(cfg.synth.setup));
    manifest.set("genes", std::to_string(cfg.synth.n_genes));
    manifest.set("replicates", std::to_string(cfg.synth.replicates));
    manifest.set("de_fraction", nbps::format_double(cfg.synth.de_fraction));
    manifest.set("fold_lo", nbps::format_double(cfg.synth.fold.lo));
    manifest.set("fold_hi", nbps::format_double(cfg.synth.fold.hi));
    manifest.set("up_fraction", nbps::format_double(cfg.synth.up_fraction));
    manifest.set("qc_drop_fraction", nbps::format_double(cfg.synth.qc_drop_fraction));
    manifest.set("seed", std::to_string(cfg.synth.seed));
    const std::string hash = manifest.hash();

    const auto result = nbps::synth_generate(cfg.synth, nbps::RngHandle{cfg.synth.seed, 0});
    ensure_dir(opt.out_dir);
    nbps::save_counts(result.data.group_a, opt.out_dir + "/group_a.tsv");
    nbps::save_counts(result.data.group_b, opt.out_dir + "/group_b.tsv");
    nbps::write_truth_csv(result.truth, opt.out_dir + "/truth.csv", hash);
    std::cout << "wrote " << opt.out_dir << "/group_a.tsv, group_b.tsv, truth.csv ("
              << result.truth.gene_ids.size() << " genes, manifest " << hash << ")\n";
}

struct EvaluateOptions {
    std::string ranking_path;
    std::string truth_path;
    std::string intensities_path;
    double log2_cutoff = 1.0;
    double tau = 0.1;
    std::string out = default_out_dir() + "/report.json";
    std::string curves_dir;
};

void run_evaluate(const EvaluateOptions& opt) {
    if (opt.truth_path.empty() == opt.intensities_path.empty()) {
        throw std::invalid_argument("provide exactly one of --truth or --intensities");
    }
    const auto ranking = nbps::read_ranking_csv(opt.ranking_path);
    nbps::TruthLabels labels;
    nbps::RunManifest manifest;
    manifest.set("command", "evaluate");
    manifest.set_file("ranking", opt.ranking_path);
    manifest.set("tau", nbps::format_double(opt.tau));
    if (!opt.truth_path.empty()) {
        labels = nbps::read_truth_csv(opt.truth_path);
        manifest.set_file("truth", opt.truth_path);
    } else {
        std::vector<std::string> ids;
        std::vector<double> ia, ib;
        nbps::read_intensity_csv(opt.intensities_path, ids, ia, ib);
        labels = nbps::label_from_intensity(ids, ia, ib, opt.log2_cutoff);
        manifest.set_file("intensities", opt.intensities_path);
        manifest.set("log2_cutoff", nbps::format_double(opt.log2_cutoff));
    }
    const std::string hash = manifest.hash();
    const auto report = nbps::roc_pr_report(ranking, labels, opt.tau);
    nbps::write_report_json(report, opt.out, hash);
    if (!opt.curves_dir.empty()) {
        ensure_dir(opt.curves_dir);
        nbps::write_curves_csv(report, opt.curves_dir, hash);
    }
    std::cout << "auc_roc=" << nbps::format_double(report.auc_roc)
              << " auc_pr=" << nbps::format_double(report.auc_pr) << " -> " << opt.out << '\n';
}

struct PipelineOptions {
    std::string config_path;
    std::string out_dir = default_out_dir();
    std::vector<std::string> settings;
};

void run_pipeline_cmd(const PipelineOptions& opt) {
    nbps::PipelineConfig cfg;
    if (!opt.config_path.empty()) {
        cfg = nbps::load_pipeline_config(opt.config_path);
    }
    for (const auto& setting : opt.settings) {
        const auto [key, value] = split_setting(setting);
        nbps::apply_config_entry(cfg, key, value);
    }
    cfg.validate();

    nbps::RunManifest manifest;
    manifest.set("command", "pipeline");
    manifest.set("setup", nbps::to_string(cfg.synth.setup));
    manifest.set("genes", std::to_string(cfg.synth.n_genes));
    manifest.set("replicates", std::to_string(cfg.synth.replicates));
    manifest.set("de_fraction", nbps::format_double(cfg.synth.de_fraction));
    manifest.set("fold_lo", nbps::format_double(cfg.synth.fold.lo));
    manifest.set("fold_hi", nbps::format_double(cfg.synth.fold.hi));
    manifest.set("up_fraction", nbps::format_double(cfg.synth.up_fraction));
    manifest.set("qc_drop_fraction", nbps::format_double(cfg.synth.qc_drop_fraction));
    manifest.set("seed", std::to_string(cfg.synth.seed));
    manifest.set("trials", std::to_string(cfg.trials));
    std::string model_list;
    for (const auto& m : cfg.models) model_list += m + ",";
    manifest.set("models", model_list);
    manifest.set("burn_in", std::to_string(cfg.mcmc.burn_in));
    manifest.set("retained", std::to_string(cfg.mcmc.retained));
    manifest.set("thin", std::to_string(cfg.mcmc.thin));
    manifest.set("tau", nbps::format_double(cfg.tau));
    const std::string hash = manifest.hash();

    const auto report = nbps::run_pipeline(cfg);
    ensure_dir(opt.out_dir);
    const std::string out_path = opt.out_dir + "/report.json";
    std::ofstream out(out_path);
    if (!out) throw nbps::SchemaError("cannot write report file: " + out_path);
    out << nbps::to_json(report, cfg, hash).dump(2) << '\n';

    for (const auto& m : report.models) {
        std::cout << m.model << ": auc_roc " << nbps::format_double(m.auc_roc.mean) << " +- "
                  << nbps::format_double(m.auc_roc.sd) << " auc_pr "
                  << nbps::format_double(m.auc_pr.mean) << " +- "
                  << nbps::format_double(m.auc_pr.sd) << " (" << m.n_ok << "/" << cfg.trials
                  << " trials)\n";
    }
    std::cout << "wrote " << out_path << " (manifest " << hash << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Negative binomial process samplers for differential expression analysis"};
    app.set_version_flag("--version", nbps::tool_version);
    app.require_subcommand(1);

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit one model to one group's counts");
    fit_cmd->add_option("--model", fit.model, "nbp | nbp-scaled | gnbp | bnbp")->required();
    fit_cmd->add_option("--counts", fit.counts_path, "counts table (TSV/CSV)")->required();
    fit_cmd->add_option("--out-dir", fit.out_dir, "output directory");
    fit_cmd->add_option("--prefix", fit.prefix, "output file prefix (default: model name)");
    fit_cmd->add_option("--burn-in", fit.mcmc.burn_in, "burn-in sweeps");
    fit_cmd->add_option("--retained", fit.mcmc.retained, "retained draws");
    fit_cmd->add_option("--thin", fit.mcmc.thin, "thinning interval");
    fit_cmd->add_option("--seed", fit.mcmc.seed, "RNG seed");
    fit_cmd->add_flag("--freeze-c", fit.mcmc.freeze_c, "freeze the BNBP concentration parameter");
    fit_cmd->add_flag("--binary", fit.binary, "write the compact binary trace format");
    fit_cmd->add_option("--set", fit.settings, "hyperparameter override key=value (e0..d0)");

    RankOptions rank;
    auto* rank_cmd = app.add_subcommand("rank", "Rank genes by symmetric KL between two traces");
    rank_cmd->add_option("--trace-a", rank.trace_a, "group A trace file")->required();
    rank_cmd->add_option("--trace-b", rank.trace_b, "group B trace file")->required();
    rank_cmd->add_option("--out", rank.out, "ranking CSV path");
    rank_cmd->add_option("--bins", rank.hist.n_bins, "histogram bins");
    rank_cmd->add_option("--epsilon", rank.hist.epsilon, "KL stabilizer");
    rank_cmd->add_option("--whisker", rank.hist.whisker, "quartile whisker multiplier");

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic two-group dataset");
    sim_cmd->add_option("--spec", sim.spec_path, "key = value scenario file");
    sim_cmd->add_option("--out-dir", sim.out_dir, "output directory");
    sim_cmd->add_option("--set", sim.settings, "scenario override key=value");

    EvaluateOptions eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a ranking against ground truth");
    eval_cmd->add_option("--ranking", eval.ranking_path, "ranking CSV")->required();
    eval_cmd->add_option("--truth", eval.truth_path, "truth CSV (gene_id,de,...)");
    eval_cmd->add_option("--intensities", eval.intensities_path,
                         "intensity CSV (gene_id,intensity_a,intensity_b)");
    eval_cmd->add_option("--log2-cutoff", eval.log2_cutoff, "log2 ratio cutoff for intensities");
    eval_cmd->add_option("--tau", eval.tau, "partial-area limit");
    eval_cmd->add_option("--out", eval.out, "report JSON path");
    eval_cmd->add_option("--curves-dir", eval.curves_dir, "directory for plot-ready curve CSVs");

    PipelineOptions pipe;
    auto* pipe_cmd =
        app.add_subcommand("pipeline", "Simulate, fit, rank and evaluate across trials");
    pipe_cmd->add_option("--config", pipe.config_path, "key = value pipeline configuration");
    pipe_cmd->add_option("--out-dir", pipe.out_dir, "output directory");
    pipe_cmd->add_option("--set", pipe.settings, "configuration override key=value");

    try {
        app.parse(argc, argv);
        if (*fit_cmd) run_fit(fit);
        if (*rank_cmd) run_rank(rank);
        if (*sim_cmd) run_simulate(sim);
        if (*eval_cmd) run_evaluate(eval);
        if (*pipe_cmd) run_pipeline_cmd(pipe);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const nbps::NumericalError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    } catch (const nbps::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const nbps::SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
