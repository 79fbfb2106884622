#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ifedrec/checkpoint.hpp"
#include "ifedrec/common.hpp"
#include "ifedrec/data.hpp"
#include "ifedrec/experiment.hpp"
#include "ifedrec/federation.hpp"

namespace ifedrec {

// Exit codes: 0 ok, 2 config error, 3 data error, 4 training error.
enum ExitCode { kOk = 0, kUsage = 1, kConfigError = 2, kDataError = 3, kTrainingError = 4 };

struct CliOptions {
    std::string subcommand;
    std::string config_path;
    std::string checkpoint_path;
    std::string out_dir_override;
    int workers = 0;
    std::vector<std::pair<std::string, std::string>> overrides;
};

namespace cli_detail {

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

inline nlohmann::json metric_record(int round, const std::string& split,
                                    const MetricsReport::Entry& entry, const std::string& hash,
                                    std::uint64_t seed) {
    return nlohmann::json{{"round", round},         {"split", split},
                          {"k", entry.k},           {"recall", entry.recall},
                          {"precision", entry.precision}, {"ndcg", entry.ndcg},
                          {"config_hash", hash},    {"seed", seed}};
}

// Human-readable table; metrics in units of 1e-2.
inline std::string summary_table(const std::vector<EvalPass>& passes, const std::string& header) {
    std::ostringstream out;
    out << header << "\n";
    out << "round  split  k    recall  precision  ndcg   (x 1e-2)\n";
    for (const EvalPass& pass : passes)
        for (const MetricsReport::Entry& e : pass.report.at) {
            char line[128];
            std::snprintf(line, sizeof(line), "%-6d %-6s %-4d %7.2f %9.2f %7.2f\n", pass.round,
                          pass.split.c_str(), e.k, e.recall * 100.0, e.precision * 100.0,
                          e.ndcg * 100.0);
            out << line;
        }
    return out.str();
}

inline std::filesystem::path ensure_out_dir(const ExperimentConfig& config) {
    std::filesystem::path dir(config.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());
    return dir;
}

}  // namespace cli_detail

inline int cmd_generate(const ExperimentConfig& config) {
    if (!config.dataset.synthetic)
        throw ConfigError("generate requires a synthetic dataset section");
    auto [ds, planted] = generate_synthetic(config.dataset.syn, config.dataset.syn_seed);
    const std::filesystem::path dir = cli_detail::ensure_out_dir(config);
    save_interactions(ds, (dir / "interactions.tsv").string());
    save_attributes(ds, (dir / "attributes.txt").string());
    save_split(ds, (dir / "split.txt").string());
    nlohmann::json manifest{
        {"seed", config.dataset.syn_seed},
        {"users", config.dataset.syn.num_users},
        {"items", config.dataset.syn.num_items},
        {"latent_dim", config.dataset.syn.latent_dim},
        {"attr_dim", config.dataset.syn.attr_dim},
        {"attr_noise", config.dataset.syn.attr_noise},
        {"interactions_per_user", config.dataset.syn.interactions_per_user},
        {"cold_positives_per_user", config.dataset.syn.cold_positives_per_user},
        {"planted_model_hash", hex64(planted.hash())},
        {"files", {"interactions.tsv", "attributes.txt", "split.txt"}},
    };
    cli_detail::write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    std::cout << "wrote synthetic dataset to " << dir.string() << " (planted model "
              << hex64(planted.hash()) << ")\n";
    return kOk;
}

inline int cmd_train(const ExperimentConfig& config, int workers = 0) {
    config.validate();
    Dataset ds = realize_dataset(config);
    const std::string hash = config_hash(config);
    const std::filesystem::path dir = cli_detail::ensure_out_dir(config);

    TrainedSystem system = run_training(ds, config.train, workers);

    std::vector<EvalPass> passes = system.history;
    if (!ds.cold_test_items.empty()) {
        MetricsReport test = evaluate_cold_split(system.server, system.clients, ds,
                                                 ds.cold_test_items, config.train, workers);
        passes.push_back({system.best_round, "test", test});
    }

    std::ostringstream records;
    for (const EvalPass& pass : passes)
        for (const MetricsReport::Entry& e : pass.report.at)
            records << cli_detail::metric_record(pass.round, pass.split, e, hash,
                                                 config.train.seed)
                           .dump()
                    << "\n";
    cli_detail::write_text((dir / "metrics.jsonl").string(), records.str());

    std::string header = std::string("variant = ") + variant_name(config.train.variant);
    if (config.train.no_iram) header += " (ablation: no-iram)";
    header += "  best_round = " + std::to_string(system.best_round) + "  config = " + hash;
    const std::string table = cli_detail::summary_table(passes, header);
    cli_detail::write_text((dir / "summary.txt").string(), table);
    std::cout << table;

    save_system(system, (dir / "checkpoint.bin").string(),
                serialize_experiment_config(config));
    return kOk;
}

inline int cmd_sweep(const ExperimentConfig& config, int workers = 0) {
    config.validate();
    if (config.sweep.empty())
        std::cerr << "sweep: no sweep section, running the base config once\n";
    Dataset ds = realize_dataset(config);
    const std::string hash = config_hash(config);
    const std::filesystem::path dir = cli_detail::ensure_out_dir(config);

    std::vector<GridResult> results = run_experiment_grid(ds, config.train, config.sweep, workers);

    std::ostringstream tsv;
    tsv << "cell\tseed\tstatus\trounds_to_best_val";
    for (int k : config.train.eval_ks)
        tsv << "\trecall@" << k << "\tprecision@" << k << "\tndcg@" << k;
    tsv << "\tconfig_hash\n";
    for (const GridResult& r : results) {
        tsv << (r.cell.assignments.empty() ? "base" : r.cell.canonical()) << "\t"
            << r.derived_seed << "\t" << (r.failed ? "failed" : "ok") << "\t" << r.best_round;
        for (int k : config.train.eval_ks) {
            if (r.failed) {
                tsv << "\t-\t-\t-";
            } else {
                const MetricsReport::Entry& e = r.test_report.for_k(k);
                tsv << "\t" << detail::format_double(e.recall) << "\t"
                    << detail::format_double(e.precision) << "\t"
                    << detail::format_double(e.ndcg);
            }
        }
        tsv << "\t" << hash << "\n";
        if (r.failed) std::cerr << "cell " << r.cell.canonical() << " failed: " << r.error << "\n";
    }
    cli_detail::write_text((dir / "sweep.tsv").string(), tsv.str());

    std::cout << "sweep: " << results.size() << " cells -> " << (dir / "sweep.tsv").string()
              << "  (test metrics, x 1e-2)\n";
    for (const GridResult& r : results) {
        if (r.failed) continue;
        const MetricsReport::Entry& e = r.test_report.for_k(config.train.eval_ks.front());
        char line[160];
        std::snprintf(line, sizeof(line), "%-40s recall@%d %6.2f  best_round %d\n",
                      (r.cell.assignments.empty() ? "base" : r.cell.canonical()).c_str(), e.k,
                      e.recall * 100.0, r.best_round);
        std::cout << line;
    }
    return kOk;
}

inline int cmd_eval(const ExperimentConfig& config, const std::string& checkpoint_path,
                    int workers = 0) {
    if (checkpoint_path.empty()) throw ConfigError("eval requires --checkpoint");
    Dataset ds = realize_dataset(config);
    TrainedSystem system = load_system(checkpoint_path);
    const std::string hash = config_hash(config);
    const std::filesystem::path dir = cli_detail::ensure_out_dir(config);

    std::vector<EvalPass> passes;
    if (!ds.cold_val_items.empty())
        passes.push_back({system.best_round, "val",
                          evaluate_cold_split(system.server, system.clients, ds,
                                              ds.cold_val_items, config.train, workers)});
    if (!ds.cold_test_items.empty())
        passes.push_back({system.best_round, "test",
                          evaluate_cold_split(system.server, system.clients, ds,
                                              ds.cold_test_items, config.train, workers)});

    std::ostringstream records;
    for (const EvalPass& pass : passes)
        for (const MetricsReport::Entry& e : pass.report.at)
            records << cli_detail::metric_record(pass.round, pass.split, e, hash,
                                                 config.train.seed)
                           .dump()
                    << "\n";
    cli_detail::write_text((dir / "metrics.jsonl").string(), records.str());
    const std::string table = cli_detail::summary_table(
        passes, "checkpoint " + checkpoint_path + "  config = " + hash);
    cli_detail::write_text((dir / "summary.txt").string(), table);
    std::cout << table;
    return kOk;
}

inline CliOptions parse_cli(const std::vector<std::string>& args) {
    CliOptions opts;
    if (args.empty()) throw ConfigError("missing subcommand (generate|train|sweep|eval)");
    opts.subcommand = args[0];
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
        const std::string key = arg.substr(2);
        if (key == "ablation") {
            if (i + 1 >= args.size()) throw ConfigError("--ablation needs a value");
            const std::string value = args[++i];
            if (value != "no-iram") throw ConfigError("unknown ablation '" + value + "'");
            opts.overrides.emplace_back("no_iram", "true");
            continue;
        }
        if (i + 1 >= args.size()) throw ConfigError("flag --" + key + " needs a value");
        const std::string value = args[++i];
        if (key == "config") opts.config_path = value;
        else if (key == "checkpoint") opts.checkpoint_path = value;
        else if (key == "out") opts.out_dir_override = value;
        else if (key == "workers") opts.workers = detail::to_int(value, key);
        else opts.overrides.emplace_back(key, value);
    }
    return opts;
}

// Applies a --key value override to whichever section owns the key.
inline void apply_override(ExperimentConfig& config, const std::string& key,
                           const std::string& value, bool& lambda_given) {
    if (key == "ks") {
        config.train.eval_ks.clear();
        for (const std::string& k : detail::split_ws(value))
            config.train.eval_ks.push_back(detail::to_int(k, key));
        return;
    }
    try {
        set_config_field(config.train, key, value);
        if (key == "lambda" || key == "alignment_coeff") lambda_given = true;
        return;
    } catch (const ConfigError& e) {
        if (std::string(e.what()).find("unknown config field") == std::string::npos) throw;
    }
    set_dataset_field(config.dataset, key, value);
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
    try {
        CliOptions opts = parse_cli(args);
        ExperimentConfig config;
        bool lambda_given = false;
        if (!opts.config_path.empty()) {
            config = load_experiment_config(opts.config_path);
            lambda_given = config.lambda_given;
        }
        for (const auto& [key, value] : opts.overrides)
            apply_override(config, key, value, lambda_given);
        if (!lambda_given)
            config.train.alignment_coeff = config.train.variant == Variant::PFedRec ? 10.0 : 1.0;
        config.lambda_given = true;
        if (const char* env = std::getenv("IFEDREC_OUT"); env && *env) config.output_dir = env;
        if (!opts.out_dir_override.empty()) config.output_dir = opts.out_dir_override;

        if (opts.subcommand == "generate") return cmd_generate(config);
        if (opts.subcommand == "train") return cmd_train(config, opts.workers);
        if (opts.subcommand == "sweep") return cmd_sweep(config, opts.workers);
        if (opts.subcommand == "eval") return cmd_eval(config, opts.checkpoint_path, opts.workers);
        throw ConfigError("unknown subcommand '" + opts.subcommand + "'");
    } catch (const ConfigError& e) {
        err << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
        return kConfigError;
    } catch (const DataError& e) {
        err << nlohmann::json{{"error", "data"}, {"message", e.what()}}.dump() << "\n";
        return kDataError;
    } catch (const IoError& e) {
        err << nlohmann::json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        err << nlohmann::json{{"error", "training"}, {"message", e.what()}}.dump() << "\n";
        return kTrainingError;
    }
}

}  // namespace ifedrec
