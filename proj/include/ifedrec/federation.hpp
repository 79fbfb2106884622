#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ifedrec/client.hpp"
#include "ifedrec/common.hpp"
#include "ifedrec/data.hpp"
#include "ifedrec/eval.hpp"
#include "ifedrec/matrix.hpp"
#include "ifedrec/model.hpp"
#include "ifedrec/server.hpp"

namespace ifedrec {

struct TrainConfig {
    Variant variant = Variant::NCF;
    int embedding_dim = 200;
    int rounds = 100;
    double client_fraction = 1.0;   // share of clients sampled per round
    int meta_epochs = 1;            // server epochs per round
    int meta_batch = 0;             // server items per step, 0 = full batch
    int local_epochs = 1;           // client epochs per round
    int batch_size = 256;
    double meta_lr = 0.01;
    double lr_personal = 0.01;      // user embedding + predictor
    double lr_item = 0.01;          // item embedding
    double alignment_coeff = 1.0;   // 10.0 is the tuned value for pfedrec
    double ldp_scale = 0.0;
    int negative_ratio = 5;
    int eval_every = 10;
    std::uint64_t seed = 1;
    bool no_iram = false;           // freeze the attribute network, drop alignment
    std::vector<int> eval_ks = {20, 50, 100};
    bool idcg_truncate_at_k = false;

    double effective_alignment_coeff() const { return no_iram ? 0.0 : alignment_coeff; }
    IdcgMode idcg_mode() const {
        return idcg_truncate_at_k ? IdcgMode::TruncateAtK : IdcgMode::MinKRelevant;
    }

    void validate() const {
        if (embedding_dim <= 0) throw ConfigError("embedding_dim must be positive");
        if (rounds < 0) throw ConfigError("rounds must be >= 0");
        if (!(client_fraction > 0.0) || client_fraction > 1.0)
            throw ConfigError("client_fraction must be in (0, 1]");
        if (meta_epochs < 0 || local_epochs < 0) throw ConfigError("epoch counts must be >= 0");
        if (meta_batch < 0) throw ConfigError("meta_batch must be >= 0");
        if (batch_size <= 0) throw ConfigError("batch_size must be positive");
        if (!(meta_lr > 0.0) || !(lr_personal >= 0.0) || !(lr_item >= 0.0))
            throw ConfigError("learning rates must be positive (meta) / non-negative (local)");
        if (alignment_coeff < 0.0) throw ConfigError("alignment_coeff must be >= 0");
        if (ldp_scale < 0.0) throw ConfigError("ldp_scale must be >= 0");
        if (negative_ratio < 1) throw ConfigError("negative_ratio must be >= 1");
        if (eval_every <= 0) throw ConfigError("eval_every must be positive");
        if (eval_ks.empty()) throw ConfigError("eval_ks must not be empty");
    }

    ClientOpts client_opts() const {
        ClientOpts opts;
        opts.alignment_coeff = effective_alignment_coeff();
        opts.lr_personal = lr_personal;
        opts.lr_item = lr_item;
        opts.ldp_scale = ldp_scale;
        opts.batch_size = batch_size;
        opts.local_epochs = local_epochs;
        opts.negative_ratio = negative_ratio;
        return opts;
    }
};

struct EvalPass {
    int round = 0;
    std::string split;
    MetricsReport report;
};

struct TrainedSystem {
    ServerState server;
    std::vector<ClientState> clients;
    TrainConfig config;
    std::vector<EvalPass> history;
    int best_round = 0;
    std::vector<double> mean_rec_loss;  // per round, over participating clients
};

namespace detail {

inline DenseMatrix gather_rows(const DenseMatrix& source, const std::vector<int>& ids) {
    DenseMatrix out(ids.size(), source.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= source.rows)
            throw LookupError("gather_rows: row " + std::to_string(id) + " out of range");
        std::copy(source.row(static_cast<std::size_t>(id)),
                  source.row(static_cast<std::size_t>(id)) + source.cols, out.row(i));
    }
    return out;
}

// Runs fn(i) for i in [0, count) across `workers` threads. Work items touch
// disjoint state, so any worker count yields the same result.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    std::size_t n_threads = workers > 0 ? static_cast<std::size_t>(workers) : hw;
    n_threads = std::min(n_threads, count);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_threads);
    const std::size_t chunk = (count + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                const std::size_t lo = t * chunk;
                const std::size_t hi = std::min(count, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

// Ranks the given cold items for every user: the server maps their attributes
// once, each client scores the shared representations with its private
// modules. Ties break toward the smaller item id.
inline std::vector<std::vector<int>> infer_cold(const ServerState& server,
                                                const std::vector<ClientState>& clients,
                                                const Dataset& ds,
                                                const std::vector<int>& cold_ids,
                                                int workers = 0) {
    DenseMatrix cold_attrs = detail::gather_rows(ds.attributes, cold_ids);
    DenseMatrix reps = cold_representations(server, cold_attrs);
    std::vector<std::vector<int>> rankings(clients.size());
    detail::parallel_for(clients.size(), workers, [&](std::size_t u) {
        std::vector<double> scores = predict(clients[u].model, reps);
        std::vector<std::size_t> order(cold_ids.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return cold_ids[a] < cold_ids[b];
        });
        rankings[u].reserve(order.size());
        for (std::size_t i : order) rankings[u].push_back(cold_ids[i]);
    });
    return rankings;
}

inline MetricsReport evaluate_cold_split(const ServerState& server,
                                         const std::vector<ClientState>& clients,
                                         const Dataset& ds, const std::vector<int>& split_ids,
                                         const TrainConfig& config, int workers = 0) {
    std::vector<std::vector<int>> rankings = infer_cold(server, clients, ds, split_ids, workers);
    std::vector<std::unordered_set<int>> relevants(clients.size());
    for (std::size_t u = 0; u < clients.size(); ++u)
        relevants[u] = ds.cold_relevants(static_cast<int>(u), split_ids);
    return evaluate_users(rankings, relevants, config.eval_ks, config.idcg_mode());
}

// The full two-phase protocol. Each round: train the attribute network
// against the current global embedding, broadcast the warm representations,
// run the sampled clients in parallel, then average their uploads in
// ascending client-id order. Validation cold metrics are recorded on the eval
// cadence and the returned system is the snapshot of the best validation
// round. Every client owns a private RNG stream, so the trajectory is
// bit-identical for any worker count.
inline TrainedSystem run_training(const Dataset& ds, const TrainConfig& config, int workers = 0) {
    config.validate();
    if (ds.warm_items.empty()) throw ConfigError("run_training: dataset has no warm items");

    const std::size_t n = static_cast<std::size_t>(ds.num_users);
    const std::size_t d = static_cast<std::size_t>(config.embedding_dim);

    TrainedSystem system;
    system.config = config;
    system.server = make_server(ds.warm_items.size(), d, ds.attributes.cols, config.seed);

    system.clients.resize(n);
    std::vector<ClientView> views(n);
    auto warm_sorted = std::make_shared<const std::vector<int>>(ds.sorted_warm());
    for (std::size_t u = 0; u < n; ++u) {
        Rng init_rng = make_stream(config.seed, "client-init", u);
        system.clients[u].user = static_cast<int>(u);
        system.clients[u].model = make_client_model(config.variant, d, init_rng);
        system.clients[u].rng = make_stream(config.seed, "client", u);
        views[u] = make_client_view(ds, static_cast<int>(u), warm_sorted);
    }

    // p rows follow the sorted warm list; attribute rows are gathered in the
    // same order so row v of both refers to the same item.
    DenseMatrix warm_attrs = detail::gather_rows(ds.attributes, *warm_sorted);

    ServerState best_server = system.server;
    std::vector<ClientState> best_clients = system.clients;
    double best_recall = -1.0;
    int best_round = 0;
    const int selection_k = std::find(config.eval_ks.begin(), config.eval_ks.end(), 20) !=
                                    config.eval_ks.end()
                                ? 20
                                : config.eval_ks.front();

    // Ties resolve toward the latest round, so a saturated validation metric
    // still returns the most-trained snapshot.
    auto run_eval = [&](int round) {
        if (ds.cold_val_items.empty()) return;
        MetricsReport report = evaluate_cold_split(system.server, system.clients, ds,
                                                   ds.cold_val_items, config, workers);
        system.history.push_back({round, "val", report});
        const double recall = report.for_k(selection_k).recall;
        if (recall >= best_recall) {
            best_recall = recall;
            best_round = round;
            best_server = system.server;
            best_clients = system.clients;
        }
    };

    run_eval(0);

    const ClientOpts opts = config.client_opts();
    for (int round = 1; round <= config.rounds; ++round) {
        system.server.round = round;
        if (!config.no_iram)
            train_meta_network(system.server, warm_attrs, config.meta_epochs, config.meta_lr,
                               config.meta_batch);
        DenseMatrix warm_reps = attribute_representation(system.server.meta, warm_attrs);

        std::vector<int> sampled =
            sample_clients(ds.num_users, config.client_fraction, system.server.rng);

        std::vector<DenseMatrix> uploads(sampled.size());
        std::vector<double> client_losses(sampled.size(), 0.0);
        try {
            detail::parallel_for(sampled.size(), workers, [&](std::size_t i) {
                const auto u = static_cast<std::size_t>(sampled[i]);
                LocalUpdateReport report =
                    client_update(system.clients[u], system.server.global_item_embedding,
                                  warm_reps, opts, views[u]);
                double mean_loss = 0.0;
                for (double v : report.rec_loss_trace) mean_loss += v;
                if (!report.rec_loss_trace.empty())
                    mean_loss /= static_cast<double>(report.rec_loss_trace.size());
                client_losses[i] = mean_loss;
                uploads[i] = std::move(report.uploaded_item_embedding);
            });
        } catch (const std::exception& e) {
            throw TrainingError("round " + std::to_string(round) + ": " + e.what());
        }

        system.server.global_item_embedding = aggregate(uploads);

        double round_loss = 0.0;
        for (double v : client_losses) round_loss += v;
        system.mean_rec_loss.push_back(round_loss / static_cast<double>(client_losses.size()));

        if (round % config.eval_every == 0 || round == config.rounds) run_eval(round);
    }

    if (!ds.cold_val_items.empty()) {
        system.server = std::move(best_server);
        system.clients = std::move(best_clients);
        system.best_round = best_round;
    } else {
        // no validation split, nothing to select on: return the final round
        system.best_round = config.rounds;
    }
    return system;
}

// --- experiment grid -------------------------------------------------------

// Named access to the sweepable TrainConfig fields; shared by the sweep
// runner and the CLI flag overrides.
inline void set_config_field(TrainConfig& config, const std::string& key,
                             const std::string& value) {
    auto as_double = [&] {
        try {
            return std::stod(value);
        } catch (const std::exception&) {
            throw ConfigError("bad numeric value '" + value + "' for " + key);
        }
    };
    auto as_int = [&] {
        try {
            return std::stoi(value);
        } catch (const std::exception&) {
            throw ConfigError("bad integer value '" + value + "' for " + key);
        }
    };
    if (key == "variant") config.variant = parse_variant(value);
    else if (key == "d" || key == "embedding_dim") config.embedding_dim = as_int();
    else if (key == "rounds") config.rounds = as_int();
    else if (key == "alpha" || key == "client_fraction") config.client_fraction = as_double();
    else if (key == "meta_epochs" || key == "e1") config.meta_epochs = as_int();
    else if (key == "meta_batch") config.meta_batch = as_int();
    else if (key == "local_epochs" || key == "e2") config.local_epochs = as_int();
    else if (key == "batch" || key == "batch_size") config.batch_size = as_int();
    else if (key == "gamma" || key == "meta_lr") config.meta_lr = as_double();
    else if (key == "eta1" || key == "lr_personal") config.lr_personal = as_double();
    else if (key == "eta2" || key == "lr_item") config.lr_item = as_double();
    else if (key == "lambda" || key == "alignment_coeff") config.alignment_coeff = as_double();
    else if (key == "delta" || key == "ldp_scale") config.ldp_scale = as_double();
    else if (key == "neg_ratio" || key == "negative_ratio") config.negative_ratio = as_int();
    else if (key == "eval_every") config.eval_every = as_int();
    else if (key == "seed") config.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "no_iram") config.no_iram = (value == "true" || value == "1");
    else if (key == "idcg_truncate_at_k") config.idcg_truncate_at_k = (value == "true" || value == "1");
    else throw ConfigError("unknown config field '" + key + "'");
}

struct SweepCell {
    std::vector<std::pair<std::string, std::string>> assignments;

    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : assignments) {
            if (!out.empty()) out += ";";
            out += k + "=" + v;
        }
        return out;
    }
};

struct GridResult {
    SweepCell cell;
    std::uint64_t derived_seed = 0;
    bool failed = false;
    std::string error;
    int best_round = 0;
    MetricsReport val_report;
    MetricsReport test_report;
};

// Cartesian product of the sweep lists, each cell trained with a seed derived
// from the base seed plus a stable hash of the cell, then evaluated on the
// validation and test cold splits. Failed cells are recorded and the sweep
// continues.
inline std::vector<GridResult> run_experiment_grid(
    const Dataset& ds, const TrainConfig& base,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& sweep,
    int workers = 0) {
    // Validate parameter names up front so typos fail fast.
    for (const auto& [key, values] : sweep) {
        TrainConfig probe = base;
        if (values.empty()) throw ConfigError("sweep parameter '" + key + "' has no values");
        set_config_field(probe, key, values.front());
    }

    std::vector<SweepCell> cells{{}};
    for (const auto& [key, values] : sweep) {
        std::vector<SweepCell> next;
        for (const SweepCell& cell : cells)
            for (const std::string& value : values) {
                SweepCell extended = cell;
                extended.assignments.emplace_back(key, value);
                next.push_back(std::move(extended));
            }
        cells = std::move(next);
    }

    std::vector<GridResult> results;
    results.reserve(cells.size());
    for (const SweepCell& cell : cells) {
        GridResult result;
        result.cell = cell;
        result.derived_seed = cell.assignments.empty() ? base.seed
                                                       : base.seed + fnv1a64(cell.canonical());
        try {
            TrainConfig config = base;
            for (const auto& [k, v] : cell.assignments) set_config_field(config, k, v);
            config.seed = result.derived_seed;
            TrainedSystem system = run_training(ds, config, workers);
            result.best_round = system.best_round;
            if (!ds.cold_val_items.empty())
                result.val_report = evaluate_cold_split(system.server, system.clients, ds,
                                                        ds.cold_val_items, config, workers);
            result.test_report = evaluate_cold_split(system.server, system.clients, ds,
                                                     ds.cold_test_items, config, workers);
        } catch (const std::exception& e) {
            result.failed = true;
            result.error = e.what();
        }
        results.push_back(std::move(result));
    }
    return results;
}

}  // namespace ifedrec
