#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "ifedrec/common.hpp"
#include "ifedrec/matrix.hpp"
#include "ifedrec/model.hpp"
#include "ifedrec/nn.hpp"

namespace ifedrec {

// Server holds only the aggregated item embedding and the attribute network.
// No server operation takes interaction records; that boundary is part of the
// contract and is audited in the tests.
struct ServerState {
    DenseMatrix global_item_embedding;  // warm_count x d
    MetaAttributeNetwork meta;
    long round = 0;
    Rng rng;
};

inline ServerState make_server(std::size_t warm_count, std::size_t d, std::size_t attr_dim,
                               std::uint64_t seed) {
    ServerState server;
    server.rng = make_stream(seed, "server");
    Rng init_rng = make_stream(seed, "server-init");
    server.global_item_embedding = DenseMatrix(warm_count, d);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (double& v : server.global_item_embedding.values) v = unif(init_rng);
    server.meta = make_meta_network(attr_dim, d, init_rng);
    return server;
}

// ceil(fraction * n) distinct client ids, uniform without replacement,
// returned in ascending order. Products that are integers up to rounding
// noise are treated as exact.
inline std::vector<int> sample_clients(int num_clients, double fraction, Rng& rng) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("sample_clients: fraction " + std::to_string(fraction) +
                          " outside (0, 1]");
    const double product = fraction * num_clients;
    int count = static_cast<int>(std::ceil(product));
    if (std::abs(product - std::round(product)) < 1e-9)
        count = static_cast<int>(std::round(product));
    count = std::min(count, num_clients);
    std::vector<int> ids(static_cast<std::size_t>(num_clients));
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                        ids.size() - 1);
        std::swap(ids[static_cast<std::size_t>(i)], ids[pick(rng)]);
    }
    ids.resize(static_cast<std::size_t>(count));
    std::sort(ids.begin(), ids.end());
    return ids;
}

// Element-wise mean of the uploads. Callers pass the list in ascending
// client-id order, which fixes the floating-point summation order and makes
// the result bit-deterministic.
inline DenseMatrix aggregate(const std::vector<DenseMatrix>& uploads) {
    if (uploads.empty()) throw TrainingError("aggregate: empty upload list");
    DenseMatrix sum = uploads.front();
    for (std::size_t i = 1; i < uploads.size(); ++i) {
        if (!uploads[i].same_shape(sum))
            throw DimensionError("aggregate: upload " + std::to_string(i) + " is " +
                                 uploads[i].shape_str() + ", expected " + sum.shape_str());
        axpy(sum, 1.0, uploads[i]);
    }
    const double inv = 1.0 / static_cast<double>(uploads.size());
    for (double& v : sum.values) v *= inv;
    sum.ensure_finite("aggregate");
    return sum;
}

// Gradient descent of the attribute network against the global item
// embedding, which is held constant. Full-batch by default; a positive
// batch size chunks the items in order (one step per chunk) for large warm
// sets. Returns the per-epoch loss trace.
inline std::vector<double> train_meta_network(ServerState& server, const DenseMatrix& warm_attrs,
                                              int epochs, double lr, int batch = 0) {
    if (!(lr > 0.0)) throw ConfigError("train_meta_network: learning rate must be positive");
    if (batch < 0) throw ConfigError("train_meta_network: negative batch size");
    if (warm_attrs.rows != server.global_item_embedding.rows)
        throw DimensionError("train_meta_network: " + std::to_string(warm_attrs.rows) +
                             " attribute rows vs " +
                             std::to_string(server.global_item_embedding.rows) + " embeddings");
    const std::size_t m = warm_attrs.rows;
    const std::size_t chunk = batch == 0 ? m : std::min<std::size_t>(m, static_cast<std::size_t>(batch));
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(epochs));
    for (int e = 0; e < epochs; ++e) {
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < m; start += chunk) {
            const std::size_t rows = std::min(chunk, m - start);
            DenseMatrix attrs_part(rows, warm_attrs.cols);
            DenseMatrix target_part(rows, server.global_item_embedding.cols);
            std::copy(warm_attrs.row(start), warm_attrs.row(start) + rows * warm_attrs.cols,
                      attrs_part.values.begin());
            std::copy(server.global_item_embedding.row(start),
                      server.global_item_embedding.row(start) +
                          rows * server.global_item_embedding.cols,
                      target_part.values.begin());
            DenseMatrix predicted = attribute_representation(server.meta, attrs_part);
            auto [loss, grad] = mse_loss_and_grad(predicted, target_part);
            if (!std::isfinite(loss))
                throw TrainingError("train_meta_network: non-finite loss at epoch " +
                                    std::to_string(e));
            auto [net_grads, ignored] = mlp_backward(server.meta.net, attrs_part, grad);
            sgd_step(server.meta.net, net_grads, lr);
            epoch_loss += loss * static_cast<double>(rows);
        }
        trace.push_back(epoch_loss / static_cast<double>(m));
    }
    return trace;
}

// Attribute representations for cold items; a pure forward pass.
inline DenseMatrix cold_representations(const ServerState& server, const DenseMatrix& cold_attrs) {
    return attribute_representation(server.meta, cold_attrs);
}

}  // namespace ifedrec
