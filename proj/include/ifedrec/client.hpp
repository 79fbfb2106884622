#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ifedrec/common.hpp"
#include "ifedrec/data.hpp"
#include "ifedrec/matrix.hpp"
#include "ifedrec/model.hpp"
#include "ifedrec/nn.hpp"

namespace ifedrec {

// Everything a client is allowed to know about the data: its own warm
// interactions plus the warm item universe (for negative sampling). No raw
// attributes, no cold interactions, no other user's records ever cross this
// boundary — the privacy audit in the tests leans on exactly this type.
struct ClientView {
    int user = 0;
    std::shared_ptr<const std::vector<int>> warm_items;  // sorted warm universe
    std::vector<int> positives;                          // own warm interactions, sorted
};

inline ClientView make_client_view(const Dataset& ds, int user,
                                   std::shared_ptr<const std::vector<int>> warm) {
    ClientView view;
    view.user = user;
    view.warm_items = std::move(warm);
    view.positives = ds.warm_interactions(user);
    return view;
}

inline NegativeSampleBatch sample_negatives(const ClientView& view, int ratio, Rng& rng) {
    std::vector<int> pool;
    pool.reserve(view.warm_items->size());
    std::set_difference(view.warm_items->begin(), view.warm_items->end(), view.positives.begin(),
                        view.positives.end(), std::back_inserter(pool));
    return sample_negatives_from(view.positives, pool, view.user, ratio, rng);
}

// User embedding, predictor and the client RNG persist across rounds; the
// local item embedding is re-seeded from the broadcast global one each round.
struct ClientState {
    int user = 0;
    ClientModel model;
    Rng rng;
};

struct LocalUpdateReport {
    DenseMatrix uploaded_item_embedding;  // final local embedding, noised when requested
    std::vector<double> rec_loss_trace;
    std::vector<double> alignment_trace;
    int batches_processed = 0;
};

struct ClientOpts {
    double alignment_coeff = 1.0;  // weight of the embedding alignment term
    double lr_personal = 0.01;     // user embedding + predictor
    double lr_item = 0.01;         // item embedding
    double ldp_scale = 0.0;        // Laplace noise on the upload, 0 = off
    int batch_size = 256;
    int local_epochs = 1;
    int negative_ratio = 5;
};

// Mean squared distance between the local item embedding and the broadcast
// attribute representation; the gradient flows to the embedding only, the
// representation is a constant within the round.
inline std::pair<double, DenseMatrix> alignment_penalty(const DenseMatrix& item_embedding,
                                                        const DenseMatrix& representation) {
    if (!item_embedding.same_shape(representation))
        throw DimensionError("alignment_penalty: embedding " + item_embedding.shape_str() +
                             " vs representation " + representation.shape_str());
    if (item_embedding.rows == 0) throw DimensionError("alignment_penalty: empty embedding");
    const double inv_m = 1.0 / static_cast<double>(item_embedding.rows);
    double penalty = 0.0;
    DenseMatrix grad(item_embedding.rows, item_embedding.cols);
    for (std::size_t i = 0; i < item_embedding.values.size(); ++i) {
        const double d = item_embedding.values[i] - representation.values[i];
        penalty += d * d;
        grad.values[i] = 2.0 * inv_m * d;
    }
    return {penalty * inv_m, std::move(grad)};
}

struct LocalGrads {
    double total_loss = 0.0;
    double rec_loss = 0.0;
    double penalty = 0.0;
    DenseMatrix item_embedding_grad;        // warm_count x d
    std::vector<double> user_embedding_grad;  // empty for PFedRec
    GradientBundle predictor_grad;
};

// A batch of (warm item position, label) pairs. Positions index rows of the
// local item embedding, i.e. the warm list, not raw item ids.
struct TrainingBatch {
    std::vector<int> item_positions;
    std::vector<double> labels;
};

// Total local loss: binary cross-entropy over the batch plus the alignment
// term at coefficient lambda, with gradients for every trainable tensor.
inline LocalGrads local_loss(const ClientModel& model, const TrainingBatch& batch,
                             const DenseMatrix& representation, double lambda) {
    if (lambda < 0.0) throw DomainError("local_loss: negative alignment coefficient");
    LocalGrads out;
    const std::size_t m = model.item_embedding.rows;
    const std::size_t d = model.item_embedding.cols;
    out.item_embedding_grad = DenseMatrix(m, d);

    if (!batch.item_positions.empty()) {
        DenseMatrix item_rows(batch.item_positions.size(), d);
        for (std::size_t i = 0; i < batch.item_positions.size(); ++i) {
            const int pos = batch.item_positions[i];
            if (pos < 0 || static_cast<std::size_t>(pos) >= m)
                throw LookupError("local_loss: warm position " + std::to_string(pos) +
                                  " out of range");
            std::copy(model.item_embedding.row(static_cast<std::size_t>(pos)),
                      model.item_embedding.row(static_cast<std::size_t>(pos)) + d,
                      item_rows.row(i));
        }
        DenseMatrix input = predictor_input(model, item_rows);
        DenseMatrix logits = mlp_forward_logits(model.predictor, input);
        auto [rec_loss, dz] = bce_from_logits(logits.values, batch.labels);
        out.rec_loss = rec_loss;
        DenseMatrix dz_mat(logits.rows, logits.cols);
        dz_mat.values = std::move(dz);
        auto [pred_grads, input_grad] =
            mlp_backward_from_logits(model.predictor, input, dz_mat);
        out.predictor_grad = std::move(pred_grads);
        if (model.variant == Variant::NCF) {
            out.user_embedding_grad.assign(d, 0.0);
            for (std::size_t i = 0; i < input_grad.rows; ++i) {
                const double* row = input_grad.row(i);
                for (std::size_t j = 0; j < d; ++j) out.user_embedding_grad[j] += row[j];
                double* dst = out.item_embedding_grad.row(
                    static_cast<std::size_t>(batch.item_positions[i]));
                for (std::size_t j = 0; j < d; ++j) dst[j] += row[d + j];
            }
        } else {
            for (std::size_t i = 0; i < input_grad.rows; ++i) {
                const double* row = input_grad.row(i);
                double* dst = out.item_embedding_grad.row(
                    static_cast<std::size_t>(batch.item_positions[i]));
                for (std::size_t j = 0; j < d; ++j) dst[j] += row[j];
            }
        }
    } else {
        // Alignment-only client: no recommendation loss this round, so the
        // personal modules have no gradient.
        out.predictor_grad.layers.resize(model.predictor.layers.size());
        for (std::size_t l = 0; l < model.predictor.layers.size(); ++l) {
            const MlpLayer& lay = model.predictor.layers[l];
            out.predictor_grad.layers[l].weight = DenseMatrix(lay.weight.rows, lay.weight.cols);
            out.predictor_grad.layers[l].bias.assign(lay.bias.size(), 0.0);
        }
        if (model.variant == Variant::NCF) out.user_embedding_grad.assign(d, 0.0);
    }

    if (lambda > 0.0) {
        auto [penalty, pen_grad] = alignment_penalty(model.item_embedding, representation);
        out.penalty = penalty;
        axpy(out.item_embedding_grad, lambda, pen_grad);
    } else if (!model.item_embedding.same_shape(representation)) {
        throw DimensionError("local_loss: embedding " + model.item_embedding.shape_str() +
                             " vs representation " + representation.shape_str());
    }
    out.total_loss = out.rec_loss + lambda * out.penalty;
    if (!std::isfinite(out.total_loss))
        throw TrainingError("local_loss: non-finite loss on a batch of " +
                            std::to_string(batch.item_positions.size()) + " samples");
    return out;
}

// Element-wise Laplace(0, scale) noise on the upload; scale 0 is the identity
// and consumes no randomness.
inline DenseMatrix apply_ldp(const DenseMatrix& item_embedding, double scale, Rng& rng) {
    if (scale < 0.0) throw DomainError("apply_ldp: negative noise scale");
    if (scale == 0.0) return item_embedding;
    DenseMatrix noised = item_embedding;
    axpy(noised, 1.0, laplace_sample(rng, scale, noised.rows, noised.cols));
    return noised;
}

// One client round: re-seed the local item embedding from the broadcast
// global one, resample negatives, then for each epoch and batch first tune
// the personal modules with the item embedding frozen and afterwards tune the
// item embedding with the personal modules frozen — two separate gradient
// evaluations per batch. The upload is noised when a noise scale is set.
inline LocalUpdateReport client_update(ClientState& state, const DenseMatrix& global_embedding,
                                       const DenseMatrix& representation, const ClientOpts& opts,
                                       const ClientView& view) {
    if (!global_embedding.same_shape(representation))
        throw DimensionError("client_update: global embedding " + global_embedding.shape_str() +
                             " vs representation " + representation.shape_str());
    if (opts.batch_size <= 0) throw ConfigError("client_update: batch size must be positive");
    state.model.item_embedding = global_embedding;

    NegativeSampleBatch negatives = sample_negatives(view, opts.negative_ratio, state.rng);

    // Warm ids -> embedding row positions.
    const std::vector<int>& warm = *view.warm_items;
    auto position_of = [&](int item) {
        auto it = std::lower_bound(warm.begin(), warm.end(), item);
        if (it == warm.end() || *it != item)
            throw LookupError("client_update: item " + std::to_string(item) + " is not warm");
        return static_cast<int>(it - warm.begin());
    };

    std::vector<std::pair<int, double>> samples;
    samples.reserve(negatives.positives.size() + negatives.negatives.size());
    for (int item : negatives.positives) samples.emplace_back(position_of(item), 1.0);
    for (int item : negatives.negatives) samples.emplace_back(position_of(item), 0.0);

    LocalUpdateReport report;
    const bool bce_possible = !negatives.positives.empty() && !negatives.negatives.empty();

    std::vector<TrainingBatch> batches;
    if (bce_possible) {
        std::shuffle(samples.begin(), samples.end(), state.rng);
        const auto bs = static_cast<std::size_t>(opts.batch_size);
        for (std::size_t start = 0; start < samples.size(); start += bs) {
            TrainingBatch batch;
            const std::size_t end = std::min(samples.size(), start + bs);
            for (std::size_t i = start; i < end; ++i) {
                batch.item_positions.push_back(samples[i].first);
                batch.labels.push_back(samples[i].second);
            }
            batches.push_back(std::move(batch));
        }
    } else {
        batches.push_back(TrainingBatch{});  // alignment-only step per epoch
    }

    for (int epoch = 0; epoch < opts.local_epochs; ++epoch) {
        for (const TrainingBatch& batch : batches) {
            LocalGrads personal = local_loss(state.model, batch, representation,
                                             opts.alignment_coeff);
            if (!personal.user_embedding_grad.empty())
                sgd_step(state.model.user_embedding, personal.user_embedding_grad,
                         opts.lr_personal, "user embedding");
            sgd_step(state.model.predictor, personal.predictor_grad, opts.lr_personal);

            LocalGrads item = local_loss(state.model, batch, representation,
                                         opts.alignment_coeff);
            sgd_step(state.model.item_embedding, item.item_embedding_grad, opts.lr_item,
                     "item embedding");

            report.rec_loss_trace.push_back(personal.rec_loss);
            report.alignment_trace.push_back(personal.penalty);
            ++report.batches_processed;
        }
    }

    report.uploaded_item_embedding = apply_ldp(state.model.item_embedding, opts.ldp_scale,
                                               state.rng);
    return report;
}

}  // namespace ifedrec
