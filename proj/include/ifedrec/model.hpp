#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "ifedrec/common.hpp"
#include "ifedrec/matrix.hpp"
#include "ifedrec/nn.hpp"

namespace ifedrec {

enum class Variant { NCF, PFedRec };

inline const char* variant_name(Variant v) {
    return v == Variant::NCF ? "ncf" : "pfedrec";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "ncf") return Variant::NCF;
    if (s == "pfedrec") return Variant::PFedRec;
    throw ConfigError("unknown variant '" + s + "' (expected ncf or pfedrec)");
}

// One client's recommendation model. NCF scores a two-hidden-layer MLP on the
// concatenated user and item embeddings; PFedRec drops the user embedding and
// personalization lives entirely in the one-layer scorer.
struct ClientModel {
    Variant variant = Variant::NCF;
    DenseMatrix item_embedding;         // local item embedding, warm_count x d (transient)
    std::vector<double> user_embedding; // d for NCF, empty for PFedRec
    MlpParams predictor;

    std::size_t embedding_dim() const {
        return variant == Variant::NCF ? user_embedding.size()
                                       : predictor.input_dim();
    }
};

inline ClientModel make_client_model(Variant variant, std::size_t d, Rng& rng) {
    ClientModel model;
    model.variant = variant;
    if (variant == Variant::NCF) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(d));
        std::uniform_real_distribution<double> unif(-bound, bound);
        model.user_embedding.resize(d);
        for (double& v : model.user_embedding) v = unif(rng);
        const std::size_t h1 = d, h2 = std::max<std::size_t>(1, d / 2);
        model.predictor = init_mlp({2 * d, h1, h2, 1},
                                   {Activation::ReLU, Activation::ReLU, Activation::Sigmoid}, rng);
    } else {
        model.predictor = init_mlp({d, 1}, {Activation::Sigmoid}, rng);
    }
    return model;
}

// Builds the predictor input for a block of item representation rows.
inline DenseMatrix predictor_input(const ClientModel& model, const DenseMatrix& item_rows) {
    const std::size_t d = model.embedding_dim();
    if (item_rows.cols != d)
        throw DimensionError("predict: item rows " + item_rows.shape_str() +
                             " do not match embedding dim " + std::to_string(d));
    if (model.variant == Variant::PFedRec) return item_rows;
    DenseMatrix input(item_rows.rows, 2 * d);
    for (std::size_t i = 0; i < item_rows.rows; ++i) {
        double* dst = input.row(i);
        std::copy(model.user_embedding.begin(), model.user_embedding.end(), dst);
        const double* src = item_rows.row(i);
        std::copy(src, src + d, dst + d);
    }
    return input;
}

inline std::vector<double> predict_logits(const ClientModel& model, const DenseMatrix& item_rows) {
    DenseMatrix out = mlp_forward_logits(model.predictor, predictor_input(model, item_rows));
    return out.values;
}

// One score in (0,1) per item row.
inline std::vector<double> predict(const ClientModel& model, const DenseMatrix& item_rows) {
    std::vector<double> scores = predict_logits(model, item_rows);
    for (double& s : scores) s = sigmoid(s);
    return scores;
}

// Server-side map from raw item attributes to the item-embedding space.
// One linear layer; the output stays unactivated because its regression
// targets (item embeddings) are unbounded.
struct MetaAttributeNetwork {
    MlpParams net;

    std::size_t attr_dim() const { return net.input_dim(); }
    std::size_t embedding_dim() const { return net.output_dim(); }
};

inline MetaAttributeNetwork make_meta_network(std::size_t attr_dim, std::size_t d, Rng& rng) {
    MetaAttributeNetwork meta;
    meta.net = init_mlp({attr_dim, d}, {Activation::Identity}, rng);
    return meta;
}

inline DenseMatrix attribute_representation(const MetaAttributeNetwork& meta,
                                            const DenseMatrix& attr_rows) {
    if (attr_rows.rows == 0) return DenseMatrix(0, meta.embedding_dim());
    if (attr_rows.cols != meta.attr_dim())
        throw DimensionError("attribute_representation: rows " + attr_rows.shape_str() +
                             " do not match attribute dim " + std::to_string(meta.attr_dim()));
    return mlp_forward(meta.net, attr_rows);
}

}  // namespace ifedrec
