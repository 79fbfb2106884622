#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ifedrec/common.hpp"
#include "ifedrec/matrix.hpp"

namespace ifedrec {

enum class Activation { Identity, ReLU, Sigmoid };

struct MlpLayer {
    DenseMatrix weight;        // in_dim x out_dim
    std::vector<double> bias;  // out_dim
    Activation activation = Activation::Identity;
};

struct MlpParams {
    std::vector<MlpLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols; }

    void validate() const {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const MlpLayer& lay = layers[l];
            if (lay.bias.size() != lay.weight.cols)
                throw DimensionError("mlp layer " + std::to_string(l) + ": bias size " +
                                     std::to_string(lay.bias.size()) + " != output dim " +
                                     std::to_string(lay.weight.cols));
            if (l > 0 && layers[l - 1].weight.cols != lay.weight.rows)
                throw DimensionError("mlp layer " + std::to_string(l) + ": input dim " +
                                     std::to_string(lay.weight.rows) + " does not chain from " +
                                     std::to_string(layers[l - 1].weight.cols));
        }
    }
};

// Per-layer gradients, shape-matched to MlpParams.
struct GradientBundle {
    struct LayerGrad {
        DenseMatrix weight;
        std::vector<double> bias;
    };
    std::vector<LayerGrad> layers;
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Sigmoid: return sigmoid(z);
    }
    return z;
}

// Derivative expressed through the activated value where possible.
inline double activation_derivative(Activation a, double pre, double post) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return post * (1.0 - post);
    }
    return 1.0;
}

namespace detail {

struct ForwardCache {
    // pre[l] and post[l] are the pre-activation and activated output of layer l.
    std::vector<DenseMatrix> pre;
    std::vector<DenseMatrix> post;
};

inline DenseMatrix forward_layer(const MlpLayer& layer, const DenseMatrix& input) {
    DenseMatrix z = matmul(input, layer.weight);
    for (std::size_t i = 0; i < z.rows; ++i) {
        double* zr = z.row(i);
        for (std::size_t j = 0; j < z.cols; ++j) zr[j] += layer.bias[j];
    }
    return z;
}

inline DenseMatrix forward_cached(const MlpParams& params, const DenseMatrix& input,
                                  ForwardCache& cache) {
    if (params.layers.empty()) throw DimensionError("mlp_forward: network has no layers");
    if (input.cols != params.input_dim())
        throw DimensionError("mlp_forward: input " + input.shape_str() +
                             " does not match first layer input dim " +
                             std::to_string(params.input_dim()));
    cache.pre.clear();
    cache.post.clear();
    const DenseMatrix* cur = &input;
    for (const MlpLayer& layer : params.layers) {
        DenseMatrix z = forward_layer(layer, *cur);
        DenseMatrix a(z.rows, z.cols);
        for (std::size_t i = 0; i < z.values.size(); ++i)
            a.values[i] = apply_activation(layer.activation, z.values[i]);
        cache.pre.push_back(std::move(z));
        cache.post.push_back(std::move(a));
        cur = &cache.post.back();
    }
    return cache.post.back();
}

// Shared backward walk; `delta` on entry is the gradient w.r.t. the last
// layer's pre-activation.
inline std::pair<GradientBundle, DenseMatrix> backward_from_delta(
    const MlpParams& params, const DenseMatrix& input, const ForwardCache& cache,
    DenseMatrix delta) {
    GradientBundle grads;
    grads.layers.resize(params.layers.size());
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const MlpLayer& layer = params.layers[li];
        const DenseMatrix& layer_input = li == 0 ? input : cache.post[li - 1];
        grads.layers[li].weight = matmul_tn(layer_input, delta);
        grads.layers[li].bias = column_sums(delta);
        DenseMatrix din = matmul_nt(delta, layer.weight);
        if (li > 0) {
            const MlpLayer& prev = params.layers[li - 1];
            const DenseMatrix& pre = cache.pre[li - 1];
            const DenseMatrix& post = cache.post[li - 1];
            for (std::size_t i = 0; i < din.values.size(); ++i)
                din.values[i] *=
                    activation_derivative(prev.activation, pre.values[i], post.values[i]);
        }
        delta = std::move(din);
    }
    return {std::move(grads), std::move(delta)};
}

}  // namespace detail

inline DenseMatrix mlp_forward(const MlpParams& params, const DenseMatrix& input) {
    detail::ForwardCache cache;
    return detail::forward_cached(params, input, cache);
}

// Forward pass that stops before the last layer's activation. Training goes
// through this so the binary cross-entropy can be taken on raw scores.
inline DenseMatrix mlp_forward_logits(const MlpParams& params, const DenseMatrix& input) {
    detail::ForwardCache cache;
    detail::forward_cached(params, input, cache);
    return cache.pre.back();
}

// Gradients of a scalar loss w.r.t. every parameter and the input, given the
// loss gradient at the (activated) network output.
inline std::pair<GradientBundle, DenseMatrix> mlp_backward(const MlpParams& params,
                                                           const DenseMatrix& input,
                                                           const DenseMatrix& upstream_grad) {
    detail::ForwardCache cache;
    DenseMatrix out = detail::forward_cached(params, input, cache);
    if (!upstream_grad.same_shape(out))
        throw DimensionError("mlp_backward: upstream grad " + upstream_grad.shape_str() +
                             " does not match output " + out.shape_str());
    const MlpLayer& last = params.layers.back();
    DenseMatrix delta(upstream_grad.rows, upstream_grad.cols);
    const DenseMatrix& pre = cache.pre.back();
    for (std::size_t i = 0; i < delta.values.size(); ++i)
        delta.values[i] = upstream_grad.values[i] *
                          activation_derivative(last.activation, pre.values[i], out.values[i]);
    return detail::backward_from_delta(params, input, cache, std::move(delta));
}

// Same walk but the upstream gradient is taken w.r.t. the last layer's
// pre-activation, skipping the output nonlinearity.
inline std::pair<GradientBundle, DenseMatrix> mlp_backward_from_logits(
    const MlpParams& params, const DenseMatrix& input, const DenseMatrix& logit_grad) {
    detail::ForwardCache cache;
    detail::forward_cached(params, input, cache);
    if (!logit_grad.same_shape(cache.pre.back()))
        throw DimensionError("mlp_backward_from_logits: grad " + logit_grad.shape_str() +
                             " does not match output " + cache.pre.back().shape_str());
    return detail::backward_from_delta(params, input, cache, logit_grad);
}

// Binary cross-entropy on probabilities. The returned gradient is taken
// w.r.t. the pre-sigmoid score, which is (p - y) per element. Out-of-range
// predictions are a caller error; nothing is clamped here.
inline std::pair<double, std::vector<double>> bce_loss_and_grad(
    const std::vector<double>& predictions, const std::vector<double>& labels) {
    if (predictions.size() != labels.size())
        throw DimensionError("bce: " + std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(labels.size()) + " labels");
    double loss = 0.0;
    std::vector<double> grad(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = predictions[i];
        if (!(p > 0.0 && p < 1.0))
            throw DomainError("bce: prediction " + std::to_string(p) + " at index " +
                              std::to_string(i) + " outside (0,1)");
        const double y = labels[i];
        loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        grad[i] = p - y;
    }
    return {loss, std::move(grad)};
}

// Numerically stable BCE straight from raw scores:
// loss = sum softplus(z) - y*z, d loss / dz = sigmoid(z) - y.
inline std::pair<double, std::vector<double>> bce_from_logits(const std::vector<double>& logits,
                                                              const std::vector<double>& labels) {
    if (logits.size() != labels.size())
        throw DimensionError("bce_from_logits: " + std::to_string(logits.size()) + " logits vs " +
                             std::to_string(labels.size()) + " labels");
    double loss = 0.0;
    std::vector<double> grad(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const double y = labels[i];
        const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        loss += softplus - y * z;
        grad[i] = sigmoid(z) - y;
    }
    return {loss, std::move(grad)};
}

// Mean over rows, sum over columns: loss = (1/rows) * sum_ij (pred-target)^2.
inline std::pair<double, DenseMatrix> mse_loss_and_grad(const DenseMatrix& predicted,
                                                        const DenseMatrix& target) {
    if (!predicted.same_shape(target))
        throw DimensionError("mse: predicted " + predicted.shape_str() + " vs target " +
                             target.shape_str());
    if (predicted.rows == 0) throw DimensionError("mse: empty matrices");
    const double inv_m = 1.0 / static_cast<double>(predicted.rows);
    double loss = 0.0;
    DenseMatrix grad(predicted.rows, predicted.cols);
    for (std::size_t i = 0; i < predicted.values.size(); ++i) {
        const double d = predicted.values[i] - target.values[i];
        loss += d * d;
        grad.values[i] = 2.0 * inv_m * d;
    }
    return {loss * inv_m, std::move(grad)};
}

namespace detail {
inline void step_tensor(std::vector<double>& param, const std::vector<double>& grad, double lr,
                        const std::string& name) {
    if (param.size() != grad.size())
        throw DimensionError("sgd_step: " + name + " gradient size mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) {
        if (!std::isfinite(grad[i]))
            throw TrainingError("sgd_step: non-finite gradient in " + name);
        param[i] -= lr * grad[i];
    }
}
}  // namespace detail

inline void sgd_step(DenseMatrix& param, const DenseMatrix& grad, double lr,
                     const std::string& name = "matrix") {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("sgd_step: bad learning rate");
    if (!param.same_shape(grad))
        throw DimensionError("sgd_step: " + name + " shape " + param.shape_str() + " vs grad " +
                             grad.shape_str());
    detail::step_tensor(param.values, grad.values, lr, name);
}

inline void sgd_step(std::vector<double>& param, const std::vector<double>& grad, double lr,
                     const std::string& name = "vector") {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("sgd_step: bad learning rate");
    detail::step_tensor(param, grad, lr, name);
}

inline void sgd_step(MlpParams& params, const GradientBundle& grads, double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("sgd_step: bad learning rate");
    if (grads.layers.size() != params.layers.size())
        throw DimensionError("sgd_step: gradient bundle has " +
                             std::to_string(grads.layers.size()) + " layers, params have " +
                             std::to_string(params.layers.size()));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const std::string tag = "layer " + std::to_string(l);
        sgd_step(params.layers[l].weight, grads.layers[l].weight, lr, tag + " weight");
        detail::step_tensor(params.layers[l].bias, grads.layers[l].bias, lr, tag + " bias");
    }
}

// i.i.d. Laplace(0, scale) via the inverse-CDF transform
// x = -scale * sign(u) * ln(1 - 2|u|), u ~ Uniform(-0.5, 0.5).
inline DenseMatrix laplace_sample(Rng& rng, double scale, std::size_t rows, std::size_t cols) {
    if (scale < 0.0 || !std::isfinite(scale))
        throw DomainError("laplace_sample: negative scale " + std::to_string(scale));
    DenseMatrix out(rows, cols);
    if (scale == 0.0) return out;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (double& v : out.values) {
        double u;
        do {
            u = unif(rng) - 0.5;
        } while (1.0 - 2.0 * std::abs(u) <= 0.0);
        const double mag = -scale * std::log(1.0 - 2.0 * std::abs(u));
        v = u < 0.0 ? -mag : mag;
    }
    return out;
}

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
inline MlpLayer init_layer(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng) {
    MlpLayer layer;
    layer.weight = DenseMatrix(in_dim, out_dim);
    layer.bias.assign(out_dim, 0.0);
    layer.activation = act;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (double& w : layer.weight.values) w = unif(rng);
    return layer;
}

inline MlpParams init_mlp(const std::vector<std::size_t>& dims,
                          const std::vector<Activation>& acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw ConfigError("init_mlp: need n+1 dims for n activations");
    MlpParams params;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        params.layers.push_back(init_layer(dims[l], dims[l + 1], acts[l], rng));
    return params;
}

}  // namespace ifedrec
