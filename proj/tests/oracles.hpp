// Independent reference implementations used as test oracles. Everything in
// here is deliberately written straight-line, without reusing the library's
// computation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "ifedrec/matrix.hpp"
#include "ifedrec/model.hpp"
#include "ifedrec/nn.hpp"

namespace oracle {

// --- finite differences -----------------------------------------------------

// Central finite difference of a scalar function w.r.t. one scalar slot.
inline double central_difference(const std::function<double()>& f, double* slot,
                                 double h = 1e-5) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = f();
    *slot = saved - h;
    const double down = f();
    *slot = saved;
    return (up - down) / (2.0 * h);
}

// Finite differences are only valid where the function is smooth; a ReLU
// kink inside the probe interval poisons the estimate while the analytic
// subgradient stays correct. Two detectors: two step sizes must agree, and
// the forward/backward one-sided slopes must agree (a kink exactly at the
// evaluation point fools the first check but not the second).
struct FdEstimate {
    double value = 0.0;
    bool smooth = true;
};

inline FdEstimate central_difference_checked(const std::function<double()>& f, double* slot,
                                             double h = 1e-5) {
    const double saved = *slot;
    const double base = f();
    *slot = saved + h;
    const double up = f();
    *slot = saved - h;
    const double down = f();
    *slot = saved;
    const double coarse = (up - down) / (2.0 * h);
    const double fine = central_difference(f, slot, h / 2.0);
    const double fwd = (up - base) / h;
    const double bwd = (base - down) / h;
    FdEstimate est;
    est.value = fine;
    const bool steps_agree =
        std::abs(coarse - fine) <= 1e-4 * std::max({1.0, std::abs(coarse), std::abs(fine)});
    const bool sides_agree =
        std::abs(fwd - bwd) <= 5e-3 * std::max({1.0, std::abs(fwd), std::abs(bwd)});
    est.smooth = steps_agree && sides_agree;
    return est;
}

inline double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline std::vector<double*> collect_params(ifedrec::MlpParams& params) {
    std::vector<double*> slots;
    for (ifedrec::MlpLayer& layer : params.layers) {
        for (double& w : layer.weight.values) slots.push_back(&w);
        for (double& b : layer.bias) slots.push_back(&b);
    }
    return slots;
}

inline std::vector<double> flatten(const ifedrec::GradientBundle& grads) {
    std::vector<double> out;
    for (const auto& layer : grads.layers) {
        out.insert(out.end(), layer.weight.values.begin(), layer.weight.values.end());
        out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    }
    return out;
}

// --- straight-line MLP re-evaluation ----------------------------------------

// Plain per-element loops, no matmul helper, no caches.
inline std::vector<double> mlp_eval_row(const ifedrec::MlpParams& params,
                                        const std::vector<double>& input) {
    std::vector<double> current = input;
    for (const ifedrec::MlpLayer& layer : params.layers) {
        std::vector<double> next(layer.weight.cols, 0.0);
        for (std::size_t j = 0; j < layer.weight.cols; ++j) {
            double z = layer.bias[j];
            for (std::size_t i = 0; i < layer.weight.rows; ++i)
                z += current[i] * layer.weight(i, j);
            switch (layer.activation) {
                case ifedrec::Activation::Identity: next[j] = z; break;
                case ifedrec::Activation::ReLU: next[j] = z > 0 ? z : 0; break;
                case ifedrec::Activation::Sigmoid: next[j] = 1.0 / (1.0 + std::exp(-z)); break;
            }
        }
        current = std::move(next);
    }
    return current;
}

// --- ranking metrics ---------------------------------------------------------

inline double brute_recall(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                           int k) {
    int hits = 0;
    for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i)
        hits += relevant.count(ranked[static_cast<std::size_t>(i)]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

inline double brute_precision(const std::vector<int>& ranked,
                              const std::unordered_set<int>& relevant, int k) {
    int hits = 0;
    for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i)
        hits += relevant.count(ranked[static_cast<std::size_t>(i)]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(k);
}

inline double brute_ndcg(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                         int k) {
    double dcg = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i)
        if (relevant.count(ranked[static_cast<std::size_t>(i)]))
            dcg += std::log(2.0) / std::log(static_cast<double>(i) + 2.0);
    const int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
    double idcg = 0.0;
    for (int i = 0; i < ideal; ++i) idcg += std::log(2.0) / std::log(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

// --- least squares via normal equations --------------------------------------

// Solves min_W ||Z W - T||_F^2 with Z = [X | 1] by Gaussian elimination on
// Z^T Z W = Z^T T, and returns the mean (over rows) summed squared residual.
inline double least_squares_loss(const ifedrec::DenseMatrix& x, const ifedrec::DenseMatrix& t) {
    const std::size_t n = x.rows, p = x.cols + 1, q = t.cols;
    std::vector<std::vector<double>> z(n, std::vector<double>(p, 1.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) z[i][j] = x(i, j);

    std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
    std::vector<std::vector<double>> rhs(p, std::vector<double>(q, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a[r][c] += z[i][r] * z[i][c];
            for (std::size_t c = 0; c < q; ++c) rhs[r][c] += z[i][r] * t(i, c);
        }

    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(rhs[col], rhs[pivot]);
        const double diag = a[col][col];
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col || a[r][col] == 0.0) continue;
            const double factor = a[r][col] / diag;
            for (std::size_t c = 0; c < p; ++c) a[r][c] -= factor * a[col][c];
            for (std::size_t c = 0; c < q; ++c) rhs[r][c] -= factor * rhs[col][c];
        }
    }
    std::vector<std::vector<double>> w(p, std::vector<double>(q));
    for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < q; ++c) w[r][c] = rhs[r][c] / a[r][r];

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < q; ++c) {
            double pred = 0.0;
            for (std::size_t r = 0; r < p; ++r) pred += z[i][r] * w[r][c];
            const double d = pred - t(i, c);
            loss += d * d;
        }
    return loss / static_cast<double>(n);
}

// --- rank correlation ---------------------------------------------------------

inline std::vector<double> ranks_with_ties(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::vector<double> rx = ranks_with_ties(xs);
    const std::vector<double> ry = ranks_with_ties(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

}  // namespace oracle
