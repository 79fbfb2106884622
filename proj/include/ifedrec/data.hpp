#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "ifedrec/common.hpp"
#include "ifedrec/matrix.hpp"

namespace ifedrec {

// Items are split into warm (training), cold validation and cold test sets.
// Interactions cover all items: warm ones drive training, cold ones are the
// evaluation ground truth and never reach a client during training.
struct Dataset {
    int num_users = 0;
    DenseMatrix attributes;  // total_items x attr_dim
    std::vector<int> warm_items;
    std::vector<int> cold_val_items;
    std::vector<int> cold_test_items;
    std::vector<std::vector<int>> interactions;  // per user, sorted, no duplicates

    int num_items() const { return static_cast<int>(attributes.rows); }

    void validate() const {
        const std::size_t total = attributes.rows;
        std::vector<char> seen(total, 0);
        auto mark = [&](const std::vector<int>& ids, const char* name) {
            for (int id : ids) {
                if (id < 0 || static_cast<std::size_t>(id) >= total)
                    throw DataError(std::string(name) + " item " + std::to_string(id) +
                                    " has no attribute row");
                if (seen[static_cast<std::size_t>(id)]++)
                    throw DataError("item " + std::to_string(id) + " appears in two splits");
            }
        };
        mark(warm_items, "warm");
        mark(cold_val_items, "cold_val");
        mark(cold_test_items, "cold_test");
        for (std::size_t id = 0; id < total; ++id)
            if (!seen[id])
                throw DataError("item " + std::to_string(id) + " missing from every split");
        if (warm_items.empty()) throw ConfigError("warm item set is empty");
        if (static_cast<int>(interactions.size()) != num_users)
            throw DataError("interaction lists do not cover every user");
        for (std::size_t u = 0; u < interactions.size(); ++u) {
            const std::vector<int>& items = interactions[u];
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (items[i] < 0 || static_cast<std::size_t>(items[i]) >= total)
                    throw DataError("user " + std::to_string(u) + " interacted with unknown item " +
                                    std::to_string(items[i]));
                if (i > 0 && items[i] <= items[i - 1])
                    throw DataError("user " + std::to_string(u) +
                                    " interactions not sorted / contain duplicates");
            }
        }
        sorted_warm();  // warm the cache; the dataset is shared read-only after this
    }

    // Interacted warm items of one user (sorted).
    std::vector<int> warm_interactions(int user) const {
        check_user(user);
        std::vector<int> out;
        const std::vector<int>& mine = interactions[static_cast<std::size_t>(user)];
        std::set_intersection(mine.begin(), mine.end(), sorted_warm().begin(),
                              sorted_warm().end(), std::back_inserter(out));
        return out;
    }

    // Relevant cold items of one user restricted to a split.
    std::unordered_set<int> cold_relevants(int user, const std::vector<int>& split_ids) const {
        check_user(user);
        std::unordered_set<int> split(split_ids.begin(), split_ids.end());
        std::unordered_set<int> out;
        for (int id : interactions[static_cast<std::size_t>(user)])
            if (split.count(id)) out.insert(id);
        return out;
    }

    const std::vector<int>& sorted_warm() const {
        if (sorted_warm_.size() != warm_items.size()) {
            sorted_warm_ = warm_items;
            std::sort(sorted_warm_.begin(), sorted_warm_.end());
        }
        return sorted_warm_;
    }

    void check_user(int user) const {
        if (user < 0 || user >= num_users)
            throw LookupError("unknown user " + std::to_string(user));
    }

  private:
    mutable std::vector<int> sorted_warm_;
};

struct ExplicitSplit {
    std::vector<int> warm, val, test;
};

struct RatioSplit {
    std::uint64_t seed = 0;
    double warm = 0.8, val = 0.06, test = 0.14;
};

using SplitSpec = std::variant<ExplicitSplit, RatioSplit>;

struct NegativeSampleBatch {
    int user = 0;
    std::vector<int> positives;
    std::vector<int> negatives;
    bool pool_exhausted = false;  // negatives ran short of ratio * |positives|
};

namespace detail {

// Val/test counts round down, remainder goes to warm. The assignment is a
// pure function of (seed, item universe).
inline void ratio_split(int total_items, const RatioSplit& spec, std::vector<int>& warm,
                        std::vector<int>& val, std::vector<int>& test) {
    if (spec.warm < 0 || spec.val < 0 || spec.test < 0 ||
        std::abs(spec.warm + spec.val + spec.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative and sum to 1");
    std::vector<int> ids(static_cast<std::size_t>(total_items));
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng = make_stream(spec.seed, "item-split");
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_val = static_cast<std::size_t>(spec.val * total_items);
    const auto n_test = static_cast<std::size_t>(spec.test * total_items);
    val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val),
                ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    warm.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), ids.end());
    std::sort(warm.begin(), warm.end());
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());
}

// First `count` elements of a partial Fisher-Yates shuffle: uniform draws
// without replacement.
inline std::vector<int> draw_without_replacement(std::vector<int> pool, std::size_t count,
                                                 Rng& rng) {
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(count);
    return pool;
}

inline std::vector<int> parse_id_list(const std::string& text, const std::string& context) {
    std::vector<int> out;
    std::string token;
    std::stringstream ss(text);
    while (std::getline(ss, token, ',')) {
        std::size_t a = token.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = token.find_last_not_of(" \t\r");
        try {
            out.push_back(std::stoi(token.substr(a, b - a + 1)));
        } catch (const std::exception&) {
            throw DataError(context + ": bad item id '" + token + "'");
        }
    }
    return out;
}

}  // namespace detail

// Interactions file: one `user<TAB>item` pair per line, 0-based ids.
// Attributes file: header `num_items num_dims`, then one row of reals per item.
// Split file: lines `warm:`, `val:`, `test:` followed by comma-separated ids.
inline Dataset load_dataset(const std::string& interactions_path,
                            const std::string& attributes_path, const SplitSpec& split) {
    Dataset ds;

    std::ifstream attr(attributes_path);
    if (!attr) throw IoError("cannot open attributes file " + attributes_path);
    std::size_t n_items = 0, n_dims = 0;
    {
        std::string header;
        if (!std::getline(attr, header)) throw DataError(attributes_path + ":1: missing header");
        std::istringstream hs(header);
        if (!(hs >> n_items >> n_dims))
            throw DataError(attributes_path + ":1: header must be 'num_items num_dims'");
    }
    ds.attributes = DenseMatrix(n_items, n_dims);
    for (std::size_t i = 0; i < n_items; ++i) {
        std::string line;
        if (!std::getline(attr, line))
            throw DataError(attributes_path + ":" + std::to_string(i + 2) +
                            ": missing attribute row");
        std::istringstream ls(line);
        for (std::size_t j = 0; j < n_dims; ++j)
            if (!(ls >> ds.attributes(i, j)))
                throw DataError(attributes_path + ":" + std::to_string(i + 2) +
                                ": expected " + std::to_string(n_dims) + " values");
    }

    std::ifstream inter(interactions_path);
    if (!inter) throw IoError("cannot open interactions file " + interactions_path);
    std::vector<std::pair<int, int>> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(inter, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        int user = -1, item = -1;
        if (!(ls >> user >> item))
            throw DataError(interactions_path + ":" + std::to_string(lineno) +
                            ": expected 'user<TAB>item'");
        if (user < 0)
            throw DataError(interactions_path + ":" + std::to_string(lineno) + ": negative user id");
        if (item < 0 || static_cast<std::size_t>(item) >= n_items)
            throw DataError(interactions_path + ":" + std::to_string(lineno) +
                            ": interaction references unknown item " + std::to_string(item));
        pairs.emplace_back(user, item);
    }
    int max_user = -1;
    for (const auto& [u, v] : pairs) max_user = std::max(max_user, u);
    ds.num_users = max_user + 1;
    ds.interactions.assign(static_cast<std::size_t>(ds.num_users), {});
    for (const auto& [u, v] : pairs) ds.interactions[static_cast<std::size_t>(u)].push_back(v);
    for (std::vector<int>& items : ds.interactions) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
    }

    if (const auto* explicit_split = std::get_if<ExplicitSplit>(&split)) {
        ds.warm_items = explicit_split->warm;
        ds.cold_val_items = explicit_split->val;
        ds.cold_test_items = explicit_split->test;
    } else {
        detail::ratio_split(static_cast<int>(n_items), std::get<RatioSplit>(split), ds.warm_items,
                            ds.cold_val_items, ds.cold_test_items);
    }
    ds.validate();
    return ds;
}

inline SplitSpec load_split_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open split file " + path);
    ExplicitSplit split;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string context = path + ":" + std::to_string(lineno);
        auto colon = line.find(':');
        if (colon == std::string::npos) throw DataError(context + ": expected 'name: ids'");
        const std::string name = line.substr(0, colon);
        const std::string rest = line.substr(colon + 1);
        if (name == "warm")
            split.warm = detail::parse_id_list(rest, context);
        else if (name == "val")
            split.val = detail::parse_id_list(rest, context);
        else if (name == "test")
            split.test = detail::parse_id_list(rest, context);
        else
            throw DataError(context + ": unknown split '" + name + "'");
    }
    return split;
}

// Warm items the user never interacted with; cold items never appear.
inline std::vector<int> uninteracted_items(const Dataset& ds, int user) {
    ds.check_user(user);
    const std::vector<int>& mine = ds.interactions[static_cast<std::size_t>(user)];
    const std::vector<int>& warm = ds.sorted_warm();
    std::vector<int> out;
    out.reserve(warm.size());
    std::set_difference(warm.begin(), warm.end(), mine.begin(), mine.end(),
                        std::back_inserter(out));
    return out;
}

// min(ratio * |positives|, pool size) negatives, uniform without replacement,
// redrawn fresh on every call.
inline NegativeSampleBatch sample_negatives_from(const std::vector<int>& positives,
                                                 const std::vector<int>& pool, int user, int ratio,
                                                 Rng& rng) {
    if (ratio < 1) throw ConfigError("negative sampling ratio must be >= 1");
    NegativeSampleBatch batch;
    batch.user = user;
    batch.positives = positives;
    const std::size_t want = positives.size() * static_cast<std::size_t>(ratio);
    batch.negatives = detail::draw_without_replacement(pool, want, rng);
    batch.pool_exhausted = batch.negatives.size() < want;
    std::sort(batch.negatives.begin(), batch.negatives.end());
    return batch;
}

inline NegativeSampleBatch sample_negatives(const Dataset& ds, int user, int ratio, Rng& rng) {
    return sample_negatives_from(ds.warm_interactions(user), uninteracted_items(ds, user), user,
                                 ratio, rng);
}

// Synthetic data with planted structure: user/item factors drawn from a
// Gaussian, attributes a noisy linear image of the item factors, interactions
// the top warm items per user under the planted dot-product score, and cold
// relevance the top cold items under the same score. Attribute-to-preference
// transfer is therefore learnable by construction.
struct SyntheticConfig {
    int num_users = 200;
    int num_items = 400;
    int latent_dim = 8;
    int attr_dim = 32;
    double attr_noise = 0.1;
    int interactions_per_user = 25;
    int cold_positives_per_user = 10;
    double warm_ratio = 0.6, val_ratio = 0.1, test_ratio = 0.3;
};

struct PlantedModel {
    DenseMatrix user_factors;  // n x k
    DenseMatrix item_factors;  // items x k
    DenseMatrix attr_map;      // k x attr_dim

    double score(int user, int item) const {
        double acc = 0.0;
        const double* u = user_factors.row(static_cast<std::size_t>(user));
        const double* v = item_factors.row(static_cast<std::size_t>(item));
        for (std::size_t t = 0; t < user_factors.cols; ++t) acc += u[t] * v[t];
        return acc;
    }

    std::uint64_t hash() const {
        std::uint64_t h = fnv1a64(user_factors.values.data(),
                                  user_factors.values.size() * sizeof(double));
        h = fnv1a64(item_factors.values.data(), item_factors.values.size() * sizeof(double), h);
        h = fnv1a64(attr_map.values.data(), attr_map.values.size() * sizeof(double), h);
        return h;
    }
};

namespace detail {
inline std::vector<int> top_scored(const PlantedModel& planted, int user,
                                   const std::vector<int>& candidates, int count) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(candidates.size());
    for (int id : candidates) scored.emplace_back(planted.score(user, id), id);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> out;
    const std::size_t take = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
    return out;
}
}  // namespace detail

inline std::pair<Dataset, PlantedModel> generate_synthetic(const SyntheticConfig& cfg,
                                                           std::uint64_t seed) {
    if (cfg.num_users <= 0 || cfg.num_items <= 0) throw ConfigError("synthetic: empty universe");
    if (cfg.latent_dim > cfg.attr_dim)
        throw ConfigError("synthetic: latent dim " + std::to_string(cfg.latent_dim) +
                          " exceeds attribute dim " + std::to_string(cfg.attr_dim));

    PlantedModel planted;
    Rng rng = make_stream(seed, "synthetic");
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto fill_gauss = [&](DenseMatrix& m, double scale) {
        for (double& v : m.values) v = gauss(rng) * scale;
    };
    planted.user_factors = DenseMatrix(static_cast<std::size_t>(cfg.num_users),
                                       static_cast<std::size_t>(cfg.latent_dim));
    planted.item_factors = DenseMatrix(static_cast<std::size_t>(cfg.num_items),
                                       static_cast<std::size_t>(cfg.latent_dim));
    planted.attr_map = DenseMatrix(static_cast<std::size_t>(cfg.latent_dim),
                                   static_cast<std::size_t>(cfg.attr_dim));
    fill_gauss(planted.user_factors, 1.0);
    fill_gauss(planted.item_factors, 1.0);
    // Scaled so the attribute covariance has a unit-order spectrum; keeps
    // regressions on these attributes well-conditioned for any dim choice.
    fill_gauss(planted.attr_map, 1.0 / std::sqrt(static_cast<double>(cfg.attr_dim)));

    Dataset ds;
    ds.num_users = cfg.num_users;
    ds.attributes = matmul(planted.item_factors, planted.attr_map);
    if (cfg.attr_noise > 0.0)
        for (double& v : ds.attributes.values) v += gauss(rng) * cfg.attr_noise;

    RatioSplit split{seed, cfg.warm_ratio, cfg.val_ratio, cfg.test_ratio};
    detail::ratio_split(cfg.num_items, split, ds.warm_items, ds.cold_val_items,
                        ds.cold_test_items);
    if (cfg.interactions_per_user > static_cast<int>(ds.warm_items.size()))
        throw ConfigError("synthetic: interactions_per_user " +
                          std::to_string(cfg.interactions_per_user) + " exceeds warm count " +
                          std::to_string(ds.warm_items.size()));

    std::vector<int> cold_ids = ds.cold_val_items;
    cold_ids.insert(cold_ids.end(), ds.cold_test_items.begin(), ds.cold_test_items.end());
    std::sort(cold_ids.begin(), cold_ids.end());

    ds.interactions.assign(static_cast<std::size_t>(cfg.num_users), {});
    for (int u = 0; u < cfg.num_users; ++u) {
        std::vector<int> items =
            detail::top_scored(planted, u, ds.sorted_warm(), cfg.interactions_per_user);
        std::vector<int> cold =
            detail::top_scored(planted, u, cold_ids, cfg.cold_positives_per_user);
        items.insert(items.end(), cold.begin(), cold.end());
        std::sort(items.begin(), items.end());
        ds.interactions[static_cast<std::size_t>(u)] = std::move(items);
    }
    ds.validate();
    return {std::move(ds), std::move(planted)};
}

inline void save_interactions(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (int u = 0; u < ds.num_users; ++u)
        for (int item : ds.interactions[static_cast<std::size_t>(u)])
            out << u << '\t' << item << '\n';
}

inline void save_attributes(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    out << ds.attributes.rows << ' ' << ds.attributes.cols << '\n';
    for (std::size_t i = 0; i < ds.attributes.rows; ++i) {
        for (std::size_t j = 0; j < ds.attributes.cols; ++j) {
            if (j) out << ' ';
            out << ds.attributes(i, j);
        }
        out << '\n';
    }
}

inline void save_split(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    auto emit = [&](const char* name, const std::vector<int>& ids) {
        out << name << ':';
        for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : " ") << ids[i];
        out << '\n';
    };
    emit("warm", ds.warm_items);
    emit("val", ds.cold_val_items);
    emit("test", ds.cold_test_items);
}

}  // namespace ifedrec
