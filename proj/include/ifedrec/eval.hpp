#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

#include "ifedrec/common.hpp"

namespace ifedrec {

// IDCG normalization: the ideal ranking is truncated at min(k, |relevant|)
// by default; TruncateAtK keeps the denominator sum running to k.
enum class IdcgMode { MinKRelevant, TruncateAtK };

struct MetricsReport {
    struct Entry {
        int k = 0;
        double recall = 0.0;
        double precision = 0.0;
        double ndcg = 0.0;
    };
    std::vector<Entry> at;
    std::size_t evaluated_users = 0;

    const Entry& for_k(int k) const {
        for (const Entry& e : at)
            if (e.k == k) return e;
        throw LookupError("metrics report has no entry for k=" + std::to_string(k));
    }
};

namespace detail {
inline void check_ranking(const std::vector<int>& ranked, const std::unordered_set<int>& relevant) {
    if (relevant.empty()) throw DomainError("metric: relevant set is empty");
    std::unordered_set<int> seen;
    seen.reserve(ranked.size());
    for (int id : ranked)
        if (!seen.insert(id).second)
            throw DataError("metric: duplicate item id " + std::to_string(id) + " in ranking");
}

inline std::size_t hits_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                             int k) {
    const std::size_t top = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < top; ++i)
        if (relevant.count(ranked[i])) ++hits;
    return hits;
}
}  // namespace detail

inline double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                          int k) {
    detail::check_ranking(ranked, relevant);
    return static_cast<double>(detail::hits_at_k(ranked, relevant, k)) /
           static_cast<double>(relevant.size());
}

// Denominator stays k even when fewer items exist.
inline double precision_at_k(const std::vector<int>& ranked,
                             const std::unordered_set<int>& relevant, int k) {
    detail::check_ranking(ranked, relevant);
    return static_cast<double>(detail::hits_at_k(ranked, relevant, k)) / static_cast<double>(k);
}

inline double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                        int k, IdcgMode mode = IdcgMode::MinKRelevant) {
    detail::check_ranking(ranked, relevant);
    const std::size_t top = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
    double dcg = 0.0;
    for (std::size_t i = 0; i < top; ++i)
        if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    const std::size_t ideal = mode == IdcgMode::MinKRelevant
                                  ? std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size())
                                  : static_cast<std::size_t>(k);
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

// Mean over users holding at least one relevant item; users without any are
// excluded from every denominator.
inline MetricsReport evaluate_users(const std::vector<std::vector<int>>& rankings,
                                    const std::vector<std::unordered_set<int>>& relevants,
                                    const std::vector<int>& ks,
                                    IdcgMode mode = IdcgMode::MinKRelevant) {
    if (rankings.size() != relevants.size())
        throw DimensionError("evaluate_users: " + std::to_string(rankings.size()) +
                             " rankings vs " + std::to_string(relevants.size()) + " relevant sets");
    MetricsReport report;
    for (int k : ks) report.at.push_back({k, 0.0, 0.0, 0.0});
    for (std::size_t u = 0; u < rankings.size(); ++u) {
        if (relevants[u].empty()) continue;
        ++report.evaluated_users;
        for (MetricsReport::Entry& e : report.at) {
            e.recall += recall_at_k(rankings[u], relevants[u], e.k);
            e.precision += precision_at_k(rankings[u], relevants[u], e.k);
            e.ndcg += ndcg_at_k(rankings[u], relevants[u], e.k, mode);
        }
    }
    if (report.evaluated_users == 0)
        throw DataError("evaluate_users: no user with a non-empty relevant set");
    for (MetricsReport::Entry& e : report.at) {
        e.recall /= static_cast<double>(report.evaluated_users);
        e.precision /= static_cast<double>(report.evaluated_users);
        e.ndcg /= static_cast<double>(report.evaluated_users);
    }
    return report;
}

}  // namespace ifedrec
