#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_set>

#include "ifedrec/eval.hpp"
#include "oracles.hpp"

using namespace ifedrec;
using Catch::Approx;

TEST_CASE("recall_at_k hand cases") {
    CHECK(recall_at_k({1, 2, 3}, {1, 2}, 3) == Approx(1.0));
    CHECK(recall_at_k({5, 6, 7}, {1, 2}, 3) == Approx(0.0));
    CHECK(recall_at_k({3, 1, 2}, {1, 4}, 2) == Approx(0.5));
    CHECK_THROWS_AS(recall_at_k({1, 1}, {1}, 2), DataError);
    CHECK_THROWS_AS(recall_at_k({1, 2}, {}, 2), DomainError);
}

TEST_CASE("precision_at_k hand cases") {
    CHECK(precision_at_k({1, 2}, {1, 2}, 2) == Approx(1.0));
    CHECK(precision_at_k({3, 1, 2}, {1, 4}, 2) == Approx(0.5));
    // catalog smaller than k keeps denominator at k
    CHECK(precision_at_k({9}, {9}, 20) == Approx(0.05));
}

TEST_CASE("ndcg_at_k hand cases") {
    CHECK(ndcg_at_k({1, 2, 3}, {1, 2, 3}, 3) == Approx(1.0));
    // relevant item at rank 2 of 2: (1/log2(3)) / (1/log2(2))
    CHECK(ndcg_at_k({10, 20}, {20}, 2) == Approx(0.63093).margin(1e-5));
}

TEST_CASE("ndcg idcg truncation modes") {
    // one relevant item ranked first, k = 3
    CHECK(ndcg_at_k({1, 2, 3}, {1}, 3, IdcgMode::MinKRelevant) == Approx(1.0));
    const double truncated = ndcg_at_k({1, 2, 3}, {1}, 3, IdcgMode::TruncateAtK);
    const double idcg = 1.0 + 1.0 / std::log2(3.0) + 1.0 / std::log2(4.0);
    CHECK(truncated == Approx(1.0 / idcg));
}

TEST_CASE("metrics match brute-force oracle on random instances") {
    Rng rng(101);
    for (int trial = 0; trial < 400; ++trial) {
        std::uniform_int_distribution<int> n_items_dist(1, 50);
        const int n_items = n_items_dist(rng);
        std::vector<int> ranked(static_cast<std::size_t>(n_items));
        std::iota(ranked.begin(), ranked.end(), 100);
        std::shuffle(ranked.begin(), ranked.end(), rng);
        std::unordered_set<int> relevant;
        std::uniform_int_distribution<int> rel_count(1, n_items);
        std::uniform_int_distribution<std::size_t> pick(0, ranked.size() - 1);
        const int want = rel_count(rng);
        while (static_cast<int>(relevant.size()) < want) relevant.insert(ranked[pick(rng)]);
        std::uniform_int_distribution<int> k_dist(1, 60);
        const int k = k_dist(rng);

        CHECK(recall_at_k(ranked, relevant, k) ==
              Approx(oracle::brute_recall(ranked, relevant, k)).margin(1e-12));
        CHECK(precision_at_k(ranked, relevant, k) ==
              Approx(oracle::brute_precision(ranked, relevant, k)).margin(1e-12));
        CHECK(ndcg_at_k(ranked, relevant, k) ==
              Approx(oracle::brute_ndcg(ranked, relevant, k)).margin(1e-12));
    }
}

TEST_CASE("metrics are invariant under item relabeling") {
    Rng rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> ranked(30);
        std::iota(ranked.begin(), ranked.end(), 0);
        std::shuffle(ranked.begin(), ranked.end(), rng);
        std::unordered_set<int> relevant{ranked[3], ranked[11], ranked[25]};
        // relabel id -> id * 7 + 1000
        std::vector<int> relabeled;
        for (int id : ranked) relabeled.push_back(id * 7 + 1000);
        std::unordered_set<int> relevant2;
        for (int id : relevant) relevant2.insert(id * 7 + 1000);
        for (int k : {1, 5, 20}) {
            CHECK(recall_at_k(ranked, relevant, k) == recall_at_k(relabeled, relevant2, k));
            CHECK(precision_at_k(ranked, relevant, k) == precision_at_k(relabeled, relevant2, k));
            CHECK(ndcg_at_k(ranked, relevant, k) == ndcg_at_k(relabeled, relevant2, k));
        }
    }
}

TEST_CASE("recall is non-decreasing in k and ndcg stays in [0,1]") {
    // NDCG@k itself is not monotone in k (a relevant item at rank 1 gives
    // NDCG@1 = 1 but a lower NDCG@2 once the ideal ranking grows), so only
    // recall carries the monotonicity property.
    Rng rng(107);
    std::vector<int> ranked(40);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::shuffle(ranked.begin(), ranked.end(), rng);
    std::unordered_set<int> relevant{2, 9, 17, 33};
    double prev_recall = 0.0;
    for (int k = 1; k <= 40; ++k) {
        const double r = recall_at_k(ranked, relevant, k);
        const double n = ndcg_at_k(ranked, relevant, k);
        CHECK(r >= prev_recall);
        CHECK(n >= 0.0);
        CHECK(n <= 1.0 + 1e-12);
        prev_recall = r;
    }
    CHECK(prev_recall == Approx(1.0));
}

TEST_CASE("ndcg is 1 exactly when relevant items fill the best positions") {
    std::unordered_set<int> relevant{5, 6, 7};
    CHECK(ndcg_at_k({5, 6, 7, 1, 2}, relevant, 5) == Approx(1.0));
    CHECK(ndcg_at_k({5, 1, 6, 7, 2}, relevant, 5) < 1.0);
    // within the top-k window: two of three relevant fit when k = 2
    CHECK(ndcg_at_k({5, 6, 1, 2, 7}, relevant, 2) == Approx(1.0));
}

TEST_CASE("evaluate_users averages over users with relevant items") {
    // one user, perfect ranking
    MetricsReport perfect = evaluate_users({{1, 2}}, {{{1, 2}}}, {2});
    CHECK(perfect.for_k(2).recall == Approx(1.0));
    CHECK(perfect.for_k(2).precision == Approx(1.0));
    CHECK(perfect.for_k(2).ndcg == Approx(1.0));

    // two users with recalls 1.0 and 0.0
    MetricsReport mixed = evaluate_users({{1, 2}, {3, 4}}, {{{1}}, {{9}}}, {2});
    CHECK(mixed.for_k(2).recall == Approx(0.5));
    CHECK(mixed.evaluated_users == 2);

    // user without relevant items is excluded
    MetricsReport excl = evaluate_users({{1, 2}, {3, 4}}, {{{1}}, {}}, {2});
    CHECK(excl.evaluated_users == 1);
    CHECK(excl.for_k(2).recall == Approx(1.0));

    CHECK_THROWS_AS(evaluate_users({{1}}, {{}}, {1}), DataError);
}

TEST_CASE("evaluate_users equals the mean of per-user metrics") {
    Rng rng(109);
    std::vector<std::vector<int>> rankings;
    std::vector<std::unordered_set<int>> relevants;
    for (int u = 0; u < 50; ++u) {
        std::vector<int> ranked(25);
        std::iota(ranked.begin(), ranked.end(), 0);
        std::shuffle(ranked.begin(), ranked.end(), rng);
        std::unordered_set<int> rel;
        std::uniform_int_distribution<int> count(1, 6);
        std::uniform_int_distribution<int> item(0, 24);
        const int want = count(rng);
        while (static_cast<int>(rel.size()) < want) rel.insert(item(rng));
        rankings.push_back(ranked);
        relevants.push_back(rel);
    }
    MetricsReport report = evaluate_users(rankings, relevants, {5, 10});
    for (int k : {5, 10}) {
        double recall = 0.0, precision = 0.0, ndcg = 0.0;
        for (std::size_t u = 0; u < rankings.size(); ++u) {
            recall += oracle::brute_recall(rankings[u], relevants[u], k);
            precision += oracle::brute_precision(rankings[u], relevants[u], k);
            ndcg += oracle::brute_ndcg(rankings[u], relevants[u], k);
        }
        CHECK(report.for_k(k).recall == Approx(recall / 50.0).margin(1e-12));
        CHECK(report.for_k(k).precision == Approx(precision / 50.0).margin(1e-12));
        CHECK(report.for_k(k).ndcg == Approx(ndcg / 50.0).margin(1e-12));
    }
}
