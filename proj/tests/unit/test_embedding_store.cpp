#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ccsg/embedding_store.hpp"
#include "testutil.hpp"

using ccsg::EmbeddingStore;
using ccsg::cosine;

namespace {

std::vector<double> vec(std::initializer_list<double> xs) { return xs; }

}  // namespace

TEST_CASE("load: three 4-dim rows") {
    auto dir = testutil::temp_dir("emb");
    auto path = testutil::write_file(dir / "v.txt",
                                     "cat 1 0 0 0\n"
                                     "dog 0 1 0 0\n"
                                     "eel 0 0 1 0\n");
    auto store = EmbeddingStore::load(path);
    CHECK(store.size() == 3);
    CHECK(store.dim() == 4);
    CHECK(store.contains("cat"));
    auto v = store.vector_of("cat");
    CHECK(v[0] == 1.0);
    CHECK(v[3] == 0.0);
    CHECK(store.tokens() == std::vector<std::string>{"cat", "dog", "eel"});
}

TEST_CASE("load: dimension mismatch names the line") {
    auto dir = testutil::temp_dir("emb");
    auto path = testutil::write_file(dir / "bad.txt",
                                     "cat 1 0 0 0\n"
                                     "dog 0 1 0\n");
    CHECK_THROWS_WITH_AS(EmbeddingStore::load(path),
                         doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("load: duplicate token keeps the first vector") {
    auto dir = testutil::temp_dir("emb");
    auto path = testutil::write_file(dir / "dup.txt",
                                     "cat 1 0\n"
                                     "dog 0 1\n"
                                     "CAT 5 5\n");
    auto store = EmbeddingStore::load(path);
    CHECK(store.size() == 2);
    CHECK(store.duplicate_count() == 1);
    CHECK(store.vector_of("cat")[0] == 1.0);  // first occurrence retained
}

TEST_CASE("load: error paths") {
    auto dir = testutil::temp_dir("emb");
    CHECK_THROWS_AS(EmbeddingStore::load((dir / "missing.txt").string()), std::runtime_error);
    CHECK_THROWS_AS(EmbeddingStore::load(testutil::write_file(dir / "empty.txt", "\n\n")),
                    std::runtime_error);
    CHECK_THROWS_AS(
        EmbeddingStore::load(testutil::write_file(dir / "nonnum.txt", "cat 1 x\n")),
        std::runtime_error);
    CHECK_THROWS_AS(EmbeddingStore::load(testutil::write_file(dir / "w.txt", "cat 1 2\n"), 3),
                    std::runtime_error);  // expected_dim mismatch
}

TEST_CASE("cosine: identities") {
    std::vector<double> v{3.0, -1.0, 2.0};
    CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine(vec({1, 0}), vec({0, 1})) == 0.0);
    CHECK(cosine(vec({1, 0}), vec({-2, 0})) == -1.0);
    CHECK(cosine(vec({0, 0}), vec({1, 2})) == 0.0);  // zero norm defined as 0
    CHECK_THROWS_AS(cosine(vec({1, 2}), vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("cosine: symmetry and scale invariance") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(5), b(5);
        for (double& x : a) x = u(rng);
        for (double& x : b) x = u(rng);
        CHECK(std::abs(cosine(a, b) - cosine(b, a)) <= 1e-12);
        const double c = 0.01 + 10.0 * std::abs(u(rng));
        std::vector<double> a_scaled = a;
        for (double& x : a_scaled) x *= c;
        CHECK(std::abs(cosine(a_scaled, b) - cosine(a, b)) <= 1e-9);
    }
}

TEST_CASE("nearest: top-1 matches an exhaustive scan") {
    auto dir = testutil::temp_dir("emb");
    auto path = testutil::write_file(dir / "five.txt",
                                     "cat 1.0 0.2 0.0\n"
                                     "dog 0.9 0.3 0.1\n"
                                     "eel 0.1 0.9 0.4\n"
                                     "owl -0.5 0.2 0.8\n"
                                     "fox 0.8 0.1 -0.2\n");
    auto store = EmbeddingStore::load(path);

    // oracle: full scan over stored vectors
    std::string best;
    double best_sim = -2.0;
    for (const auto& t : store.tokens()) {
        if (t == "cat") continue;
        const double sim = cosine(store.vector_of("cat"), store.vector_of(t));
        if (sim > best_sim) {
            best_sim = sim;
            best = t;
        }
    }
    auto top = store.nearest("cat", 1);
    REQUIRE(top.size() == 1);
    CHECK(top[0].token == best);
    CHECK(top[0].similarity == best_sim);
}

TEST_CASE("nearest: k beyond vocabulary returns what remains") {
    std::mt19937_64 rng(3);
    auto store = testutil::random_store(rng, 6, 4);
    auto all = store.nearest("t0", 100, {"t3"});
    CHECK(all.size() == 4);  // 6 - query - excluded
    for (const auto& n : all) {
        CHECK(n.token != "t0");
        CHECK(n.token != "t3");
    }
}

TEST_CASE("nearest: exact ties break lexicographically") {
    auto store = EmbeddingStore::from_rows({
        {"query", {1, 0, 0, 0}},
        {"berry", {1, 1, 0, 0}},
        {"apple", {1, 0, 1, 0}},  // same cosine to query as berry
        {"zzz", {-1, 0, 0, 0}},
    });
    auto top = store.nearest("query", 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].similarity == top[1].similarity);
    CHECK(top[0].token == "apple");
    CHECK(top[1].token == "berry");
}

TEST_CASE("nearest: error cases") {
    std::mt19937_64 rng(4);
    auto store = testutil::random_store(rng, 4, 3);
    CHECK_THROWS_AS(store.nearest("nope", 1), std::out_of_range);
    CHECK_THROWS_AS(store.nearest("t0", 0), std::invalid_argument);
}

TEST_CASE("nearest: equals brute force on random stores for all k") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 5 + rng() % 60;
        const std::size_t dim = 2 + rng() % 15;
        auto store = testutil::random_store(rng, n, dim);
        const std::string query = "t" + std::to_string(rng() % n);

        std::vector<EmbeddingStore::Neighbor> scan;
        for (const auto& t : store.tokens()) {
            if (t == query) continue;
            scan.push_back({t, cosine(store.vector_of(query), store.vector_of(t))});
        }
        std::sort(scan.begin(), scan.end(), [](const auto& a, const auto& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.token < b.token;
        });

        for (std::size_t k = 1; k <= n; ++k) {
            auto got = store.nearest(query, k);
            REQUIRE(got.size() == std::min(k, scan.size()));
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].token == scan[i].token);
                CHECK(got[i].similarity == scan[i].similarity);
            }
        }
    }
}
