#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "groundwork/vecindex.hpp"
#include "support.hpp"

using namespace groundwork;

namespace {

std::vector<IndexedVector> random_items(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<IndexedVector> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back({"v" + std::to_string(i), gwtest::random_vector(rng, dim)});
    return items;
}

// All pairwise cosines from the raw definition, sorted by (score desc, id asc).
std::vector<std::string> brute_force(const std::vector<IndexedVector>& items, const Vector& q, std::size_t k) {
    std::vector<std::pair<double, std::string>> all;
    for (const auto& it : items) {
        double num = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < q.dim(); ++i) {
            num += it.vector[i] * q[i];
            na += it.vector[i] * it.vector[i];
            nb += q[i] * q[i];
        }
        all.push_back({num / (std::sqrt(na) * std::sqrt(nb)), it.id});
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) ids.push_back(all[i].second);
    return ids;
}

std::vector<std::string> ids_of(const std::vector<SearchHit>& hits) {
    std::vector<std::string> ids;
    for (const auto& h : hits) ids.push_back(h.id);
    return ids;
}

}  // namespace

TEST_CASE("cosine examples") {
    CHECK(cosine({1, 0}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(cosine({1, 0}, {0, 1})) <= 1e-12);
    CHECK(std::abs(cosine({1, 1}, {1, 0}) - 0.7071068) <= 1e-6);
    CHECK_THROWS_WITH_AS(cosine({0, 0}, {1, 0}), "cosine undefined for zero vector", IndexError);
    CHECK_THROWS_AS(cosine({1, 0, 0}, {1, 0}), IndexError);
}

TEST_CASE("cosine symmetry, scale invariance and clamping") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const Vector a = gwtest::random_vector(rng, 17);
        const Vector b = gwtest::random_vector(rng, 17);
        CHECK(std::abs(cosine(a, b) - cosine(b, a)) <= 1e-12);
        Vector scaled = a;
        const double c = 0.001 + rng.uniform() * 1000.0;
        for (auto& x : scaled.values) x *= c;
        CHECK(std::abs(cosine(scaled, b) - cosine(a, b)) <= 1e-9);
        const double s = cosine(a, a);
        CHECK(s <= 1.0);
        CHECK(s >= -1.0);
    }
}

TEST_CASE("build_index validation") {
    CHECK(VectorIndex({{"only", {1, 2}}}).size() == 1);
    CHECK_THROWS_AS(VectorIndex(std::vector<IndexedVector>{}), IndexError);
    try {
        VectorIndex({{"c1", {1, 0}}, {"c2", {0, 1}}, {"c1", {1, 1}}});
        FAIL("expected duplicate id error");
    } catch (const IndexError& e) {
        CHECK(std::string(e.what()).find("c1") != std::string::npos);
    }
    CHECK_THROWS_AS(VectorIndex({{"a", {1, 0}}, {"b", {1, 0, 0}}}), IndexError);
    CHECK_THROWS_AS(VectorIndex({{"z", {0, 0}}}), IndexError);
}

TEST_CASE("index reports 10,000 items") {
    Rng rng(8);
    const VectorIndex index(random_items(rng, 10000, 256));
    CHECK(index.size() == 10000);
    CHECK(index.dim() == 256);
}

TEST_CASE("search basics") {
    Rng rng(4);
    const auto items = random_items(rng, 40, 32);
    const VectorIndex index(items);
    const auto hits = index.search(items[17].vector, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].id == "v17");
    CHECK(std::abs(hits[0].score - 1.0) <= 1e-6);
    const auto all = index.search(items[0].vector, 1000);
    CHECK(all.size() == 40);
    CHECK(std::is_sorted(all.begin(), all.end(), ranks_before));
    CHECK_THROWS_AS(index.search(items[0].vector, 0), IndexError);
    CHECK_THROWS_AS(index.search(Vector(std::size_t{32}), 1), IndexError);
    CHECK_THROWS_AS(index.search(Vector(std::size_t{31}), 1), IndexError);
}

TEST_CASE("search equals the brute-force oracle") {
    Rng rng(12);
    const auto items = random_items(rng, 500, 256);
    const VectorIndex index(items);
    for (int q = 0; q < 50; ++q) {
        const Vector query = gwtest::random_vector(rng, 256);
        REQUIRE(ids_of(index.search(query, 10)) == brute_force(items, query, 10));
    }
}

TEST_CASE("ties break by ascending id regardless of insertion order") {
    std::vector<IndexedVector> items = {{"b", {1, 0}}, {"a", {2, 0}}, {"c", {0, 1}}, {"aa", {3, 0}}};
    const VectorIndex forward(items);
    std::reverse(items.begin(), items.end());
    const VectorIndex backward(items);
    const auto f = forward.search({1, 0}, 4);
    CHECK(ids_of(f) == std::vector<std::string>{"a", "aa", "b", "c"});
    CHECK(ids_of(backward.search({1, 0}, 4)) == ids_of(f));
}

TEST_CASE("snapshot round trip") {
    Rng rng(21);
    const auto items = random_items(rng, 60, 24);
    const VectorIndex index(items);
    std::stringstream buf;
    index.save(buf);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "SMVI");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[5]) == 0);
    CHECK(static_cast<unsigned char>(bytes[6]) == 24);
    const std::size_t expected = 4 + 2 + 4 + 8 + 60 * 2 + 60 * 24 * 4 + [&] {
        std::size_t ids = 0;
        for (const auto& it : items) ids += it.id.size();
        return ids;
    }();
    CHECK(bytes.size() == expected);
    const VectorIndex loaded = VectorIndex::load(buf);
    CHECK(loaded.size() == 60);
    CHECK(loaded.dim() == 24);
    for (int q = 0; q < 10; ++q) {
        const Vector query = gwtest::random_vector(rng, 24);
        const auto a = index.search(query, 5);
        const auto b = loaded.search(query, 5);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i].score - b[i].score) <= 1e-5);
    }
    std::stringstream bad("SMVX....");
    CHECK_THROWS_AS(VectorIndex::load(bad), IndexError);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(VectorIndex::load(truncated), IndexError);
}
