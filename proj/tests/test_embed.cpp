#include <doctest.h>

#include <cmath>

#include "groundwork/embed.hpp"
#include "groundwork/vecindex.hpp"
#include "support.hpp"

using namespace groundwork;

namespace {

// Independent statement of the feature hashing rule.
std::vector<double> reference_embed(const std::vector<std::string>& tokens, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    auto add = [&](const std::string& f) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : f) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        v[h % dim] += ((h / dim) % 2 == 1) ? -1.0 : 1.0;
    };
    std::vector<std::string> low;
    for (auto t : tokens) {
        for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        low.push_back(t);
    }
    for (std::size_t i = 0; i < low.size(); ++i) {
        add("uni:" + low[i]);
        if (i) add("bi:" + low[i - 1] + "\x1f" + low[i]);
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0) {
        for (double& x : v) x /= n;
    }
    return v;
}

}  // namespace

TEST_CASE("normalize examples") {
    const Vector v = normalize(Vector{3.0, 4.0});
    CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));
    const Vector again = normalize(v);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(again[i] - v[i]) <= 1e-9);
    CHECK(normalize(Vector(std::size_t{4})) == Vector(std::size_t{4}));
    CHECK_THROWS_AS(normalize(Vector{1.0, std::nan("")}), EmbedError);
    CHECK_THROWS_AS(normalize(Vector{INFINITY, 0.0}), EmbedError);
}

TEST_CASE("hash_embed matches the reference feature hashing") {
    CHECK(hash_embed({}, 256) == Vector(std::size_t{256}));
    Rng rng(1);
    const std::vector<std::string> vocab = {"flood", "Shelter", "storm", "WATER", "stay", "indoors", ".", "911", "kit"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> tokens;
        for (std::uint64_t i = 0; i < 1 + rng.below(30); ++i) tokens.push_back(vocab[rng.below(vocab.size())]);
        const std::size_t dim = 2 + rng.below(300);
        const auto ref = reference_embed(tokens, dim);
        const Vector got = hash_embed(tokens, dim);
        REQUIRE(got.dim() == dim);
        for (std::size_t i = 0; i < dim; ++i) REQUIRE(std::abs(got[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("single feature scaled versus repeated token") {
    const Vector one = hash_embed(std::vector<std::string>{"storm"}, 256);
    const Vector two = hash_embed(std::vector<std::string>{"storm", "storm"}, 256);
    const auto ref = reference_embed({"storm", "storm"}, 256);
    for (std::size_t i = 0; i < 256; ++i) CHECK(two[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(std::abs(l2_norm(one.span()) - 1.0) <= 1e-9);
}

TEST_CASE("hash embedder determinism, norm and empty text") {
    HashEmbedder e;
    CHECK(e.dim() == 256);
    CHECK(e.embed("Seal the windows") == e.embed("Seal the windows"));
    CHECK(std::abs(l2_norm(e.embed("Seal the windows").span()) - 1.0) <= 1e-9);
    CHECK_THROWS_WITH_AS(e.embed("   \n\t"), "empty text", EmbedError);
    CHECK(e.embed("STORM") == e.embed("storm"));
    const auto batch = e.embed_batch(std::vector<std::string>{"a b", "c"});
    CHECK(batch.size() == 2);
    CHECK(batch[1] == e.embed("c"));
}

TEST_CASE("related phrases are closer than unrelated ones") {
    HashEmbedder e;
    const Vector a = e.embed("flood shelter");
    CHECK(cosine(a, e.embed("flood shelter plan")) > cosine(a, e.embed("tax filing")));
}

TEST_CASE("adding one token moves less than removing half") {
    const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        for (int i = 0; i < 400; ++i) v.push_back("t" + std::to_string(i));
        return v;
    }();
    Rng rng(77);
    int wins = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<std::string> base;
        for (int i = 0; i < 50; ++i) base.push_back(vocab[rng.below(vocab.size())]);
        auto plus = base;
        plus.push_back(vocab[rng.below(vocab.size())]);
        const std::vector<std::string> half(base.begin(), base.begin() + 25);
        const Vector b = hash_embed(base, 256);
        const double d_add = 1.0 - cosine(b, hash_embed(plus, 256));
        const double d_half = 1.0 - cosine(b, hash_embed(half, 256));
        wins += d_add < d_half ? 1 : 0;
    }
    CHECK(wins >= trials * 95 / 100);
}

TEST_CASE("make_embedder") {
    auto e = make_embedder({EmbedderKind::hash, 64, {}});
    CHECK(e->dim() == 64);
    CHECK(e->descriptor().kind == EmbedderKind::hash);
    CHECK(embed_text("kit", *e) == hash_embed(std::vector<std::string>{"kit"}, 64));
    CHECK_THROWS(make_embedder({EmbedderKind::remote, 8, {}}));
}

TEST_CASE("split_url") {
    CHECK(split_url("http://127.0.0.1:8089/embed") == std::pair<std::string, std::string>{"http://127.0.0.1:8089", "/embed"});
    CHECK(split_url("http://host") == std::pair<std::string, std::string>{"http://host", "/"});
}
