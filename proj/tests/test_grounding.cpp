#include <doctest.h>

#include <regex>
#include <set>

#include "groundwork/grounding.hpp"
#include "support.hpp"

using namespace groundwork;

namespace {

const HashEmbedder kEmbedder(256);

std::set<std::size_t> buckets(const std::string& text) {
    std::set<std::size_t> out;
    std::string prev;
    bool first = true;
    for (auto tok : tokenize(text)) {
        for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.insert(fnv1a64("uni:" + tok) % 256);
        if (!first) out.insert(fnv1a64("bi:" + prev + '\x1f' + tok) % 256);
        prev = tok;
        first = false;
    }
    return out;
}

// Picks words whose every feature misses the evidence buckets, so the raw
// cosine against any evidence text or sentence is exactly 0.
std::string disjoint_phrase(const std::vector<std::string>& evidence_texts, std::size_t words) {
    std::set<std::size_t> taken;
    for (const auto& t : evidence_texts) {
        const auto b = buckets(t);
        taken.insert(b.begin(), b.end());
    }
    const std::vector<std::string> pool = {"zephyr", "quartz", "mauve",  "obelisk", "kazoo",  "fjord",
                                           "glyph",  "sphinx", "wombat", "nimbus",  "xylem",  "quasar",
                                           "jovial", "vortex", "lumen",  "opal",    "yonder", "cobalt"};
    std::string phrase;
    for (const auto& w : pool) {
        const std::string candidate = phrase.empty() ? w : phrase + " " + w;
        const auto b = buckets(candidate);
        bool clear = true;
        for (auto x : b) clear = clear && !taken.count(x);
        if (clear) phrase = candidate;
        if (tokenize(phrase).size() == words) break;
    }
    REQUIRE(tokenize(phrase).size() == words);
    return phrase;
}

TreeNode node(const std::string& id, const std::string& text) {
    TreeNode n;
    n.node_id = id;
    n.text = text;
    n.embedding = kEmbedder.embed(text);
    return n;
}

const std::vector<TreeNode> kNodes = {
    node("L0-a", "Close all windows and doors. Turn off fans and air conditioning."),
    node("L0-b", "Seal gaps around vents with plastic sheeting and duct tape. Listen to local radio."),
};

}  // namespace

TEST_CASE("verdict strings") {
    for (auto v : {Verdict::grounded, Verdict::flagged, Verdict::rejected})
        CHECK(verdict_from_string(to_string(v)) == v);
    CHECK_THROWS(verdict_from_string("maybe"));
}

TEST_CASE("headings") {
    CHECK(is_heading("Key steps:"));
    CHECK(!is_heading("Stay indoors."));
}

TEST_CASE("support score") {
    const auto ev = evidence_of(kNodes);
    const auto verbatim = support_score("Turn off fans and air conditioning.", ev, kEmbedder);
    CHECK(verbatim.best_id == "L0-a");
    CHECK(std::abs(verbatim.score - 1.0) <= 1e-6);

    const std::string phrase = disjoint_phrase({kNodes[0].text, kNodes[1].text}, 4);
    const auto disjoint = support_score(phrase, ev, kEmbedder);
    CHECK(std::abs(disjoint.score - 0.5) <= 1e-12);

    const Evidence single{&kNodes[1]};
    CHECK(support_score("anything at all", single, kEmbedder).best_id == "L0-b");

    const std::vector<TreeNode> twins = {node("n2", "Boil water."), node("n1", "Boil water.")};
    CHECK(support_score("Boil water.", evidence_of(twins), kEmbedder).best_id == "n1");
    CHECK_THROWS_AS(support_score("", ev, kEmbedder), GroundingError);
    CHECK_THROWS_AS(support_score("x", Evidence{}, kEmbedder), GroundingError);
}

TEST_CASE("verdicts on constructed answers") {
    const auto ev = evidence_of(kNodes);
    const std::string verbatim = "Close all windows and doors. Listen to local radio.";
    const auto g = verify(verbatim, ev, kEmbedder);
    CHECK(g.verdict == Verdict::grounded);
    CHECK(g.per_sentence.size() == 2);
    for (const auto& s : g.per_sentence) CHECK(s.support >= 1.0 - 1e-9);

    const std::string phrase = disjoint_phrase({kNodes[0].text, kNodes[1].text}, 4);
    const auto f = verify(verbatim + " " + phrase, ev, kEmbedder);
    CHECK(f.verdict == Verdict::flagged);
    CHECK(f.per_sentence.back().support < 0.75);

    const auto r = verify(phrase, ev, kEmbedder);
    CHECK(r.verdict == Verdict::rejected);
    CHECK(std::abs(r.overall - 0.5) <= 1e-12);

    // Headings are skipped rather than scored.
    const auto h = verify("Key steps:\nClose all windows and doors.", ev, kEmbedder);
    CHECK(h.per_sentence.size() == 1);
    CHECK(h.verdict == Verdict::grounded);

    CHECK_THROWS_AS(verify("", ev, kEmbedder), GroundingError);
    CHECK_THROWS_AS(verify("Notes:", ev, kEmbedder), GroundingError);
    CHECK_THROWS_AS(verify(verbatim, Evidence{}, kEmbedder), GroundingError);
    GroundingThresholds bad;
    bad.reject = 0.9;
    CHECK_THROWS(verify(verbatim, ev, kEmbedder, bad));
}

TEST_CASE("verbatim answers are grounded for any sentence threshold below one") {
    const auto chunks = gwtest::fixture_chunks();
    std::vector<TreeNode> nodes;
    for (std::size_t i = 0; i < 10; ++i) nodes.push_back(node(chunks[i].chunk_id, chunks[i].text));
    const auto ev = evidence_of(nodes);
    std::string answer;
    for (std::size_t i = 0; i < 10; i += 3) {
        for (const auto& s : split_sentences(nodes[i].text)) {
            if (is_complete_sentence(s)) {
                answer += s + " ";
                break;
            }
        }
    }
    for (double tau : {0.6, 0.9, 0.999}) {
        CHECK(verify(answer, ev, kEmbedder, {tau, 0.55}).verdict == Verdict::grounded);
    }
}

TEST_CASE("more evidence never lowers support") {
    const auto chunks = gwtest::fixture_chunks();
    std::vector<TreeNode> nodes;
    for (const auto& c : chunks) nodes.push_back(node(c.chunk_id, c.text));
    Rng rng(5);
    const std::vector<std::string> claims = {"Stay indoors and seal windows.", "Store water for three days.",
                                             "Know your evacuation routes.", "Wash hands with soap."};
    for (int t = 0; t < 20; ++t) {
        Evidence small, large;
        for (const auto& n : nodes) {
            const bool in_small = rng.uniform() < 0.2;
            if (in_small) small.push_back(&n);
            if (in_small || rng.uniform() < 0.3) large.push_back(&n);
        }
        if (small.empty()) continue;
        for (const auto& c : claims)
            CHECK(support_score(c, large, kEmbedder).score >= support_score(c, small, kEmbedder).score);
    }
}

TEST_CASE("verdict consistency and JSON round trip") {
    const auto ev = evidence_of(kNodes);
    const std::vector<std::string> answers = {"Close all windows and doors.", "Close the windows. Fly a kite.",
                                              "Reading novels by candlelight is relaxing."};
    for (const auto& a : answers) {
        const auto r = verify(a, ev, kEmbedder);
        CHECK(verdict_for(r.per_sentence, {}) == r.verdict);
        const auto back = report_from_json(report_to_json(r));
        CHECK(back.verdict == r.verdict);
        CHECK(back.overall == r.overall);
        REQUIRE(back.per_sentence.size() == r.per_sentence.size());
        for (std::size_t i = 0; i < r.per_sentence.size(); ++i) {
            CHECK(back.per_sentence[i].sentence == r.per_sentence[i].sentence);
            CHECK(back.per_sentence[i].best_evidence_id == r.per_sentence[i].best_evidence_id);
            CHECK(back.per_sentence[i].support == r.per_sentence[i].support);
        }
        double mean = 0;
        for (const auto& s : r.per_sentence) {
            CHECK(s.support >= 0.0);
            CHECK(s.support <= 1.0);
            mean += s.support;
        }
        CHECK(std::abs(r.overall - mean / r.per_sentence.size()) <= 1e-12);
    }
}

TEST_CASE("answer sentence count matches a reference splitter") {
    const std::string answer =
        "If a chemical spill happens nearby, stay indoors. Close all windows and doors and lock them! "
        "Turn off ventilation systems? Seal gaps with plastic sheeting and duct tape. Listen for updates.";
    const std::regex ends(R"([.!?](\s|$))");
    const auto count = std::distance(std::sregex_iterator(answer.begin(), answer.end(), ends), std::sregex_iterator());
    CHECK(split_sentences(answer).size() == static_cast<std::size_t>(count));
    CHECK(verify(answer, evidence_of(kNodes), kEmbedder).per_sentence.size() == 5);
}
