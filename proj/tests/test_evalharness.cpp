#include <doctest.h>

#include <map>
#include <regex>
#include <sstream>

#include "groundwork/evalharness.hpp"
#include "support.hpp"

using namespace groundwork;

namespace {

double f1_oracle(const std::string& cand, const std::string& ref) {
    auto bag = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        std::map<std::string, int> m;
        const std::regex word("[a-z0-9]+");
        for (auto it = std::sregex_iterator(s.begin(), s.end(), word); it != std::sregex_iterator(); ++it) ++m[it->str()];
        return m;
    };
    const auto a = bag(cand), b = bag(ref);
    int na = 0, nb = 0, common = 0;
    for (const auto& [w, n] : a) {
        na += n;
        if (auto it = b.find(w); it != b.end()) common += std::min(n, it->second);
    }
    for (const auto& [w, n] : b) nb += n;
    if (common == 0) return 0.0;
    const double p = double(common) / na, r = double(common) / nb;
    return 2 * p * r / (p + r);
}

Answer grounded_answer(const std::string& text) {
    Answer a;
    a.text = text;
    a.grounding.overall = 1.0;
    a.grounding.verdict = Verdict::grounded;
    a.grounding.per_sentence.push_back({text, "n", 1.0});
    return a;
}

EvalItem item(const std::string& q, const std::string& truth) { return EvalItem{q, truth, {}}; }

struct Loaded {
    std::vector<Document> docs = load_corpus(gwtest::fixture("corpus.jsonl"));
    std::vector<EvalItem> items = load_benchmark(gwtest::fixture("benchmark.jsonl"), docs);
};

const Loaded& loaded() {
    static Loaded l;
    return l;
}

}  // namespace

TEST_CASE("token helpers") {
    CHECK(word_tokens("Stay Indoors, now!") == std::vector<std::string>{"stay", "indoors", "now"});
    CHECK(token_f1("", "abc") == 0.0);
    CHECK(token_f1("close the windows", "close the windows") == doctest::Approx(1.0));
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"close all windows and doors", "close windows then lock doors now"},
        {"the the water water", "water the"},
        {"Stay indoors. Seal gaps!", "seal the gaps and stay put"},
        {"boil water", "store canned food"}};
    for (const auto& [c, r] : pairs) CHECK(std::abs(token_f1(c, r) - f1_oracle(c, r)) <= 1e-12);
    CHECK(token_f1("boil water", "store canned food") == 0.0);

    CHECK(content_recall("close windows", "Close the windows and doors") == doctest::Approx(2.0 / 3.0));
    CHECK(content_recall("", "the and") == 0.0);
    CHECK(content_recall("the and", "the and") == doctest::Approx(1.0));

    CHECK(fluency_ratio("Stay indoors now. Go.") == doctest::Approx(0.5));
    CHECK(fluency_ratio("Close all windows and doors.") == 1.0);
}

TEST_CASE("rule judge") {
    const RuleJudge judge;
    const auto truth = "Close all windows and doors and seal gaps with tape.";
    const auto perfect = judge.score(item("What should I seal?", truth), grounded_answer(truth));
    CHECK(perfect.correctness == doctest::Approx(5.0));
    CHECK(perfect.completeness == doctest::Approx(5.0));
    CHECK(perfect.groundedness == doctest::Approx(5.0));
    CHECK(perfect.fluency == doctest::Approx(5.0));
    CHECK(perfect.judge_name == "rule");

    const auto none = judge.score(item("q", truth), grounded_answer("Penguins enjoy icy slides."));
    CHECK(none.correctness == 0.0);

    const std::string half = "close windows quickly please";
    const auto partial = judge.score(item("q", truth), grounded_answer(half));
    CHECK(std::abs(partial.correctness - 5.0 * f1_oracle(half, truth)) <= 1e-9);

    Rng rng(4);
    for (int t = 0; t < 30; ++t) {
        Answer a = grounded_answer(t % 2 ? "Random words here." : "x");
        a.grounding.overall = rng.uniform(-1.0, 2.0);
        const auto s = judge.score(item("question words", truth), a);
        for (double v : {s.correctness, s.groundedness, s.completeness, s.relevance, s.fluency}) {
            CHECK(v >= 0.0);
            CHECK(v <= 5.0);
        }
        const auto again = judge.score(item("question words", truth), a);
        CHECK(again.relevance == s.relevance);
    }
}

TEST_CASE("benchmark runner") {
    const RuleJudge judge;
    const std::vector<EvalItem> one{item("Where should I go?", "Go to an interior room.")};
    const auto single = run_benchmark(one, {{"echo", echo_system()}}, judge);
    REQUIRE(single.systems.size() == 1);
    const auto direct = judge.score(one[0], grounded_answer("Go to an interior room."));
    CHECK(single.systems[0].mean.correctness == direct.correctness);
    CHECK(single.systems[0].mean.relevance == direct.relevance);
    CHECK(single.records.size() == 1);

    std::vector<NamedSystem> systems{{"echo", echo_system()},
                                     {"broken", [](const EvalItem&) -> Answer { throw std::runtime_error("down"); }}};
    const auto report = run_benchmark(loaded().items, systems, judge);
    REQUIRE(report.systems.size() == 2);
    CHECK(report.systems[0].mean.correctness == doctest::Approx(5.0));
    CHECK(report.systems[1].failures == loaded().items.size());
    CHECK(report.systems[1].mean.correctness == 0.0);
    CHECK(report.systems[1].mean.fluency == 0.0);
    for (const auto& r : report.records)
        if (r.system == "broken") CHECK(r.error.value_or("").find("down") != std::string::npos);

    // Means are arithmetic means of the records.
    double sum = 0;
    std::size_t n = 0;
    for (const auto& r : report.records)
        if (r.system == "echo") {
            sum += r.scores.relevance;
            ++n;
        }
    CHECK(std::abs(report.systems[0].mean.relevance - sum / n) <= 1e-12);

    const std::string table = render_table(report);
    std::istringstream lines(table);
    std::string header;
    std::getline(lines, header);
    std::size_t pos = 0;
    for (const char* col : kReportHeader) {
        const auto at = header.find(col, pos);
        REQUIRE(at != std::string::npos);
        pos = at;
    }
    CHECK(std::size(kReportHeader) == 6);
    CHECK(table.find("5.00") != std::string::npos);
    CHECK(table.find("broken") != std::string::npos);
    CHECK_THROWS_AS(run_benchmark({}, systems, judge), EvalError);
    CHECK_THROWS_AS(run_benchmark(one, {}, judge), EvalError);
}

TEST_CASE("records output") {
    const auto report = run_benchmark(loaded().items, {{"echo", echo_system()}}, RuleJudge{});
    std::ostringstream out;
    write_records(out, report);
    std::istringstream in(out.str());
    std::string line;
    std::size_t items = 0, means = 0;
    while (std::getline(in, line)) {
        const Json j = Json::parse(line);
        if (j["record"] == "item") ++items;
        if (j["record"] == "mean") {
            ++means;
            CHECK(j["scores"]["correctness"].get<double>() == doctest::Approx(5.0));
        }
    }
    CHECK(items == loaded().items.size());
    CHECK(means == 1);
}

TEST_CASE("benchmark parsing") {
    const auto& items = loaded().items;
    CHECK(items.size() == 20);
    for (const auto& it : items) {
        CHECK(!it.question.empty());
        CHECK(!it.ground_truth.empty());
        CHECK(!it.context_docs.empty());
    }
    CHECK(items[0].context_docs[0].doc_id == "fema-ayr-shelter-1-4");

    const auto& docs = loaded().docs;
    std::istringstream unknown(
        R"({"question": "q", "ground_truth": "t", "context_doc_ids": ["fema-ayr-shelter-1-4"]})"
        "\n"
        R"({"question": "q", "ground_truth": "t", "context_doc_ids": ["ghost"]})");
    try {
        parse_benchmark(unknown, docs);
        FAIL("unknown id accepted");
    } catch (const EvalError& e) {
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    std::istringstream missing(R"({"question": "q"})");
    CHECK_THROWS_AS(parse_benchmark(missing, docs), EvalError);
    std::istringstream blank("\n\n");
    CHECK(parse_benchmark(blank, docs).empty());
}

TEST_CASE("assistant outscores the no-retrieval baseline on groundedness") {
    auto embedder = std::make_shared<const HashEmbedder>(256);
    BuildConfig cfg;
    cfg.seed = 7;
    auto tree = std::make_shared<const RaptorTree>(
        build_tree(chunk_corpus(loaded().docs, cfg.chunk_cfg), *embedder, ExtractiveSummarizer{}, cfg));
    auto registry = std::make_shared<ToolRegistry>();
    register_builtin_tools(*registry, [tree] { return tree; }, embedder);
    auto session = std::make_shared<Session>(Session{"eval", {}, {}});
    Answerer assistant = [=](const EvalItem& it) {
        return answer_query(it.question, *session, *tree, *registry, *embedder);
    };
    const EvidenceResolver resolver = [tree](const EvalItem& it) { return context_leaves(*tree, it); };
    const auto report = run_benchmark(loaded().items, {{"assistant", assistant}, {"baseline", no_retrieval_baseline()}},
                                      RuleJudge(embedder), resolver);
    REQUIRE(report.systems.size() == 2);
    CHECK(report.systems[0].failures == 0);
    CHECK(report.systems[0].mean.groundedness >= report.systems[1].mean.groundedness);
    CHECK(report.systems[0].mean.correctness > report.systems[1].mean.correctness);

    const auto leaves = context_leaves(*tree, loaded().items[0]);
    REQUIRE(!leaves.empty());
    for (const auto* n : leaves) {
        CHECK(n->level == 0);
        bool match = false;
        for (const auto& s : n->sources)
            for (const auto& d : loaded().items[0].context_docs) match = match || s.doc_id == d.doc_id;
        CHECK(match);
    }
}
