#include <doctest.h>

#include "groundwork/assistant.hpp"
#include "support.hpp"

using namespace groundwork;

namespace {

const std::string kTable2Query =
    "A chemical spill happened near my neighborhood. Should I stay indoors and seal windows?";

struct World {
    std::shared_ptr<const Embedder> embedder = std::make_shared<HashEmbedder>(256);
    std::shared_ptr<const RaptorTree> tree;
    ToolRegistry registry;

    World() {
        BuildConfig cfg;
        cfg.seed = 7;
        tree = std::make_shared<const RaptorTree>(
            build_tree(gwtest::fixture_chunks(), *embedder, ExtractiveSummarizer{}, cfg));
        register_builtin_tools(registry, [t = tree] { return t; }, embedder);
    }
};

World& world() {
    static World w;
    return w;
}

Answer ask(const std::string& q, Session& s, const AssistantConfig& cfg = {}) {
    auto& w = world();
    return answer_query(q, s, *w.tree, w.registry, *w.embedder, cfg);
}

bool lower_contains(const std::string& text, const std::string& needle) {
    std::string lower;
    for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower.find(needle) != std::string::npos;
}

void check_citations_sound(const Answer& a) {
    const auto& tree = *world().tree;
    for (const auto& c : a.citations) {
        REQUIRE(tree.contains(c.node_id));
        const auto& text = tree.node(c.node_id).text;
        bool backed = false;
        for (const auto& s : a.grounding.per_sentence) {
            backed = backed || text.find(s.sentence) != std::string::npos || s.best_evidence_id == c.node_id;
        }
        CHECK_MESSAGE(backed, c.node_id);
        const auto& srcs = tree.node(c.node_id).sources;
        CHECK(std::find(srcs.begin(), srcs.end(), c.source) != srcs.end());
    }
}

class ScriptedGenerator final : public Generator {
public:
    enum class Mode { fabricate, fail };
    explicit ScriptedGenerator(Mode m) : mode_(m) {}
    std::string compose(std::string_view, const Evidence&, std::size_t) const override {
        ++calls;
        if (mode_ == Mode::fail) throw TransportError("generator unreachable", true);
        return "Penguins juggle marmalade beside volcanic glaciers. Quartz kazoos hum loudly.";
    }
    bool is_remote() const noexcept override { return true; }
    mutable int calls = 0;

private:
    Mode mode_;
};

}  // namespace

TEST_CASE("composer") {
    const auto& e = *world().embedder;
    TreeNode n;
    n.node_id = "n";
    n.text = "Close all windows and doors.";
    const Evidence ev{&n};
    const std::string out = compose_answer("close windows", ev, 50, e);
    CHECK(out == std::string(kAnswerPreamble) + "\nClose all windows and doors.");
    CHECK(verify(out, ev, e).verdict == Verdict::grounded);
    CHECK(compose_answer("volcano lava", ev, 50, e) == std::string(kAnswerPreamble) + "\n" + std::string(kNoMatchNotice));
    CHECK_THROWS(compose_answer("close windows", Evidence{}, 50, e));
}

TEST_CASE("Table 2 scenario") {
    Session s{"s1", {}, {}};
    const auto a = ask(kTable2Query, s);
    CHECK(a.grounding.verdict == Verdict::grounded);
    CHECK(!a.low_confidence);
    CHECK(lower_contains(a.text, "close all windows and doors"));
    bool fema = false;
    for (const auto& c : a.citations) fema = fema || (c.source.publisher == "FEMA" && lower_contains(c.source.title, "are you ready"));
    CHECK(fema);
    check_citations_sound(a);
    for (const char* stage : {"retrieve", "compose", "verify", "total"}) CHECK(a.timing_ms.count(stage));
    REQUIRE(s.turns.size() == 1);
    CHECK(s.turns[0].first == kTable2Query);

    // Every emitted line besides the preamble is verbatim evidence.
    for (const auto& line : split_sentences(a.text)) {
        if (line == kAnswerPreamble) continue;
        bool found = false;
        for (const auto& n : world().tree->nodes()) found = found || n.text.find(line) != std::string::npos;
        CHECK_MESSAGE(found, line);
    }
}

TEST_CASE("query outside the corpus") {
    Session s{"s2", {}, {}};
    const auto a = ask("Xylophone quasar marmalade zeppelin origami?", s);
    CHECK(a.grounding.verdict != Verdict::grounded);
    CHECK(a.low_confidence);
    CHECK(a.text.find(kNoMatchNotice) != std::string::npos);
}

TEST_CASE("refusal mode") {
    Session s{"s3", {}, {}};
    AssistantConfig cfg;
    cfg.refuse_on_reject = true;
    cfg.thresholds = {0.99, 0.98};
    const auto a = ask("Xylophone quasar marmalade zeppelin origami?", s, cfg);
    CHECK(a.grounding.verdict == Verdict::rejected);
    CHECK(a.text == kRefusalNotice);
    CHECK(a.citations.empty());
}

TEST_CASE("repeat queries are identical") {
    Session s{"s4", {}, {}};
    const auto a = ask("How much water should I store for an emergency?", s);
    const auto b = ask("How much water should I store for an emergency?", s);
    CHECK(a.text == b.text);
    CHECK(a.grounding.overall == b.grounding.overall);
    CHECK(a.citations.size() == b.citations.size());
    CHECK(s.turns.size() == 2);
    CHECK(a.tool_trace.front().request_id != b.tool_trace.front().request_id);
}

TEST_CASE("tool trace mirrors the audit trail") {
    auto& w = world();
    Session s{"s5", {}, {}};
    for (const std::string q : {kTable2Query, std::string("make me a hurricane checklist"),
                                std::string("summarize the steps to shelter in place")}) {
        const std::size_t before = w.registry.audit()->size();
        const auto a = ask(q, s);
        const auto records = w.registry.audit()->records();
        REQUIRE(records.size() - before == a.tool_trace.size());
        for (std::size_t i = 0; i < a.tool_trace.size(); ++i) {
            CHECK(records[before + i].tool == a.tool_trace[i].tool);
            CHECK(records[before + i].request_id == a.tool_trace[i].request_id);
            CHECK(records[before + i].status == a.tool_trace[i].status);
        }
        if (a.grounding.verdict != Verdict::rejected) CHECK(!a.citations.empty());
        check_citations_sound(a);
    }
}

TEST_CASE("checklist route") {
    Session s{"s6", {}, {}};
    const auto a = ask("make me a chemical spill shelter checklist", s);
    REQUIRE(!a.tool_trace.empty());
    CHECK(a.tool_trace.front().tool == kChecklistTool);
    CHECK(a.text.rfind("Preparedness checklist:", 0) == 0);
    check_citations_sound(a);
}

TEST_CASE("remote generator fallback") {
    for (auto mode : {ScriptedGenerator::Mode::fabricate, ScriptedGenerator::Mode::fail}) {
        auto gen = std::make_shared<ScriptedGenerator>(mode);
        AssistantConfig cfg;
        cfg.generator = gen;
        cfg.thresholds = {0.9, 0.8};
        Session s{"s7", {}, {}};
        const auto a = ask(kTable2Query, s, cfg);
        CHECK(gen->calls == 1);
        CHECK(a.grounding.verdict == Verdict::grounded);
        CHECK(a.text.find("Penguins") == std::string::npos);
        CHECK(lower_contains(a.text, "windows"));
    }
}

TEST_CASE("a flagged remote answer is kept and marked") {
    auto gen = std::make_shared<ScriptedGenerator>(ScriptedGenerator::Mode::fabricate);
    AssistantConfig cfg;
    cfg.generator = gen;
    Session s{"s9", {}, {}};
    const auto a = ask(kTable2Query, s, cfg);
    CHECK(gen->calls == 1);
    REQUIRE(a.grounding.verdict == Verdict::flagged);
    CHECK(a.text.find("Penguins") != std::string::npos);
    CHECK(a.low_confidence);
}

TEST_CASE("answer JSON") {
    Session s{"s8", {}, {}};
    const Json j = answer_to_json(ask(kTable2Query, s));
    for (const char* k : {"answer_text", "citations", "verdict", "per_sentence", "grounding", "tool_trace",
                          "timing_ms", "low_confidence"})
        CHECK(j.contains(k));
    CHECK(j["verdict"] == "grounded");
    CHECK(!j["citations"].empty());
}
