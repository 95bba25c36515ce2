#include "groundwork/assistant.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include "groundwork/http_client.hpp"

namespace groundwork {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

class EvidenceSet {
public:
    explicit EvidenceSet(const RaptorTree& tree) : tree_(tree) {}

    void add(const std::string& node_id) {
        if (!tree_.contains(node_id) || !seen_.insert(node_id).second) return;
        nodes_.push_back(&tree_.node(node_id));
    }
    void add_hits(const Json& payload) {
        for (const auto& h : payload.value("hits", Json::array())) add(h.at("node_id").get<std::string>());
    }
    const Evidence& nodes() const noexcept { return nodes_; }

private:
    const RaptorTree& tree_;
    Evidence nodes_;
    std::unordered_set<std::string> seen_;
};

std::string claims_text(std::string_view answer) {
    std::string out;
    for (const auto& s : split_sentences(answer)) {
        if (is_heading(s)) continue;
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}

// Sources of the leaves under `node` whose text holds the sentence; a
// summary node otherwise cites every document it condenses.
std::vector<DocumentSource> sources_for(const RaptorTree& tree, const TreeNode& node, const std::string& sentence) {
    if (node.level == 0 || node.text.find(sentence) == std::string::npos) return node.sources;
    std::vector<DocumentSource> out;
    std::vector<const TreeNode*> stack{&node};
    std::unordered_set<std::string> visited;
    while (!stack.empty()) {
        const TreeNode* n = stack.back();
        stack.pop_back();
        if (!visited.insert(n->node_id).second) continue;
        if (n->level == 0) {
            if (n->text.find(sentence) == std::string::npos) continue;
            for (const auto& src : n->sources) {
                if (std::find(out.begin(), out.end(), src) == out.end()) out.push_back(src);
            }
            continue;
        }
        for (const auto& c : n->children) stack.push_back(&tree.node(c));
    }
    return out.empty() ? node.sources : out;
}

const char* status_name(ToolStatus s) { return s == ToolStatus::ok ? "ok" : "error"; }

}  // namespace

std::string compose_answer(std::string_view query, const Evidence& evidence, std::size_t target_tokens,
                           const Embedder& embedder, const ComposerConfig& cfg) {
    if (evidence.empty()) throw Error("evidence is empty");
    if (target_tokens == 0) throw Error("target_tokens must be positive");
    const auto picked = select_relevant_sentences(query, evidence, target_tokens, embedder, cfg.min_query_cosine);
    std::string out(kAnswerPreamble);
    if (picked.empty()) return out + "\n" + std::string(kNoMatchNotice);
    for (const auto& s : picked) out += "\n" + s.text;
    return out;
}

std::string RemoteGenerator::compose(std::string_view query, const Evidence& evidence,
                                     std::size_t target_tokens) const {
    Json body = {{"query", query}, {"max_tokens", target_tokens}, {"evidence", Json::array()}};
    for (const TreeNode* n : evidence) body["evidence"].push_back({{"node_id", n->node_id}, {"text", n->text}});
    const Json reply = post_json(endpoint_, body);
    if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
        throw TransportError("generator reply has no \"text\"", false);
    }
    std::string text = reply["text"].get<std::string>();
    if (tokenize(text).empty()) throw TransportError("generator returned an empty answer", false);
    return text;
}

Answer answer_query(std::string_view query, Session& session, const RaptorTree& tree, const ToolRegistry& registry,
                    const Embedder& embedder, const AssistantConfig& cfg) {
    const auto start = Clock::now();
    Answer ans;
    const std::string base_id = session.session_id + "-" + std::to_string(session.turns.size() + 1);

    auto call = [&](ToolRequest req) {
        const std::string tool = registry.route(req);
        ToolResponse resp = registry.invoke(req);
        ans.tool_trace.push_back({tool, req.request_id, status_name(resp.status)});
        return std::pair{tool, std::move(resp)};
    };
    auto retrieval_request = [&](std::string id, std::string text) {
        ToolRequest r;
        r.request_id = std::move(id);
        r.intent = kIntentRetrieve;
        r.context = session.context;
        r.payload = {{"query", std::move(text)}, {"k", cfg.k}};
        return r;
    };

    ToolRequest first;
    first.request_id = base_id;
    first.context = session.context;
    first.constraints = {{"max_items", cfg.checklist_items}};
    first.payload = {{"query", std::string(query)}, {"k", cfg.k}, {"strategy", cfg.strategy}, {"beam", cfg.beam}};

    auto phase = Clock::now();
    auto [tool, resp] = call(first);
    ans.timing_ms["retrieve"] = ms_since(phase);

    EvidenceSet retrieved(tree);
    std::string text;
    const bool ok = resp.status == ToolStatus::ok;
    if (ok && tool == kChecklistTool) {
        text = "Preparedness checklist:";
        for (const auto& item : resp.payload.at("items")) {
            text += "\n" + item.at("text").get<std::string>();
            for (const auto& c : item.at("citations")) retrieved.add(c.at("node_id").get<std::string>());
        }
    } else if (ok && tool == kSummaryTool && !resp.payload.value("steps", Json::array()).empty()) {
        text = "Key steps:";
        for (const auto& step : resp.payload.at("steps")) {
            text += "\n" + step.at("text").get<std::string>();
            retrieved.add(step.at("node_id").get<std::string>());
        }
    } else {
        if (!ok || tool != kRetrievalTool) {
            phase = Clock::now();
            ToolRequest again = retrieval_request(base_id + "-r", std::string(query));
            again.payload["strategy"] = cfg.strategy;
            again.payload["beam"] = cfg.beam;
            auto [t2, r2] = call(again);
            ans.timing_ms["retrieve"] += ms_since(phase);
            if (r2.status != ToolStatus::ok) throw Error("retrieval failed: " + r2.error.value_or(ToolFailure{}).message);
            resp = std::move(r2);
        }
        retrieved.add_hits(resp.payload);
    }
    if (retrieved.nodes().empty()) throw Error("no evidence retrieved for query");

    const ExtractiveComposer fallback(std::shared_ptr<const Embedder>(&embedder, [](const Embedder*) {}), cfg.composer);
    const bool remote = text.empty() && cfg.generator && cfg.generator->is_remote();

    auto compose_and_verify = [&](const Generator* gen, const std::string& id_suffix) {
        auto t0 = Clock::now();
        if (gen) text = gen->compose(query, retrieved.nodes(), cfg.target_tokens);
        ans.timing_ms["compose"] += ms_since(t0);

        t0 = Clock::now();
        EvidenceSet all = retrieved;
        const std::string claims = claims_text(text);
        if (!claims.empty()) {
            auto [vt, vr] = call(retrieval_request(base_id + id_suffix, claims));
            if (vr.status == ToolStatus::ok) all.add_hits(vr.payload);
        }
        ans.grounding = verify(text, all.nodes(), embedder, cfg.thresholds);
        ans.timing_ms["verify"] += ms_since(t0);
    };

    if (!text.empty()) {
        compose_and_verify(nullptr, "-v");
    } else if (remote) {
        bool failed = false;
        try {
            compose_and_verify(cfg.generator.get(), "-v");
        } catch (const TransportError&) {
            failed = true;
        }
        if (failed || ans.grounding.verdict == Verdict::rejected) compose_and_verify(&fallback, "-v2");
    } else {
        compose_and_verify(&fallback, "-v");
    }

    ans.low_confidence = ans.grounding.verdict != Verdict::grounded;
    if (ans.grounding.verdict == Verdict::rejected && cfg.refuse_on_reject) {
        ans.text = std::string(kRefusalNotice);
    } else {
        ans.text = text;
        for (const auto& s : ans.grounding.per_sentence) {
            for (const auto& src : sources_for(tree, tree.node(s.best_evidence_id), s.sentence)) {
                const Citation c{s.best_evidence_id, src};
                const bool dup = std::any_of(ans.citations.begin(), ans.citations.end(), [&](const Citation& o) {
                    return o.node_id == c.node_id && o.source == c.source;
                });
                if (!dup) ans.citations.push_back(c);
            }
        }
    }
    ans.timing_ms["total"] = ms_since(start);
    session.turns.emplace_back(std::string(query), ans);
    return ans;
}

Json answer_to_json(const Answer& a) {
    Json cites = Json::array();
    for (const auto& c : a.citations) cites.push_back(citation_to_json(c));
    Json trace = Json::array();
    for (const auto& t : a.tool_trace) trace.push_back({{"tool", t.tool}, {"request_id", t.request_id}, {"status", t.status}});
    return {{"answer_text", a.text},
            {"citations", cites},
            {"verdict", std::string(to_string(a.grounding.verdict))},
            {"per_sentence", report_to_json(a.grounding)["per_sentence"]},
            {"grounding", report_to_json(a.grounding)},
            {"tool_trace", trace},
            {"timing_ms", a.timing_ms},
            {"low_confidence", a.low_confidence}};
}

}  // namespace groundwork
