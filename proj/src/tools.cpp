#include "groundwork/tools.hpp"

#include <algorithm>
#include <unordered_set>

namespace groundwork {

namespace {
#include "imperative_lexicon.inc"

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string normalized_key(std::string_view sentence) {
    std::string key;
    for (const auto& t : tokenize(sentence)) {
        if (!key.empty()) key += ' ';
        key += lower(t);
    }
    return key;
}

bool node_contains_sentence(const TreeNode& node, const std::string& sentence) {
    for (const auto& s : split_sentences(node.text)) {
        if (s == sentence) return true;
    }
    return false;
}

std::shared_ptr<const RaptorTree> require_tree(const TreeProvider& provider) {
    auto tree = provider ? provider() : nullptr;
    if (!tree) throw Error("knowledge base is not built");
    return tree;
}

std::string text_field(const Json& payload, std::initializer_list<const char*> keys) {
    if (payload.is_object()) {
        for (const char* k : keys) {
            if (auto it = payload.find(k); it != payload.end() && it->is_string()) return it->get<std::string>();
        }
    }
    throw Error("payload needs a text field");
}

std::size_t count_field(const Json& j, const char* key, std::size_t fallback) {
    if (!j.is_object()) return fallback;
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer() || it->get<std::int64_t>() <= 0) {
        throw Error(std::string("\"") + key + "\" must be a positive integer");
    }
    return static_cast<std::size_t>(it->get<std::int64_t>());
}

Json sources_json(const std::vector<DocumentSource>& sources) {
    Json out = Json::array();
    for (const auto& s : sources) out.push_back(source_to_json(s));
    return out;
}

constexpr double kStepMinCosine = 0.1;

}  // namespace

const std::vector<std::string>& imperative_lexicon() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> w(std::begin(kImperativeLexicon), std::end(kImperativeLexicon));
        std::sort(w.begin(), w.end());
        return w;
    }();
    return words;
}

bool is_imperative(std::string_view sentence) {
    const auto tokens = tokenize_with_offsets(sentence);
    if (tokens.empty()) return false;
    const auto& words = imperative_lexicon();
    return std::binary_search(words.begin(), words.end(), lower(tokens.front().text));
}

std::vector<ChecklistItem> generate_checklist(std::string_view topic, std::size_t k_items, const RaptorTree& tree,
                                              const Embedder& embedder) {
    if (k_items == 0) throw Error("k_items must be positive");
    const auto hits = collapsed_retrieve(tree, embedder.embed(topic), 2 * k_items);

    std::vector<ChecklistItem> items;
    std::unordered_set<std::string> seen;
    for (const auto& hit : hits) {
        for (const auto& sentence : split_sentences(hit.node->text)) {
            if (!is_complete_sentence(sentence) || !is_imperative(sentence)) continue;
            if (!seen.insert(normalized_key(sentence)).second) continue;
            ChecklistItem item{sentence, {}};
            for (const auto& other : hits) {
                if (!node_contains_sentence(*other.node, sentence)) continue;
                for (const auto& src : other.node->sources) item.citations.push_back({other.node->node_id, src});
            }
            items.push_back(std::move(item));
            if (items.size() == k_items) return items;
        }
    }
    if (items.empty()) throw NoActionableContent();
    return items;
}

std::vector<SelectedSentence> select_relevant_sentences(std::string_view query, const Evidence& evidence,
                                                        std::size_t target_tokens, const Embedder& embedder,
                                                        double min_cosine) {
    std::unordered_set<std::string> query_words;
    for (const auto& t : tokenize(query)) {
        std::string w = lower(t);
        if (is_word_byte(static_cast<unsigned char>(w.front())) && !is_stopword(w)) query_words.insert(std::move(w));
    }
    struct Candidate {
        SelectedSentence s;
        std::size_t order;
        std::size_t tokens;
    };
    std::vector<Candidate> pool;
    std::unordered_set<std::string> seen;
    for (const TreeNode* node : evidence) {
        for (auto& sentence : split_sentences(node->text)) {
            if (!is_complete_sentence(sentence) || is_heading(sentence) || seen.contains(sentence)) continue;
            const auto tokens = tokenize(sentence);
            const bool overlaps = std::any_of(tokens.begin(), tokens.end(),
                                              [&](const std::string& t) { return query_words.contains(lower(t)); });
            if (!overlaps) continue;
            seen.insert(sentence);
            pool.push_back({{std::move(sentence), node, 0.0}, pool.size(), tokens.size()});
        }
    }
    if (pool.empty()) return {};

    const Vector q = embedder.embed(query);
    std::vector<std::string> texts;
    for (const auto& c : pool) texts.push_back(c.s.text);
    const auto vecs = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i].s.score = dot(q.span(), vecs[i].span());
    std::erase_if(pool, [&](const Candidate& c) { return c.s.score <= min_cosine; });
    if (pool.empty()) return {};

    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& a, const Candidate& b) { return a.s.score > b.s.score; });
    std::vector<Candidate*> kept{&pool.front()};
    std::size_t used = pool.front().tokens;
    for (std::size_t i = 1; i < pool.size(); ++i) {
        if (used + pool[i].tokens > target_tokens) continue;
        used += pool[i].tokens;
        kept.push_back(&pool[i]);
    }
    std::sort(kept.begin(), kept.end(), [](const Candidate* a, const Candidate* b) { return a->order < b->order; });
    std::vector<SelectedSentence> out;
    for (Candidate* c : kept) out.push_back(std::move(c->s));
    return out;
}

Json citation_to_json(const Citation& c) {
    Json j = source_to_json(c.source);
    j["node_id"] = c.node_id;
    return j;
}

void register_builtin_tools(ToolRegistry& registry, TreeProvider provider, std::shared_ptr<const Embedder> embedder) {
    registry.register_tool(
        {kRetrievalTool, {kIntentRetrieve}, "Ranks knowledge-base nodes against the query.", kSchemaVersion},
        [provider, embedder](const ToolRequest& req) {
            const auto tree = require_tree(provider);
            const std::string query = text_field(req.payload, {"query", "topic"});
            const std::size_t k = count_field(req.payload, "k", kDefaultRetrievalK);
            const std::string strategy = req.payload.value("strategy", std::string("collapsed"));
            const Vector q = embedder->embed(query);
            std::vector<ScoredNode> hits;
            if (strategy == "collapsed") {
                hits = collapsed_retrieve(*tree, q, k);
            } else if (strategy == "traverse") {
                hits = traverse_retrieve(*tree, q, count_field(req.payload, "beam", 3), k);
            } else {
                throw Error("unknown strategy " + strategy);
            }
            Json out = {{"strategy", strategy}, {"hits", Json::array()}};
            for (const auto& h : hits) {
                out["hits"].push_back({{"node_id", h.node->node_id},
                                       {"score", h.score},
                                       {"level", h.node->level},
                                       {"text", h.node->text},
                                       {"sources", sources_json(h.node->sources)}});
            }
            return out;
        });

    registry.register_tool(
        {kChecklistTool, {kIntentChecklist}, "Builds a cited preparedness checklist for a topic.", kSchemaVersion},
        [provider, embedder](const ToolRequest& req) {
            const auto tree = require_tree(provider);
            const std::string topic = text_field(req.payload, {"topic", "query"});
            const std::size_t k = count_field(req.payload, "k_items", count_field(req.constraints, "max_items", 5));
            Json out = {{"topic", topic}, {"items", Json::array()}};
            for (const auto& item : generate_checklist(topic, k, *tree, *embedder)) {
                Json cites = Json::array();
                for (const auto& c : item.citations) cites.push_back(citation_to_json(c));
                out["items"].push_back({{"text", item.text}, {"citations", cites}});
            }
            return out;
        });

    registry.register_tool(
        {kSummaryTool, {kIntentSummary}, "Condenses retrieved guidance into ordered steps.", kSchemaVersion},
        [provider, embedder](const ToolRequest& req) {
            const auto tree = require_tree(provider);
            const std::string query = text_field(req.payload, {"query", "topic"});
            const std::size_t k = count_field(req.payload, "k", kDefaultRetrievalK);
            const std::size_t target = count_field(req.payload, "target_tokens", 80);
            const auto hits = collapsed_retrieve(*tree, embedder->embed(query), k);
            Evidence evidence;
            for (const auto& h : hits) evidence.push_back(h.node);
            Json out = {{"query", query}, {"steps", Json::array()}};
            for (const auto& s : select_relevant_sentences(query, evidence, target, *embedder, kStepMinCosine)) {
                out["steps"].push_back({{"text", s.text}, {"node_id", s.node->node_id}, {"sources", sources_json(s.node->sources)}});
            }
            return out;
        });

    auto stub = [](std::string name, std::string what) {
        return [name, what](const ToolRequest& req) {
            return Json{{"stub", true},
                        {"tool", name},
                        {"message", what + " is not connected in this deployment"},
                        {"echo_intent", req.intent}};
        };
    };
    registry.register_tool({"weather_stub", {"weather"}, "Placeholder for a weather service.", kSchemaVersion},
                           stub("weather_stub", "Weather lookup"));
    registry.register_tool({"video_search_stub", {"video_search"}, "Placeholder for a video search service.",
                            kSchemaVersion},
                           stub("video_search_stub", "Video search"));
    registry.register_tool({"map_stub", {"map"}, "Placeholder for a map rendering service.", kSchemaVersion},
                           stub("map_stub", "Map rendering"));
}

}  // namespace groundwork
