#include "groundwork/evalharness.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "groundwork/http_client.hpp"
#include "groundwork/serialize.hpp"

namespace groundwork {

namespace {

double clamp5(double v) { return std::clamp(v, 0.0, 5.0); }

ScoreCard zero_card(const std::string& judge) {
    ScoreCard s;
    s.judge_name = judge;
    return s;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& t : tokenize_with_offsets(text)) {
        if (!is_word_byte(static_cast<unsigned char>(t.text.front()))) continue;
        std::string w(t.text);
        for (auto& c : w) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        out.push_back(std::move(w));
    }
    return out;
}

double token_f1(std::string_view candidate, std::string_view reference) {
    const auto cand = word_tokens(candidate);
    const auto ref = word_tokens(reference);
    if (cand.empty() || ref.empty()) return 0.0;
    std::unordered_map<std::string, long> counts;
    for (const auto& t : ref) ++counts[t];
    long overlap = 0;
    for (const auto& t : cand) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

double content_recall(std::string_view candidate, std::string_view reference) {
    const auto ref = word_tokens(reference);
    std::set<std::string> wanted;
    for (const auto& t : ref) {
        if (!is_stopword(t)) wanted.insert(t);
    }
    if (wanted.empty()) wanted.insert(ref.begin(), ref.end());
    if (wanted.empty()) return 0.0;
    const auto cand = word_tokens(candidate);
    const std::set<std::string> have(cand.begin(), cand.end());
    std::size_t hit = 0;
    for (const auto& w : wanted) hit += have.contains(w) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(wanted.size());
}

double fluency_ratio(std::string_view text) {
    const auto sentences = split_sentences(text);
    if (sentences.empty()) return 0.0;
    std::size_t good = 0;
    for (const auto& s : sentences) good += tokenize(s).size() >= 3 ? 1 : 0;
    return static_cast<double>(good) / static_cast<double>(sentences.size());
}

RuleJudge::RuleJudge(std::shared_ptr<const Embedder> embedder)
    : embedder_(embedder ? std::move(embedder) : std::make_shared<HashEmbedder>()) {}

ScoreCard RuleJudge::score(const EvalItem& item, const Answer& response) const {
    ScoreCard s;
    s.judge_name = name();
    s.correctness = clamp5(5.0 * token_f1(response.text, item.ground_truth));
    s.groundedness = clamp5(5.0 * response.grounding.overall);
    s.completeness = clamp5(5.0 * content_recall(response.text, item.ground_truth));
    if (!tokenize(response.text).empty() && !tokenize(item.question).empty()) {
        const Vector q = embedder_->embed(item.question);
        const Vector a = embedder_->embed(response.text);
        s.relevance = clamp5(5.0 * (dot(q.span(), a.span()) + 1.0) / 2.0);
    }
    s.fluency = clamp5(5.0 * fluency_ratio(response.text));
    return s;
}

ScoreCard RemoteJudge::score(const EvalItem& item, const Answer& response) const {
    const Json body = {{"question", item.question},
                       {"ground_truth", item.ground_truth},
                       {"answer", response.text},
                       {"citations", answer_to_json(response)["citations"]},
                       {"grounding", report_to_json(response.grounding)}};
    const Json reply = post_json(endpoint_, body);
    ScoreCard s;
    s.judge_name = name();
    try {
        s.correctness = clamp5(reply.at("correctness").get<double>());
        s.groundedness = clamp5(reply.at("groundedness").get<double>());
        s.completeness = clamp5(reply.at("completeness").get<double>());
        s.relevance = clamp5(reply.at("relevance").get<double>());
        s.fluency = clamp5(reply.at("fluency").get<double>());
    } catch (const Json::exception& e) {
        throw TransportError(std::string("judge reply is malformed: ") + e.what(), false);
    }
    return s;
}

BenchmarkReport run_benchmark(const std::vector<EvalItem>& items, const std::vector<NamedSystem>& systems,
                              const Judge& judge, const EvidenceResolver& resolver) {
    if (items.empty()) throw EvalError("benchmark has no items");
    if (systems.empty()) throw EvalError("no systems to evaluate");
    const GroundingThresholds thresholds;
    const HashEmbedder fallback_embedder;

    BenchmarkReport report;
    report.judge_name = judge.name();
    for (const auto& sys : systems) {
        SystemSummary summary{sys.name, zero_card(judge.name()), items.size(), 0};
        for (std::size_t i = 0; i < items.size(); ++i) {
            const EvalItem& item = items[i];
            ItemRecord rec{sys.name, i, item.question, "", zero_card(judge.name()), std::nullopt};
            try {
                Answer ans = sys.answer(item);
                if (ans.grounding.per_sentence.empty() && resolver) {
                    const Evidence ev = resolver(item);
                    if (!ev.empty()) ans.grounding = verify(ans.text, ev, fallback_embedder, thresholds);
                }
                rec.answer_text = ans.text;
                rec.scores = judge.score(item, ans);
            } catch (const std::exception& e) {
                rec.scores = zero_card(judge.name());
                rec.error = e.what();
                ++summary.failures;
            }
            summary.mean.correctness += rec.scores.correctness;
            summary.mean.groundedness += rec.scores.groundedness;
            summary.mean.completeness += rec.scores.completeness;
            summary.mean.relevance += rec.scores.relevance;
            summary.mean.fluency += rec.scores.fluency;
            report.records.push_back(std::move(rec));
        }
        const double n = static_cast<double>(items.size());
        summary.mean.correctness /= n;
        summary.mean.groundedness /= n;
        summary.mean.completeness /= n;
        summary.mean.relevance /= n;
        summary.mean.fluency /= n;
        report.systems.push_back(std::move(summary));
    }
    return report;
}

std::string render_table(const BenchmarkReport& report) {
    std::vector<std::array<std::string, 6>> rows;
    rows.push_back({kReportHeader[0], kReportHeader[1], kReportHeader[2], kReportHeader[3], kReportHeader[4],
                    kReportHeader[5]});
    for (const auto& s : report.systems) {
        rows.push_back({s.name, fmt2(s.mean.correctness), fmt2(s.mean.groundedness), fmt2(s.mean.completeness),
                        fmt2(s.mean.relevance), fmt2(s.mean.fluency)});
    }
    std::array<std::size_t, 6> width{};
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < 6; ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::array<std::string, 6>& r) {
        for (std::size_t c = 0; c < 6; ++c) {
            if (c) out << " | ";
            out << r[c];
            if (c + 1 < 6) out << std::string(width[c] - r[c].size(), ' ');
        }
        out << '\n';
    };
    line(rows[0]);
    for (std::size_t c = 0; c < 6; ++c) {
        if (c) out << "-+-";
        out << std::string(width[c], '-');
    }
    out << '\n';
    for (std::size_t r = 1; r < rows.size(); ++r) line(rows[r]);
    return out.str();
}

Json score_to_json(const ScoreCard& s) {
    return {{"correctness", s.correctness}, {"groundedness", s.groundedness}, {"completeness", s.completeness},
            {"relevance", s.relevance},     {"fluency", s.fluency},           {"judge_name", s.judge_name}};
}

void write_records(std::ostream& out, const BenchmarkReport& report) {
    for (const auto& r : report.records) {
        Json j = {{"record", "item"},          {"system", r.system},     {"item", r.item_index},
                  {"question", r.question},    {"answer", r.answer_text}, {"scores", score_to_json(r.scores)}};
        if (r.error) j["error"] = *r.error;
        out << j.dump() << '\n';
    }
    for (const auto& s : report.systems) {
        out << Json{{"record", "mean"},
                    {"system", s.name},
                    {"items", s.items},
                    {"failures", s.failures},
                    {"scores", score_to_json(s.mean)}}
                   .dump()
            << '\n';
    }
}

std::vector<EvalItem> parse_benchmark(std::istream& in, const std::vector<Document>& docs) {
    std::map<std::string, DocumentSource> by_id;
    for (const auto& d : docs) by_id.emplace(d.source.doc_id, d.source);
    std::vector<EvalItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (tokenize(line).empty()) continue;
        auto fail = [&](const std::string& why) {
            return EvalError("line " + std::to_string(lineno) + ": " + why);
        };
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error&) {
            throw fail("not a JSON object");
        }
        if (!j.is_object()) throw fail("not a JSON object");
        EvalItem item;
        for (const char* field : {"question", "ground_truth"}) {
            if (!j.contains(field) || !j[field].is_string()) throw fail(std::string("missing field ") + field);
        }
        item.question = j["question"].get<std::string>();
        item.ground_truth = j["ground_truth"].get<std::string>();
        if (tokenize(item.question).empty()) throw fail("question is empty");
        if (tokenize(item.ground_truth).empty()) throw fail("ground_truth is empty");
        for (const auto& id : j.value("context_doc_ids", Json::array())) {
            const auto key = id.get<std::string>();
            auto it = by_id.find(key);
            if (it == by_id.end()) throw fail("unknown context doc " + key);
            item.context_docs.push_back(it->second);
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<EvalItem> load_benchmark(const std::filesystem::path& path, const std::vector<Document>& docs) {
    std::ifstream in(path);
    if (!in) throw EvalError("cannot open benchmark " + path.string());
    return parse_benchmark(in, docs);
}

Evidence context_leaves(const RaptorTree& tree, const EvalItem& item) {
    std::set<std::string> wanted;
    for (const auto& s : item.context_docs) wanted.insert(s.doc_id);
    Evidence out;
    for (const auto& id : tree.levels().front()) {
        const TreeNode& n = tree.node(id);
        for (const auto& s : n.sources) {
            if (wanted.contains(s.doc_id)) {
                out.push_back(&n);
                break;
            }
        }
    }
    return out;
}

Answerer echo_system() {
    return [](const EvalItem& item) {
        Answer a;
        a.text = item.ground_truth;
        return a;
    };
}

Answerer no_retrieval_baseline() {
    return [](const EvalItem&) {
        Answer a;
        a.text =
            "Remain calm and think about your situation. Follow the advice of local officials when it is "
            "available. Contact emergency services if anyone is in danger.";
        return a;
    };
}

}  // namespace groundwork
