#include "groundwork/grounding.hpp"

#include <algorithm>
#include <cmath>

namespace groundwork {

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::grounded:
            return "grounded";
        case Verdict::flagged:
            return "flagged";
        case Verdict::rejected:
            return "rejected";
    }
    return "rejected";
}

Verdict verdict_from_string(std::string_view s) {
    if (s == "grounded") return Verdict::grounded;
    if (s == "flagged") return Verdict::flagged;
    if (s == "rejected") return Verdict::rejected;
    throw GroundingError("unknown verdict " + std::string(s));
}

void GroundingThresholds::validate() const {
    if (!(reject > 0.0 && reject <= sentence && sentence < 1.0)) {
        throw GroundingError("thresholds must satisfy 0 < reject <= sentence < 1");
    }
}

Evidence evidence_of(std::span<const TreeNode> nodes) {
    Evidence out;
    for (const auto& n : nodes) out.push_back(&n);
    return out;
}

bool is_heading(std::string_view sentence) noexcept { return !sentence.empty() && sentence.back() == ':'; }

namespace {

double mapped_similarity(const Vector& a, const Vector& b) {
    if (is_zero(a) || is_zero(b)) return 0.5;
    return (std::clamp(dot(a.span(), b.span()), -1.0, 1.0) + 1.0) / 2.0;
}

// Embeddings of one evidence node: the whole text first, then each sentence.
std::vector<Vector> node_views(const TreeNode& node, const Embedder& embedder) {
    std::vector<std::string> views{node.text};
    for (auto& s : split_sentences(node.text)) {
        if (!tokenize_with_offsets(s).empty()) views.push_back(std::move(s));
    }
    return embedder.embed_batch(views);
}

struct PreparedEvidence {
    const TreeNode* node;
    std::vector<Vector> views;
};

std::vector<PreparedEvidence> prepare(const Evidence& evidence, const Embedder& embedder) {
    if (evidence.empty()) throw GroundingError("evidence is empty");
    std::vector<PreparedEvidence> out;
    for (const TreeNode* n : evidence) out.push_back({n, node_views(*n, embedder)});
    return out;
}

constexpr double kTieTolerance = 1e-12;

Support best_support(const Vector& sentence, const std::vector<PreparedEvidence>& evidence) {
    Support best{"", -1.0};
    for (const auto& e : evidence) {
        double score = 0.0;
        for (const auto& v : e.views) score = std::max(score, mapped_similarity(sentence, v));
        const bool tie = std::abs(score - best.score) <= kTieTolerance;
        if ((!tie && score > best.score) || (tie && e.node->node_id < best.best_id)) {
            best = {e.node->node_id, score};
        }
    }
    return best;
}

}  // namespace

Support support_score(std::string_view sentence, const Evidence& evidence, const Embedder& embedder) {
    if (tokenize_with_offsets(sentence).empty()) throw GroundingError("empty sentence");
    return best_support(embedder.embed(sentence), prepare(evidence, embedder));
}

Verdict verdict_for(std::span<const SentenceSupport> per_sentence, const GroundingThresholds& thresholds) {
    if (per_sentence.empty()) return Verdict::rejected;
    bool all_supported = true;
    double total = 0.0;
    for (const auto& s : per_sentence) {
        total += s.support;
        if (s.support < thresholds.sentence) all_supported = false;
    }
    if (all_supported) return Verdict::grounded;
    if (total / static_cast<double>(per_sentence.size()) < thresholds.reject) return Verdict::rejected;
    return Verdict::flagged;
}

GroundingReport verify(std::string_view answer, const Evidence& evidence, const Embedder& embedder,
                       const GroundingThresholds& thresholds) {
    thresholds.validate();
    std::vector<std::string> claims;
    for (auto& s : split_sentences(answer)) {
        if (!is_heading(s) && !tokenize_with_offsets(s).empty()) claims.push_back(std::move(s));
    }
    if (claims.empty()) throw GroundingError("empty answer");
    const auto prepared = prepare(evidence, embedder);
    const auto embedded = embedder.embed_batch(claims);

    GroundingReport report;
    report.threshold_used = thresholds.sentence;
    report.reject_threshold = thresholds.reject;
    double total = 0.0;
    for (std::size_t i = 0; i < claims.size(); ++i) {
        const Support s = best_support(embedded[i], prepared);
        report.per_sentence.push_back({claims[i], s.best_id, s.score});
        total += s.score;
    }
    report.overall = total / static_cast<double>(claims.size());
    report.verdict = verdict_for(report.per_sentence, thresholds);
    return report;
}

Json report_to_json(const GroundingReport& report) {
    Json rows = Json::array();
    for (const auto& s : report.per_sentence) {
        rows.push_back({{"sentence", s.sentence}, {"best_evidence_id", s.best_evidence_id}, {"support", s.support}});
    }
    return {{"per_sentence", rows},
            {"overall", report.overall},
            {"verdict", to_string(report.verdict)},
            {"threshold_used", report.threshold_used},
            {"reject_threshold", report.reject_threshold}};
}

GroundingReport report_from_json(const Json& j) {
    GroundingReport r;
    for (const auto& row : j.at("per_sentence")) {
        r.per_sentence.push_back({row.at("sentence").get<std::string>(), row.at("best_evidence_id").get<std::string>(),
                                  row.at("support").get<double>()});
    }
    r.overall = j.at("overall").get<double>();
    r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    r.threshold_used = j.at("threshold_used").get<double>();
    r.reject_threshold = j.value("reject_threshold", 0.55);
    return r;
}

}  // namespace groundwork
