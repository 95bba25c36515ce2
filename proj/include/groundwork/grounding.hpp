#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundwork/embed.hpp"
#include "groundwork/raptor.hpp"
#include "groundwork/serialize.hpp"

namespace groundwork {

class GroundingError : public Error {
public:
    using Error::Error;
};

enum class Verdict { grounded, flagged, rejected };

std::string_view to_string(Verdict v) noexcept;
Verdict verdict_from_string(std::string_view s);

struct SentenceSupport {
    std::string sentence;
    std::string best_evidence_id;
    double support = 0.0;  // in [0, 1]
};

struct GroundingThresholds {
    double sentence = 0.75;  // every sentence at or above this: grounded
    double reject = 0.55;    // mean support below this: rejected

    void validate() const;
};

struct GroundingReport {
    std::vector<SentenceSupport> per_sentence;
    double overall = 0.0;
    Verdict verdict = Verdict::rejected;
    double threshold_used = 0.75;
    double reject_threshold = 0.55;
};

struct Support {
    std::string best_id;
    double score = 0.0;
};

using Evidence = std::vector<const TreeNode*>;

/// Pointers into `nodes`, for callers holding evidence by value.
Evidence evidence_of(std::span<const TreeNode> nodes);

/// Lines ending in ':' are headings and carry no claim to check.
bool is_heading(std::string_view sentence) noexcept;

/// Best mapped similarity (cos + 1) / 2 between the sentence and any
/// evidence node, where a node is compared as a whole and sentence by
/// sentence. Ties go to the smaller node id.
Support support_score(std::string_view sentence, const Evidence& evidence, const Embedder& embedder);

/// Scores every non-heading sentence of `answer`. Throws GroundingError on an
/// answer with no checkable sentence or on empty evidence.
GroundingReport verify(std::string_view answer, const Evidence& evidence, const Embedder& embedder,
                       const GroundingThresholds& thresholds = {});

/// Verdict implied by per-sentence supports alone.
Verdict verdict_for(std::span<const SentenceSupport> per_sentence, const GroundingThresholds& thresholds);

Json report_to_json(const GroundingReport& report);
GroundingReport report_from_json(const Json& j);

}  // namespace groundwork
