#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "groundwork/embed.hpp"
#include "groundwork/grounding.hpp"
#include "groundwork/mcp.hpp"
#include "groundwork/raptor.hpp"
#include "groundwork/tools.hpp"

namespace groundwork {

inline constexpr std::string_view kAnswerPreamble = "Based on the retrieved guidance:";
inline constexpr std::string_view kNoMatchNotice =
    "No guidance in the knowledge base matches this question closely enough to answer it.";
inline constexpr std::string_view kRefusalNotice =
    "This answer could not be verified against the knowledge base and was withheld.";

struct ToolCall {
    std::string tool;
    std::string request_id;
    std::string status;
};

struct Answer {
    std::string text;
    std::vector<Citation> citations;
    GroundingReport grounding;
    std::vector<ToolCall> tool_trace;
    std::map<std::string, std::int64_t> timing_ms;
    bool low_confidence = false;
};

struct Session {
    std::string session_id;
    std::vector<std::pair<std::string, Answer>> turns;
    std::map<std::string, std::string> context;
};

/// Answer generation contract: (query, evidence, token budget) -> text.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string compose(std::string_view query, const Evidence& evidence, std::size_t target_tokens) const = 0;
    virtual bool is_remote() const noexcept { return false; }
};

struct ComposerConfig {
    /// Sentences whose cosine to the query is at or below this are never
    /// used, nor are sentences sharing no content word with the query.
    double min_query_cosine = 0.1;
};

/// Extractive composer: the select_relevant_sentences picks, one per line,
/// under kAnswerPreamble. Every emitted sentence occurs verbatim in the
/// evidence; when none is relevant the body is kNoMatchNotice.
std::string compose_answer(std::string_view query, const Evidence& evidence, std::size_t target_tokens,
                           const Embedder& embedder, const ComposerConfig& cfg = {});

class ExtractiveComposer final : public Generator {
public:
    explicit ExtractiveComposer(std::shared_ptr<const Embedder> embedder, ComposerConfig cfg = {})
        : embedder_(std::move(embedder)), cfg_(cfg) {}
    std::string compose(std::string_view query, const Evidence& evidence, std::size_t target_tokens) const override {
        return compose_answer(query, evidence, target_tokens, *embedder_, cfg_);
    }

private:
    std::shared_ptr<const Embedder> embedder_;
    ComposerConfig cfg_;
};

/// POST {"query", "evidence": [{"node_id", "text"}], "max_tokens"} -> {"text"}.
class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string compose(std::string_view query, const Evidence& evidence, std::size_t target_tokens) const override;
    bool is_remote() const noexcept override { return true; }

private:
    RemoteEndpoint endpoint_;
};

struct AssistantConfig {
    std::size_t k = kDefaultRetrievalK;
    /// "collapsed" or "traverse" for the first retrieval; verification
    /// re-retrieval is always collapsed.
    std::string strategy = "collapsed";
    std::size_t beam = 3;
    std::size_t target_tokens = 120;
    std::size_t checklist_items = 5;
    GroundingThresholds thresholds;
    ComposerConfig composer;
    /// When set (and remote), used instead of the extractive composer; a
    /// rejected remote answer is recomposed once extractively.
    std::shared_ptr<const Generator> generator;
    /// Replace rejected answers with kRefusalNotice instead of returning them.
    bool refuse_on_reject = false;
};

/// Route, retrieve, compose, re-retrieve against the answer, verify, cite.
/// Appends the turn to the session. Throws RoutingError when unroutable.
Answer answer_query(std::string_view query, Session& session, const RaptorTree& tree, const ToolRegistry& registry,
                    const Embedder& embedder, const AssistantConfig& cfg = {});

Json answer_to_json(const Answer& answer);

}  // namespace groundwork
