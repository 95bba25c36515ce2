#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "groundwork/grounding.hpp"
#include "groundwork/mcp.hpp"
#include "groundwork/raptor.hpp"

namespace groundwork {

/// Current tree, or null while none has been built. Tools resolve the tree
/// per call so a rebuilt tree is picked up without re-registering.
using TreeProvider = std::function<std::shared_ptr<const RaptorTree>()>;

struct Citation {
    std::string node_id;
    DocumentSource source;
};

struct ChecklistItem {
    std::string text;
    std::vector<Citation> citations;
};

class NoActionableContent : public Error {
public:
    NoActionableContent() : Error("no actionable content") {}
};

/// True when the first token (lowercased) is in the shipped imperative lexicon.
bool is_imperative(std::string_view sentence);
const std::vector<std::string>& imperative_lexicon();

/// Imperative sentences from the top 2 * k_items collapsed hits for the
/// topic, deduplicated, first k_items kept, each citing every retrieved node
/// that contains it. Throws NoActionableContent when none are found.
std::vector<ChecklistItem> generate_checklist(std::string_view topic, std::size_t k_items, const RaptorTree& tree,
                                              const Embedder& embedder);

Json citation_to_json(const Citation& c);

struct SelectedSentence {
    std::string text;
    const TreeNode* node = nullptr;
    double score = 0.0;
};

/// Complete evidence sentences that share a content word with the query and
/// whose cosine to it exceeds min_cosine, best first within the token budget
/// (the best is always kept), returned in evidence order. Empty when none
/// qualifies.
std::vector<SelectedSentence> select_relevant_sentences(std::string_view query, const Evidence& evidence,
                                                        std::size_t target_tokens, const Embedder& embedder,
                                                        double min_cosine);

inline constexpr const char* kRetrievalTool = "document_retrieval";
inline constexpr const char* kChecklistTool = "checklist_generator";
inline constexpr const char* kSummaryTool = "structured_summary";

/// Registers retrieval, checklist, and structured-summary tools plus the
/// weather, video-search, and map stubs, in that order.
void register_builtin_tools(ToolRegistry& registry, TreeProvider tree, std::shared_ptr<const Embedder> embedder);

}  // namespace groundwork
