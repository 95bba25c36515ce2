#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "groundwork/assistant.hpp"
#include "groundwork/corpus.hpp"

namespace groundwork {

class EvalError : public Error {
public:
    using Error::Error;
};

struct EvalItem {
    std::string question;
    std::string ground_truth;
    std::vector<DocumentSource> context_docs;
};

struct ScoreCard {
    double correctness = 0.0;
    double groundedness = 0.0;
    double completeness = 0.0;
    double relevance = 0.0;
    double fluency = 0.0;
    std::string judge_name;
};

/// Lowercased word tokens; punctuation dropped.
std::vector<std::string> word_tokens(std::string_view text);
/// Multiset token F1 over word_tokens. Zero when either side is empty.
double token_f1(std::string_view candidate, std::string_view reference);
/// Fraction of the reference's distinct non-stopword tokens present in the
/// candidate. When the reference has only stopwords all its tokens count.
double content_recall(std::string_view candidate, std::string_view reference);
/// Share of splitter segments with at least three tokens.
double fluency_ratio(std::string_view text);

class Judge {
public:
    virtual ~Judge() = default;
    virtual std::string name() const = 0;
    virtual ScoreCard score(const EvalItem& item, const Answer& response) const = 0;
};

/// Deterministic offline judge: 5 * token-F1, 5 * grounding overall,
/// 5 * content recall, 5 * mapped query cosine, 5 * fluency ratio.
class RuleJudge final : public Judge {
public:
    explicit RuleJudge(std::shared_ptr<const Embedder> embedder = nullptr);
    std::string name() const override { return "rule"; }
    ScoreCard score(const EvalItem& item, const Answer& response) const override;

private:
    std::shared_ptr<const Embedder> embedder_;
};

/// POST {"question", "ground_truth", "answer", "citations", "grounding"}
/// -> {"correctness", "groundedness", "completeness", "relevance", "fluency"}.
class RemoteJudge final : public Judge {
public:
    explicit RemoteJudge(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string name() const override { return "remote"; }
    ScoreCard score(const EvalItem& item, const Answer& response) const override;

private:
    RemoteEndpoint endpoint_;
};

using Answerer = std::function<Answer(const EvalItem&)>;

struct NamedSystem {
    std::string name;
    Answerer answer;
};

/// Evidence for answers that arrive without a grounding report.
using EvidenceResolver = std::function<Evidence(const EvalItem&)>;

struct ItemRecord {
    std::string system;
    std::size_t item_index = 0;
    std::string question;
    std::string answer_text;
    ScoreCard scores;
    std::optional<std::string> error;
};

struct SystemSummary {
    std::string name;
    ScoreCard mean;
    std::size_t items = 0;
    std::size_t failures = 0;
};

struct BenchmarkReport {
    std::string judge_name;
    std::vector<SystemSummary> systems;
    std::vector<ItemRecord> records;
};

BenchmarkReport run_benchmark(const std::vector<EvalItem>& items, const std::vector<NamedSystem>& systems,
                              const Judge& judge, const EvidenceResolver& resolver = {});

inline constexpr const char* kReportHeader[] = {"Model", "Correct.", "Grounded.", "Complete.", "Relevance", "Fluency"};

/// Aligned text table, means to two decimals.
std::string render_table(const BenchmarkReport& report);
/// One JSON object per line: per-item records, then per-system means.
void write_records(std::ostream& out, const BenchmarkReport& report);
Json score_to_json(const ScoreCard& s);

/// Records {question, ground_truth, context_doc_ids}; ids resolve against docs.
std::vector<EvalItem> parse_benchmark(std::istream& in, const std::vector<Document>& docs);
std::vector<EvalItem> load_benchmark(const std::filesystem::path& path, const std::vector<Document>& docs);

/// Leaves of the tree drawn from the item's context documents.
Evidence context_leaves(const RaptorTree& tree, const EvalItem& item);

/// Returns the ground truth verbatim.
Answerer echo_system();
/// Answers from a fixed generic script without consulting the corpus.
Answerer no_retrieval_baseline();

}  // namespace groundwork
