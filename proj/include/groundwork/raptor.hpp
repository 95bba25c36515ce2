#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "groundwork/cluster.hpp"
#include "groundwork/corpus.hpp"
#include "groundwork/embed.hpp"
#include "groundwork/reduce.hpp"
#include "groundwork/serialize.hpp"
#include "groundwork/vecindex.hpp"

namespace groundwork {

class TreeError : public Error {
public:
    using Error::Error;
};

struct TreeNode {
    std::string node_id;
    std::size_t level = 0;
    std::string text;
    Vector embedding;
    std::vector<std::string> children;
    std::vector<DocumentSource> sources;
};

struct BuildConfig {
    ChunkConfig chunk_cfg;
    ReduceConfig reduce_cfg;
    EmConfig em_cfg;
    std::size_t k_min = 1;
    std::size_t k_max = 8;  // clipped to half the level size while building
    std::size_t max_cluster_size = 12;
    std::size_t stop_node_count = 4;
    std::size_t summary_target_tokens = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

Json build_config_to_json(const BuildConfig& cfg);
/// Starts from `base` and overrides every field present in j.
BuildConfig build_config_from_json(const Json& j, BuildConfig base = {});

/// (texts, target tokens) -> one summary text.
class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual std::string summarize(std::span<const std::string> texts, std::size_t target_tokens) const = 0;
};

/// Deterministic stand-in for an abstractive model: selects the sentences
/// closest to the centroid of all sentence embeddings.
std::string extractive_summarize(std::span<const std::string> texts, std::size_t target_tokens);

class ExtractiveSummarizer final : public Summarizer {
public:
    std::string summarize(std::span<const std::string> texts, std::size_t target_tokens) const override {
        return extractive_summarize(texts, target_tokens);
    }
};

struct ScoredNode {
    const TreeNode* node = nullptr;
    double score = 0.0;
};

class RaptorTree {
public:
    /// Validates the structural invariants and indexes every node embedding.
    /// Throws TreeError describing the first violation.
    static RaptorTree assemble(std::vector<TreeNode> nodes, std::vector<std::vector<std::string>> levels,
                               BuildConfig config, EmbedderDescriptor embedder);

    const TreeNode& node(const std::string& id) const;
    bool contains(const std::string& id) const { return by_id_.contains(id); }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const std::vector<std::vector<std::string>>& levels() const noexcept { return levels_; }
    std::size_t root_level() const noexcept { return levels_.size() - 1; }
    const TreeNode& root() const { return node(levels_.back().front()); }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::vector<std::size_t> level_sizes() const;
    const BuildConfig& build_config() const noexcept { return config_; }
    const EmbedderDescriptor& embedder() const noexcept { return embedder_; }
    const VectorIndex& index() const noexcept { return index_; }

    /// Every violated invariant, as readable messages; empty when healthy.
    /// With an embedder, also checks that re-embedding each text reproduces
    /// its stored embedding bitwise.
    std::vector<std::string> check_invariants(const Embedder* embedder = nullptr) const;

    /// Versioned JSON-lines snapshot: a header record, one record per node,
    /// then the level table.
    void save(std::ostream& out) const;
    std::string snapshot() const;
    static RaptorTree load(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static RaptorTree load(const std::filesystem::path& path);

    /// FNV-1a digest of the snapshot; equal for equal trees.
    std::string digest() const;

    static constexpr int kSnapshotVersion = 1;

private:
    std::vector<TreeNode> nodes_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::vector<std::vector<std::string>> levels_;
    BuildConfig config_;
    EmbedderDescriptor embedder_;
    VectorIndex index_;
};

/// Embed, reduce, cluster, summarize; repeated until a level has at most
/// stop_node_count nodes, then one root summarizes that level. A node with
/// several cluster memberships is a child of several parents. Throws
/// TreeError naming the cluster when the summarizer fails.
RaptorTree build_tree(const std::vector<Chunk>& chunks, const Embedder& embedder,
                      const Summarizer& summarizer, const BuildConfig& cfg);

/// Beam search from the root: at each level keep the `beam` best-scoring
/// candidates and expand their children. Returns the best k of the kept nodes.
std::vector<ScoredNode> traverse_retrieve(const RaptorTree& tree, const Vector& query, std::size_t beam,
                                          std::size_t k);

inline constexpr std::size_t kDefaultRetrievalK = 5;

/// Top k over every node of every level.
std::vector<ScoredNode> collapsed_retrieve(const RaptorTree& tree, const Vector& query,
                                           std::size_t k = kDefaultRetrievalK);

/// Ids of the clusters one level of nodes is grouped into (member indices,
/// ascending), after overlap and oversize splitting. Exposed for tests.
std::vector<std::vector<std::size_t>> cluster_level(std::span<const Vector> embeddings, const BuildConfig& cfg,
                                                    std::uint64_t seed);

}  // namespace groundwork
