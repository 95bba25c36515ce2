#include "groundwork/raptor.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "groundwork/hashing.hpp"

namespace groundwork {

void BuildConfig::validate() const {
    chunk_cfg.validate();
    reduce_cfg.validate();
    em_cfg.validate();
    if (stop_node_count < 1) throw TreeError("stop_node_count must be >= 1");
    if (max_cluster_size < 2) throw TreeError("max_cluster_size must be >= 2");
    if (k_min < 1 || k_min > k_max) throw TreeError("k range must satisfy 1 <= k_min <= k_max");
    if (summary_target_tokens < 1) throw TreeError("summary_target_tokens must be positive");
}

Json build_config_to_json(const BuildConfig& cfg) {
    Json reduce = {{"n_neighbors", cfg.reduce_cfg.n_neighbors},
                   {"target_dim", cfg.reduce_cfg.target_dim},
                   {"a", cfg.reduce_cfg.a},
                   {"b", cfg.reduce_cfg.b},
                   {"epochs", cfg.reduce_cfg.epochs},
                   {"learning_rate", cfg.reduce_cfg.learning_rate},
                   {"max_halvings", cfg.reduce_cfg.max_halvings}};
    if (cfg.reduce_cfg.sigma_target) reduce["sigma_target"] = *cfg.reduce_cfg.sigma_target;
    return {{"chunk", {{"max_tokens", cfg.chunk_cfg.max_tokens}, {"overlap_tokens", cfg.chunk_cfg.overlap_tokens}}},
            {"reduce", reduce},
            {"em",
             {{"max_iters", cfg.em_cfg.max_iters},
              {"tol", cfg.em_cfg.tol},
              {"n_init", cfg.em_cfg.n_init},
              {"membership_threshold", cfg.em_cfg.membership_threshold},
              {"variance_floor", cfg.em_cfg.variance_floor}}},
            {"k_min", cfg.k_min},
            {"k_max", cfg.k_max},
            {"max_cluster_size", cfg.max_cluster_size},
            {"stop_node_count", cfg.stop_node_count},
            {"summary_target_tokens", cfg.summary_target_tokens},
            {"seed", cfg.seed}};
}

namespace {

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const Json::exception&) {
        throw TreeError(std::string("config field \"") + key + "\" has wrong type");
    }
}

}  // namespace

BuildConfig build_config_from_json(const Json& j, BuildConfig cfg) {
    if (!j.is_object()) throw TreeError("build config must be an object");
    if (auto it = j.find("chunk"); it != j.end()) {
        read_field(*it, "max_tokens", cfg.chunk_cfg.max_tokens);
        read_field(*it, "overlap_tokens", cfg.chunk_cfg.overlap_tokens);
    }
    if (auto it = j.find("reduce"); it != j.end()) {
        read_field(*it, "n_neighbors", cfg.reduce_cfg.n_neighbors);
        read_field(*it, "target_dim", cfg.reduce_cfg.target_dim);
        read_field(*it, "a", cfg.reduce_cfg.a);
        read_field(*it, "b", cfg.reduce_cfg.b);
        read_field(*it, "epochs", cfg.reduce_cfg.epochs);
        read_field(*it, "learning_rate", cfg.reduce_cfg.learning_rate);
        read_field(*it, "max_halvings", cfg.reduce_cfg.max_halvings);
        if (it->contains("sigma_target")) {
            double s = 0.0;
            read_field(*it, "sigma_target", s);
            cfg.reduce_cfg.sigma_target = s;
        }
    }
    if (auto it = j.find("em"); it != j.end()) {
        read_field(*it, "max_iters", cfg.em_cfg.max_iters);
        read_field(*it, "tol", cfg.em_cfg.tol);
        read_field(*it, "n_init", cfg.em_cfg.n_init);
        read_field(*it, "membership_threshold", cfg.em_cfg.membership_threshold);
        read_field(*it, "variance_floor", cfg.em_cfg.variance_floor);
    }
    read_field(j, "k_min", cfg.k_min);
    read_field(j, "k_max", cfg.k_max);
    read_field(j, "max_cluster_size", cfg.max_cluster_size);
    read_field(j, "stop_node_count", cfg.stop_node_count);
    read_field(j, "summary_target_tokens", cfg.summary_target_tokens);
    read_field(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Extractive summarizer

std::string extractive_summarize(std::span<const std::string> texts, std::size_t target_tokens) {
    if (texts.empty()) throw TreeError("nothing to summarize");
    std::vector<std::string> sentences;
    std::unordered_set<std::string> seen;
    std::vector<std::string> fragments;
    for (const auto& text : texts) {
        for (auto& s : split_sentences(text)) {
            if (!seen.insert(s).second) continue;
            (is_complete_sentence(s) ? sentences : fragments).push_back(std::move(s));
        }
    }
    // Chunk windows cut sentences at their edges; the halves are only used
    // when a cluster has nothing else.
    if (sentences.empty()) sentences = std::move(fragments);
    if (sentences.empty()) throw TreeError("nothing to summarize");

    static const HashEmbedder embedder(256);
    std::vector<Vector> embeddings;
    embeddings.reserve(sentences.size());
    Vector centroid(embedder.dim());
    for (const auto& s : sentences) {
        embeddings.push_back(embedder.embed(s));
        for (std::size_t d = 0; d < centroid.dim(); ++d) centroid[d] += embeddings.back()[d];
    }
    const Vector unit_centroid = normalize(centroid);

    std::vector<double> score(sentences.size(), 0.0);
    for (std::size_t i = 0; i < sentences.size(); ++i) score[i] = dot(embeddings[i].span(), unit_centroid.span());

    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    // The best sentence is always kept; the rest are taken while they fit.
    std::vector<bool> picked(sentences.size(), false);
    std::size_t used = 0;
    for (std::size_t rank = 0; rank < order.size() && used < target_tokens; ++rank) {
        const std::size_t i = order[rank];
        const std::size_t len = tokenize_with_offsets(sentences[i]).size();
        if (rank == 0 || used + len <= target_tokens) {
            picked[i] = true;
            used += len;
        }
    }

    std::string out;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (!picked[i]) continue;
        if (!out.empty()) out += ' ';
        out += sentences[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Clustering one level

namespace {

using Clusters = std::vector<std::vector<std::size_t>>;

Matrix reduced_points(std::span<const Vector> embeddings, const BuildConfig& cfg, std::uint64_t seed) {
    Matrix raw = stack_rows(embeddings);
    if (raw.rows < 4 || cfg.reduce_cfg.target_dim >= raw.cols) return raw;
    ReduceConfig rc = cfg.reduce_cfg;
    rc.seed = seed;
    rc.n_neighbors = std::min(rc.n_neighbors, raw.rows - 1);
    return umap_fit(raw, rc).y;
}

Clusters group_by_component(const std::vector<std::vector<std::size_t>>& memberships, std::size_t k) {
    Clusters groups(k);
    for (std::size_t i = 0; i < memberships.size(); ++i) {
        for (std::size_t c : memberships[i]) groups[c].push_back(i);
    }
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    return groups;
}

Clusters contiguous_pieces(const std::vector<std::size_t>& members, std::size_t max_size) {
    Clusters out;
    for (std::size_t b = 0; b < members.size(); b += max_size) {
        out.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(b),
                         members.begin() + static_cast<std::ptrdiff_t>(std::min(b + max_size, members.size())));
    }
    return out;
}

// Hard re-clustering of an oversized cluster into at least two pieces.
Clusters split_cluster(std::span<const Vector> embeddings, const std::vector<std::size_t>& members,
                       const BuildConfig& cfg, std::uint64_t seed) {
    std::vector<Vector> subset;
    subset.reserve(members.size());
    for (std::size_t i : members) subset.push_back(embeddings[i]);

    const Matrix points = reduced_points(subset, cfg, seed);
    const std::size_t k_max = std::max<std::size_t>(2, std::min(cfg.k_max, members.size() - 1));
    EmConfig em = cfg.em_cfg;
    em.seed = seed;
    const GmmModel model = select_k(points, 2, k_max, em);

    Clusters local(model.k);
    for (std::size_t i = 0; i < points.rows; ++i) {
        const auto r = responsibilities(points.row(i), model);
        local[static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin())].push_back(members[i]);
    }
    std::erase_if(local, [](const auto& g) { return g.empty(); });
    if (local.size() < 2) return contiguous_pieces(members, cfg.max_cluster_size);

    Clusters out;
    for (std::size_t g = 0; g < local.size(); ++g) {
        if (local[g].size() > cfg.max_cluster_size) {
            auto pieces = split_cluster(embeddings, local[g], cfg, mix_seed(seed, g + 1));
            out.insert(out.end(), pieces.begin(), pieces.end());
        } else {
            out.push_back(std::move(local[g]));
        }
    }
    return out;
}

Clusters split_oversized(std::span<const Vector> embeddings, Clusters clusters, const BuildConfig& cfg,
                         std::uint64_t seed) {
    Clusters out;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        if (clusters[c].size() > cfg.max_cluster_size) {
            auto pieces = split_cluster(embeddings, clusters[c], cfg, mix_seed(seed, 1000 + c));
            out.insert(out.end(), pieces.begin(), pieces.end());
        } else {
            out.push_back(std::move(clusters[c]));
        }
    }
    return out;
}

Clusters canonical(Clusters clusters) {
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end());
    clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
    return clusters;
}

}  // namespace

Clusters cluster_level(std::span<const Vector> embeddings, const BuildConfig& cfg, std::uint64_t seed) {
    const std::size_t n = embeddings.size();
    if (n == 0) return {};
    if (n == 1) return {{0}};

    const Matrix points = reduced_points(embeddings, cfg, seed);
    // At most n / 2 components: with the variance floor, BIC on a handful of
    // points otherwise favours near-singleton partitions.
    const std::size_t k_max = std::min(cfg.k_max, n / 2);
    const std::size_t k_min = std::min(cfg.k_min, k_max);
    EmConfig em = cfg.em_cfg;
    em.seed = seed;
    const GmmModel model = select_k(points, k_min, k_max, em);
    const SoftAssignment assignment = soft_assign(points, model, em.membership_threshold);

    Clusters clusters = canonical(split_oversized(
        embeddings, group_by_component(assignment.memberships, model.k), cfg, seed));
    if (clusters.size() < n) return clusters;

    // Overlap produced no contraction; hard assignment always does because
    // K <= n / 2 and every split yields fewer pieces than members.
    std::vector<std::vector<std::size_t>> hard(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = assignment.responsibilities.row(i);
        hard[i] = {static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin())};
    }
    return canonical(split_oversized(embeddings, group_by_component(hard, model.k), cfg, seed));
}

// ---------------------------------------------------------------------------
// Tree structure

namespace {

void append_sources(std::vector<DocumentSource>& into, const std::vector<DocumentSource>& from) {
    for (const auto& s : from) {
        if (std::find(into.begin(), into.end(), s) == into.end()) into.push_back(s);
    }
}

std::vector<std::string> structural_problems(const std::vector<TreeNode>& nodes,
                                             const std::unordered_map<std::string, std::size_t>& by_id,
                                             const std::vector<std::vector<std::string>>& levels) {
    std::vector<std::string> problems;
    if (levels.empty()) return {"tree has no levels"};
    if (levels.back().size() != 1) problems.push_back("top level must hold exactly one root node");

    std::unordered_set<std::string> placed;
    std::size_t placed_count = 0;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        if (levels[l].empty()) problems.push_back("level " + std::to_string(l) + " is empty");
        for (const auto& id : levels[l]) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                problems.push_back("level " + std::to_string(l) + " lists unknown node " + id);
                continue;
            }
            if (nodes[it->second].level != l) problems.push_back("node " + id + " is listed at the wrong level");
            if (!placed.insert(id).second) problems.push_back("node " + id + " is listed twice");
            ++placed_count;
        }
    }
    if (placed.size() != nodes.size()) problems.push_back("levels do not cover every node");

    for (const auto& n : nodes) {
        if (n.level == 0 && !n.children.empty()) problems.push_back("leaf " + n.node_id + " has children");
        if (n.level > 0 && n.children.empty()) problems.push_back("summary " + n.node_id + " has no children");
        for (const auto& c : n.children) {
            auto it = by_id.find(c);
            if (it == by_id.end()) {
                problems.push_back("node " + n.node_id + " has dangling child " + c);
            } else if (nodes[it->second].level + 1 != n.level) {
                problems.push_back("child " + c + " of " + n.node_id + " is not one level below");
            }
        }
    }

    if (problems.empty()) {
        std::unordered_set<std::string> reached;
        std::vector<std::string> stack{levels.back().front()};
        while (!stack.empty()) {
            std::string id = std::move(stack.back());
            stack.pop_back();
            if (!reached.insert(id).second) continue;
            for (const auto& c : nodes[by_id.at(id)].children) stack.push_back(c);
        }
        for (const auto& n : nodes) {
            if (!reached.contains(n.node_id)) problems.push_back("node " + n.node_id + " is unreachable from the root");
        }
    }
    return problems;
}

std::string node_id_for(std::size_t level, std::string_view text, std::span<const std::string> parts,
                        std::unordered_set<std::string>& used) {
    std::uint64_t h = fnv1a64(std::to_string(level));
    h = fnv1a64("\x1f", h);
    h = fnv1a64(text, h);
    for (const auto& p : parts) {
        h = fnv1a64("\x1e", h);
        h = fnv1a64(p, h);
    }
    std::string base = "L" + std::to_string(level) + "-" + to_hex(h);
    std::string id = base;
    for (int n = 2; !used.insert(id).second; ++n) id = base + "-" + std::to_string(n);
    return id;
}

}  // namespace

RaptorTree RaptorTree::assemble(std::vector<TreeNode> nodes, std::vector<std::vector<std::string>> levels,
                                BuildConfig config, EmbedderDescriptor embedder) {
    RaptorTree tree;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!tree.by_id_.emplace(nodes[i].node_id, i).second) {
            throw TreeError("duplicate node id " + nodes[i].node_id);
        }
    }
    tree.nodes_ = std::move(nodes);
    tree.levels_ = std::move(levels);
    if (auto problems = structural_problems(tree.nodes_, tree.by_id_, tree.levels_); !problems.empty()) {
        throw TreeError("malformed tree: " + problems.front());
    }
    tree.config_ = config;
    tree.embedder_ = std::move(embedder);

    std::vector<IndexedVector> items;
    items.reserve(tree.nodes_.size());
    for (const auto& n : tree.nodes_) items.push_back({n.node_id, n.embedding});
    tree.index_ = VectorIndex(items);
    return tree;
}

const TreeNode& RaptorTree::node(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw TreeError("unknown node " + id);
    return nodes_[it->second];
}

std::vector<std::size_t> RaptorTree::level_sizes() const {
    std::vector<std::size_t> sizes;
    for (const auto& l : levels_) sizes.push_back(l.size());
    return sizes;
}

std::vector<std::string> RaptorTree::check_invariants(const Embedder* embedder) const {
    auto problems = structural_problems(nodes_, by_id_, levels_);

    for (const auto& n : nodes_) {
        if (n.level == 0) {
            if (n.sources.empty()) problems.push_back("leaf " + n.node_id + " has no source");
            continue;
        }
        std::vector<DocumentSource> expected;
        for (const auto& c : n.children) {
            if (contains(c)) append_sources(expected, node(c).sources);
        }
        const bool same_size = expected.size() == n.sources.size();
        bool covered = same_size;
        for (const auto& s : expected) {
            if (std::find(n.sources.begin(), n.sources.end(), s) == n.sources.end()) covered = false;
        }
        if (!covered) problems.push_back("sources of " + n.node_id + " differ from the union of its children");
    }

    // The root level sits above the stop level by construction and is exempt.
    for (std::size_t l = 0; l + 2 < levels_.size(); ++l) {
        if (levels_[l].size() > config_.stop_node_count && levels_[l + 1].size() >= levels_[l].size()) {
            problems.push_back("level " + std::to_string(l + 1) + " did not shrink");
        }
    }

    if (embedder != nullptr) {
        for (const auto& n : nodes_) {
            if (embedder->embed(n.text) != n.embedding) {
                problems.push_back("embedding of " + n.node_id + " does not match its text");
            }
        }
    }
    return problems;
}

namespace {

Json embedder_to_json(const EmbedderDescriptor& d) {
    Json j = {{"kind", d.kind == EmbedderKind::hash ? "hash" : "remote"}, {"dim", d.dim}};
    if (d.model_name) j["model_name"] = *d.model_name;
    return j;
}

EmbedderDescriptor embedder_from_json(const Json& j) {
    EmbedderDescriptor d;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "hash") {
        d.kind = EmbedderKind::hash;
    } else if (kind == "remote") {
        d.kind = EmbedderKind::remote;
    } else {
        throw TreeError("unknown embedder kind " + kind);
    }
    d.dim = j.at("dim").get<std::size_t>();
    if (auto it = j.find("model_name"); it != j.end()) d.model_name = it->get<std::string>();
    return d;
}

}  // namespace

void RaptorTree::save(std::ostream& out) const {
    const Json header = {{"format", "groundwork.tree"},
                         {"version", kSnapshotVersion},
                         {"root_level", root_level()},
                         {"node_count", nodes_.size()},
                         {"embedder", embedder_to_json(embedder_)},
                         {"build_config", build_config_to_json(config_)}};
    out << header.dump() << '\n';
    for (const auto& n : nodes_) {
        Json sources = Json::array();
        for (const auto& s : n.sources) sources.push_back(source_to_json(s));
        const Json rec = {{"record", "node"},     {"node_id", n.node_id},   {"level", n.level},
                          {"text", n.text},       {"embedding", n.embedding.values},
                          {"children", n.children}, {"sources", sources}};
        out << rec.dump() << '\n';
    }
    out << Json{{"record", "levels"}, {"levels", levels_}}.dump() << '\n';
}

std::string RaptorTree::snapshot() const {
    std::ostringstream out;
    save(out);
    return out.str();
}

RaptorTree RaptorTree::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw TreeError("empty tree snapshot");
    try {
        const Json header = Json::parse(line);
        if (header.value("format", "") != "groundwork.tree") throw TreeError("not a tree snapshot");
        if (header.at("version").get<int>() != kSnapshotVersion) throw TreeError("unsupported tree snapshot version");
        const BuildConfig config = build_config_from_json(header.at("build_config"));
        const EmbedderDescriptor embedder = embedder_from_json(header.at("embedder"));

        std::vector<TreeNode> nodes;
        std::vector<std::vector<std::string>> levels;
        bool have_levels = false;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const Json rec = Json::parse(line);
            const std::string kind = rec.at("record").get<std::string>();
            if (kind == "node") {
                TreeNode n;
                n.node_id = rec.at("node_id").get<std::string>();
                n.level = rec.at("level").get<std::size_t>();
                n.text = rec.at("text").get<std::string>();
                n.embedding = Vector(rec.at("embedding").get<std::vector<double>>());
                n.children = rec.at("children").get<std::vector<std::string>>();
                for (const auto& s : rec.at("sources")) n.sources.push_back(source_from_json(s));
                nodes.push_back(std::move(n));
            } else if (kind == "levels") {
                levels = rec.at("levels").get<std::vector<std::vector<std::string>>>();
                have_levels = true;
            }
            // Unknown record kinds are skipped so newer writers stay readable.
        }
        if (!have_levels) throw TreeError("tree snapshot has no level table");
        return assemble(std::move(nodes), std::move(levels), config, embedder);
    } catch (const Json::exception& e) {
        throw TreeError(std::string("malformed tree snapshot: ") + e.what());
    }
}

void RaptorTree::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw TreeError("cannot open " + path.string());
    save(out);
}

RaptorTree RaptorTree::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TreeError("cannot open " + path.string());
    return load(in);
}

std::string RaptorTree::digest() const { return to_hex(fnv1a64(snapshot())); }

// ---------------------------------------------------------------------------
// Build

RaptorTree build_tree(const std::vector<Chunk>& chunks, const Embedder& embedder, const Summarizer& summarizer,
                      const BuildConfig& cfg) {
    cfg.validate();
    if (chunks.empty()) throw TreeError("cannot build a tree from zero chunks");

    std::vector<TreeNode> nodes;
    std::vector<std::vector<std::string>> levels(1);
    std::unordered_set<std::string> used;

    std::vector<std::string> texts;
    for (const auto& c : chunks) texts.push_back(c.text);
    auto embeddings = embedder.embed_batch(texts);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        TreeNode leaf;
        const std::string parts[] = {chunks[i].chunk_id};
        leaf.node_id = node_id_for(0, chunks[i].text, parts, used);
        leaf.level = 0;
        leaf.text = chunks[i].text;
        leaf.embedding = std::move(embeddings[i]);
        leaf.sources = {chunks[i].source};
        levels[0].push_back(leaf.node_id);
        nodes.push_back(std::move(leaf));
    }

    auto make_parent = [&](std::size_t level, const std::vector<std::size_t>& member_nodes,
                           const std::string& cluster_id) {
        std::vector<std::string> member_texts;
        TreeNode parent;
        parent.level = level;
        for (std::size_t idx : member_nodes) {
            member_texts.push_back(nodes[idx].text);
            parent.children.push_back(nodes[idx].node_id);
            append_sources(parent.sources, nodes[idx].sources);
        }
        try {
            parent.text = summarizer.summarize(member_texts, cfg.summary_target_tokens);
            parent.embedding = embedder.embed(parent.text);
        } catch (const std::exception& e) {
            throw TreeError("summarizer failed for cluster " + cluster_id + ": " + e.what());
        }
        parent.node_id = node_id_for(level, parent.text, parent.children, used);
        return parent;
    };

    // Positions (into `nodes`) of the current level.
    std::vector<std::size_t> current(nodes.size());
    std::iota(current.begin(), current.end(), 0);
    std::size_t level = 0;

    while (current.size() > cfg.stop_node_count) {
        std::vector<Vector> level_embeddings;
        for (std::size_t idx : current) level_embeddings.push_back(nodes[idx].embedding);
        const auto clusters = cluster_level(level_embeddings, cfg, mix_seed(cfg.seed, level + 1));
        if (clusters.size() >= current.size()) {
            throw TreeError("clustering failed to shrink level " + std::to_string(level));
        }

        std::vector<std::size_t> next;
        levels.emplace_back();
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            std::vector<std::size_t> members;
            for (std::size_t local : clusters[c]) members.push_back(current[local]);
            const std::string cluster_id = "L" + std::to_string(level + 1) + "/c" + std::to_string(c);
            TreeNode parent = make_parent(level + 1, members, cluster_id);
            levels.back().push_back(parent.node_id);
            next.push_back(nodes.size());
            nodes.push_back(std::move(parent));
        }
        current = std::move(next);
        ++level;
    }

    if (!(level > 0 && current.size() == 1)) {
        TreeNode root = make_parent(level + 1, current, "L" + std::to_string(level + 1) + "/root");
        levels.push_back({root.node_id});
        nodes.push_back(std::move(root));
    }

    return RaptorTree::assemble(std::move(nodes), std::move(levels), cfg, embedder.descriptor());
}

// ---------------------------------------------------------------------------
// Retrieval

namespace {

std::vector<ScoredNode> to_scored(const RaptorTree& tree, const std::vector<SearchHit>& hits) {
    std::vector<ScoredNode> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back({&tree.node(h.id), h.score});
    return out;
}

}  // namespace

std::vector<ScoredNode> traverse_retrieve(const RaptorTree& tree, const Vector& query, std::size_t beam,
                                          std::size_t k) {
    if (beam == 0) throw TreeError("beam must be positive");
    if (k == 0) throw TreeError("k must be positive");
    const VectorIndex& index = tree.index();
    const Vector unit = index.prepare_query(query);

    std::vector<SearchHit> kept;
    std::vector<std::string> candidates = tree.levels().back();
    while (!candidates.empty()) {
        std::vector<SearchHit> scored;
        std::unordered_set<std::string> seen;
        for (const auto& id : candidates) {
            if (seen.insert(id).second) scored.push_back({id, index.score_at(index.find(id), unit.span())});
        }
        std::sort(scored.begin(), scored.end(), ranks_before);
        if (scored.size() > beam) scored.resize(beam);

        std::vector<std::string> next;
        for (const auto& hit : scored) {
            const auto& children = tree.node(hit.id).children;
            next.insert(next.end(), children.begin(), children.end());
            kept.push_back(hit);
        }
        candidates = std::move(next);
    }
    std::sort(kept.begin(), kept.end(), ranks_before);
    if (kept.size() > k) kept.resize(k);
    return to_scored(tree, kept);
}

std::vector<ScoredNode> collapsed_retrieve(const RaptorTree& tree, const Vector& query, std::size_t k) {
    if (k == 0) throw TreeError("k must be positive");
    return to_scored(tree, tree.index().search(query, k));
}

}  // namespace groundwork
