#include "groundwork/service.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "groundwork/hashing.hpp"

namespace groundwork {

namespace {

std::optional<RemoteEndpoint> endpoint_from(const Json& j, const EnvLookup& env, const std::string& prefix) {
    std::optional<RemoteEndpoint> ep;
    if (j.is_object() && j.contains("url")) {
        ep = RemoteEndpoint{};
        ep->url = j.at("url").get<std::string>();
        ep->auth_token = j.value("auth_token", std::string());
        ep->timeout_seconds = j.value("timeout_seconds", 30);
    }
    if (env) {
        if (auto url = env(prefix + "_URL")) {
            if (!ep) ep = RemoteEndpoint{};
            ep->url = *url;
        }
        if (auto token = env(prefix + "_TOKEN"); token && ep) ep->auth_token = *token;
    }
    return ep;
}

Json endpoint_json(const std::optional<RemoteEndpoint>& ep) {
    if (!ep) return nullptr;
    return {{"url", ep->url}, {"timeout_seconds", ep->timeout_seconds}};
}

Json error_body(const std::string& code, const std::string& message) {
    return {{"code", code}, {"message", message}};
}

Json parse_body(const std::string& body) {
    if (body.empty()) return Json::object();
    try {
        return Json::parse(body);
    } catch (const Json::parse_error& e) {
        throw ServiceError(400, "bad_request", std::string("body is not JSON: ") + e.what());
    }
}

std::int64_t ms_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

RuntimeConfig runtime_config_from_json(const Json& j, const EnvLookup& env) {
    RuntimeConfig cfg;
    const Json obj = j.is_object() ? j : Json::object();
    if (obj.contains("build")) cfg.build = build_config_from_json(obj["build"]);
    if (obj.contains("embedder")) {
        const Json& e = obj["embedder"];
        const std::string kind = e.value("kind", std::string("hash"));
        if (kind == "remote") {
            cfg.embedder.kind = EmbedderKind::remote;
        } else if (kind != "hash") {
            throw Error("unknown embedder kind " + kind);
        }
        cfg.embedder.dim = e.value("dim", cfg.embedder.dim);
        if (e.contains("model_name")) cfg.embedder.model_name = e["model_name"].get<std::string>();
    }
    cfg.embed_endpoint = endpoint_from(obj.value("embedder", Json::object()), env, "GROUNDWORK_EMBED");
    cfg.generator_endpoint = endpoint_from(obj.value("generator", Json::object()), env, "GROUNDWORK_GENERATOR");
    cfg.judge_endpoint = endpoint_from(obj.value("judge", Json::object()), env, "GROUNDWORK_JUDGE");
    if (cfg.embed_endpoint && !obj.contains("embedder")) cfg.embedder.kind = EmbedderKind::remote;
    cfg.k = obj.value("k", cfg.k);
    cfg.answer_tokens = obj.value("answer_tokens", cfg.answer_tokens);
    cfg.refuse_on_reject = obj.value("refuse_on_reject", cfg.refuse_on_reject);
    if (cfg.k == 0) throw Error("k must be positive");
    cfg.build.validate();
    return cfg;
}

Json runtime_config_to_json(const RuntimeConfig& cfg) {
    Json e = {{"kind", cfg.embedder.kind == EmbedderKind::hash ? "hash" : "remote"}, {"dim", cfg.embedder.dim}};
    if (cfg.embedder.model_name) e["model_name"] = *cfg.embedder.model_name;
    if (cfg.embed_endpoint) e.update(endpoint_json(cfg.embed_endpoint));
    return {{"build", build_config_to_json(cfg.build)},
            {"embedder", e},
            {"generator", endpoint_json(cfg.generator_endpoint)},
            {"judge", endpoint_json(cfg.judge_endpoint)},
            {"k", cfg.k},
            {"answer_tokens", cfg.answer_tokens},
            {"refuse_on_reject", cfg.refuse_on_reject}};
}

std::string corpus_digest(const std::vector<Document>& docs) {
    std::ostringstream out;
    write_corpus(out, docs);
    return to_hex(fnv1a64(out.str()));
}

Service::Service(RuntimeConfig cfg)
    : cfg_(std::move(cfg)), embedder_(make_embedder(cfg_.embedder, cfg_.embed_endpoint)) {
    if (cfg_.generator_endpoint) generator_ = std::make_shared<RemoteGenerator>(*cfg_.generator_endpoint);
    register_builtin_tools(registry_, [this] { return active_tree(); }, embedder_);
}

Service::~Service() { stop(); }

Json Service::ingest(std::vector<Document> docs) {
    if (docs.empty()) throw ServiceError(400, "bad_request", "no corpus records");
    std::size_t chunks = 0;
    try {
        chunks = chunk_corpus(docs, cfg_.build.chunk_cfg).size();
    } catch (const Error& e) {
        throw ServiceError(400, "bad_request", e.what());
    }
    std::lock_guard lock(state_mutex_);
    docs_ = std::move(docs);
    chunk_count_ = chunks;
    return {{"doc_count", docs_.size()}, {"chunk_count", chunk_count_}};
}

Json Service::build(const Json& overrides) {
    if (building_.exchange(true)) throw ServiceError(409, "build_in_progress", "a build is already running");
    struct Release {
        std::atomic<bool>& flag;
        ~Release() { flag = false; }
    } release{building_};

    BuildConfig bc;
    try {
        bc = build_config_from_json(overrides.is_object() ? overrides : Json::object(), cfg_.build);
        bc.validate();
    } catch (const std::exception& e) {
        throw ServiceError(400, "bad_request", e.what());
    }
    std::vector<Document> docs;
    {
        std::lock_guard lock(state_mutex_);
        docs = docs_;
    }
    if (docs.empty()) throw ServiceError(409, "no_corpus", "ingest a corpus before building");

    const auto t0 = std::chrono::steady_clock::now();
    const auto chunks = chunk_corpus(docs, bc.chunk_cfg);
    const ExtractiveSummarizer summarizer;
    auto tree = std::make_shared<const RaptorTree>(build_tree(chunks, *embedder_, summarizer, bc));
    const auto build_ms = ms_since(t0);
    install_tree(tree);

    Json levels = Json::array();
    for (auto n : tree->level_sizes()) levels.push_back(n);
    return {{"levels", levels}, {"node_count", tree->size()}, {"build_ms", build_ms}, {"digest", tree->digest()}};
}

void Service::install_tree(std::shared_ptr<const RaptorTree> tree) {
    if (!tree) throw Error("tree is null");
    const auto d = tree->embedder();
    if (d.kind != embedder_->descriptor().kind || d.dim != embedder_->dim()) {
        throw ServiceError(409, "embedder_mismatch", "tree was built with a different embedder");
    }
    std::lock_guard lock(state_mutex_);
    tree_ = std::move(tree);
}

std::shared_ptr<const RaptorTree> Service::active_tree() const {
    std::lock_guard lock(state_mutex_);
    return tree_;
}

AssistantConfig Service::assistant_config(const QueryOptions& opts) const {
    AssistantConfig ac;
    ac.k = opts.k.value_or(cfg_.k);
    ac.strategy = opts.strategy.value_or("collapsed");
    ac.target_tokens = cfg_.answer_tokens;
    ac.generator = generator_;
    ac.refuse_on_reject = cfg_.refuse_on_reject;
    if (ac.k == 0) throw ServiceError(400, "bad_request", "k must be positive");
    if (ac.strategy != "collapsed" && ac.strategy != "traverse") {
        throw ServiceError(400, "bad_request", "strategy must be collapsed or traverse");
    }
    return ac;
}

Answer Service::query(const std::string& session_id, const std::string& text, const QueryOptions& opts) {
    const auto tree = active_tree();
    if (!tree) throw ServiceError(503, "not_ready", "no knowledge base has been built yet");
    if (tokenize(text).empty()) throw ServiceError(400, "bad_request", "query is empty");

    SessionSlot* slot = nullptr;
    {
        std::lock_guard lock(sessions_mutex_);
        auto& entry = sessions_[session_id];
        if (!entry) {
            entry = std::make_unique<SessionSlot>();
            entry->session.session_id = session_id;
        }
        slot = entry.get();
    }
    const AssistantConfig ac = assistant_config(opts);
    std::lock_guard lock(slot->mutex);
    return answer_query(text, slot->session, *tree, registry_, *embedder_, ac);
}

Json Service::tree_stats() const {
    std::shared_ptr<const RaptorTree> tree;
    Json out;
    {
        std::lock_guard lock(state_mutex_);
        tree = tree_;
        out["doc_count"] = docs_.size();
        out["chunk_count"] = chunk_count_;
        out["corpus_digest"] = docs_.empty() ? Json(nullptr) : Json(corpus_digest(docs_));
    }
    out["built"] = static_cast<bool>(tree);
    out["building"] = building_.load();
    if (tree) {
        out["levels"] = tree->level_sizes();
        out["node_count"] = tree->size();
        out["config"] = build_config_to_json(tree->build_config());
        out["tree_digest"] = tree->digest();
    } else {
        out["config"] = build_config_to_json(cfg_.build);
    }
    return out;
}

HttpReply Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
        if (path == "/healthz" && method == "GET") return {200, {{"status", "ok"}}};
        if (path == "/tree/stats" && method == "GET") return {200, tree_stats()};
        if (path == "/ingest" && method == "POST") {
            std::vector<Document> docs;
            try {
                docs = parse_corpus(std::string_view(body));
            } catch (const Error& e) {
                throw ServiceError(400, "bad_request", e.what());
            }
            return {200, ingest(std::move(docs))};
        }
        if (path == "/build" && method == "POST") return {200, build(parse_body(body))};
        if (path == "/query" && method == "POST") {
            const Json j = parse_body(body);
            if (!j.is_object() || !j.contains("query") || !j["query"].is_string()) {
                throw ServiceError(400, "bad_request", "body needs a \"query\" string");
            }
            const std::string session = j.value("session_id", std::string("default"));
            QueryOptions opts;
            try {
                if (j.contains("k")) {
                    const std::int64_t k = j["k"].get<std::int64_t>();
                    if (k <= 0) throw ServiceError(400, "bad_request", "k must be positive");
                    opts.k = static_cast<std::size_t>(k);
                }
                if (j.contains("strategy")) opts.strategy = j["strategy"].get<std::string>();
            } catch (const Json::exception&) {
                throw ServiceError(400, "bad_request", "k must be an integer and strategy a string");
            }
            return {200, answer_to_json(query(session, j["query"].get<std::string>(), opts))};
        }
        if (path == "/healthz" || path == "/tree/stats" || path == "/ingest" || path == "/build" || path == "/query") {
            return {405, error_body("method_not_allowed", method + " is not supported on " + path)};
        }
        return {404, error_body("not_found", "no route " + path)};
    } catch (const ServiceError& e) {
        return {e.status(), error_body(e.code(), e.what())};
    } catch (const RoutingError& e) {
        return {422, error_body("unroutable", e.what())};
    } catch (const std::exception& e) {
        return {500, error_body("internal", e.what())};
    }
}

void Service::mount() {
    server_ = std::make_unique<httplib::Server>();
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        const HttpReply reply = handle(req.method, req.path, req.body);
        res.status = reply.status;
        res.set_content(reply.body.dump(), "application/json");
    };
    for (const char* p : {"/healthz", "/tree/stats", "/ingest", "/build", "/query"}) {
        server_->Get(p, forward);
        server_->Post(p, forward);
    }
}

int Service::start(const std::string& host, int port) {
    if (server_) throw Error("server already running");
    mount();
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        server_.reset();
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    }
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    return bound;
}

void Service::listen(const std::string& host, int port) {
    mount();
    if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
    if (server_) server_->stop();
    if (server_thread_.joinable()) server_thread_.join();
    server_.reset();
}

}  // namespace groundwork
