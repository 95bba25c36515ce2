#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "groundwork/assistant.hpp"
#include "groundwork/corpus.hpp"
#include "groundwork/raptor.hpp"
#include "groundwork/tools.hpp"

namespace httplib {
class Server;
}

namespace groundwork {

/// Everything a deployment can configure. Endpoint tokens are read from
/// the environment or config file and never written back out.
struct RuntimeConfig {
    BuildConfig build;
    EmbedderDescriptor embedder;
    std::optional<RemoteEndpoint> embed_endpoint;
    std::optional<RemoteEndpoint> generator_endpoint;
    std::optional<RemoteEndpoint> judge_endpoint;
    std::size_t k = kDefaultRetrievalK;
    std::size_t answer_tokens = 120;
    bool refuse_on_reject = false;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Reads the JSON config file, then applies GROUNDWORK_EMBED_URL,
/// GROUNDWORK_EMBED_TOKEN, GROUNDWORK_GENERATOR_URL, GROUNDWORK_GENERATOR_TOKEN,
/// GROUNDWORK_JUDGE_URL and GROUNDWORK_JUDGE_TOKEN.
RuntimeConfig runtime_config_from_json(const Json& j, const EnvLookup& env = {});
/// Without endpoint tokens.
Json runtime_config_to_json(const RuntimeConfig& cfg);

/// HTTP-style failure: status code plus {code, message} body.
class ServiceError : public Error {
public:
    ServiceError(int status, std::string code, const std::string& message)
        : Error(message), status_(status), code_(std::move(code)) {}
    int status() const noexcept { return status_; }
    const std::string& code() const noexcept { return code_; }

private:
    int status_;
    std::string code_;
};

struct HttpReply {
    int status = 200;
    Json body;
};

std::string corpus_digest(const std::vector<Document>& docs);

class Service {
public:
    explicit Service(RuntimeConfig cfg = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Json ingest(std::vector<Document> docs);
    /// Exclusive: a second concurrent build fails with status 409. The new
    /// tree replaces the active one only once it is complete.
    Json build(const Json& overrides = Json::object());
    struct QueryOptions {
        std::optional<std::size_t> k;
        std::optional<std::string> strategy;
    };
    Answer query(const std::string& session_id, const std::string& query, const QueryOptions& opts = {});
    Json tree_stats() const;

    void install_tree(std::shared_ptr<const RaptorTree> tree);
    std::shared_ptr<const RaptorTree> active_tree() const;
    const ToolRegistry& registry() const noexcept { return registry_; }
    const std::shared_ptr<const Embedder>& embedder() const noexcept { return embedder_; }

    /// Dispatches one request without a socket; the HTTP server calls this.
    HttpReply handle(const std::string& method, const std::string& path, const std::string& body);

    /// Binds and serves on a background thread; returns the bound port.
    int start(const std::string& host, int port);
    /// Blocks serving on the calling thread.
    void listen(const std::string& host, int port);
    void stop();

private:
    struct SessionSlot {
        std::mutex mutex;
        Session session;
    };

    RuntimeConfig cfg_;
    std::shared_ptr<const Embedder> embedder_;
    std::shared_ptr<const Generator> generator_;
    ToolRegistry registry_;

    mutable std::mutex state_mutex_;
    std::vector<Document> docs_;
    std::size_t chunk_count_ = 0;
    std::shared_ptr<const RaptorTree> tree_;
    std::atomic<bool> building_{false};

    std::mutex sessions_mutex_;
    std::map<std::string, std::unique_ptr<SessionSlot>> sessions_;

    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;

    void mount();
    AssistantConfig assistant_config(const QueryOptions& opts) const;
};

}  // namespace groundwork
