#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groundwork/error.hpp"
#include "groundwork/serialize.hpp"

namespace groundwork {

class ProtocolError : public Error {
public:
    using Error::Error;
};

class RoutingError : public Error {
public:
    using Error::Error;
};

inline constexpr int kSchemaVersion = 1;

inline constexpr const char* kIntentRetrieve = "retrieve_docs";
inline constexpr const char* kIntentChecklist = "checklist";
inline constexpr const char* kIntentSummary = "structured_summary";

struct ToolRequest {
    std::string request_id;
    std::string intent;
    std::map<std::string, std::string> context;
    Json constraints = Json::object();
    Json payload = Json::object();
    /// Fields this version does not know, kept verbatim for re-encoding.
    Json extensions = Json::object();

    friend bool operator==(const ToolRequest&, const ToolRequest&) = default;
};

enum class ToolStatus { ok, error };

struct ToolFailure {
    std::string code;
    std::string message;

    friend bool operator==(const ToolFailure&, const ToolFailure&) = default;
};

struct ToolResponse {
    std::string request_id;
    ToolStatus status = ToolStatus::ok;
    Json payload = Json::object();
    std::optional<ToolFailure> error;
    Json extensions = Json::object();

    friend bool operator==(const ToolResponse&, const ToolResponse&) = default;
};

using Frame = std::vector<std::uint8_t>;

/// 4-byte big-endian body length followed by one UTF-8 JSON object with
/// keys in sorted order, so equal requests always produce equal bytes.
Frame encode_request(const ToolRequest& req);
/// Throws ProtocolError("short frame") when the body is shorter than its
/// prefix, and names the first missing required field.
ToolRequest decode_request(std::span<const std::uint8_t> frame);

Frame encode_response(const ToolResponse& resp);
ToolResponse decode_response(std::span<const std::uint8_t> frame);

void write_frame(std::ostream& out, const Frame& frame);
/// Next frame from a stream; nullopt on clean end of stream.
std::optional<Frame> read_frame(std::istream& in);

struct ToolDescriptor {
    std::string name;
    std::vector<std::string> intents;
    std::string description;
    int schema_version = kSchemaVersion;

    friend bool operator==(const ToolDescriptor&, const ToolDescriptor&) = default;
};

struct AuditRecord {
    std::string ts;  // ISO-8601 UTC
    std::string request_id;
    std::string tool;
    std::string status;
    std::int64_t duration_ms = 0;
};

/// Append-only invocation log; optionally mirrored as JSON lines to a stream.
class AuditTrail {
public:
    AuditTrail() = default;
    explicit AuditTrail(std::ostream& mirror) : mirror_(&mirror) {}

    void append(AuditRecord record);
    std::vector<AuditRecord> records() const;
    std::size_t size() const;

    static Json to_json(const AuditRecord& r);

private:
    mutable std::mutex mu_;
    std::vector<AuditRecord> records_;
    std::ostream* mirror_ = nullptr;
};

/// Intent the keyword table assigns to free text: "checklist" or the phrase
/// "prepare kit" select the checklist intent, "summarize" or "steps" the
/// structured summary intent, anything else retrieval.
std::string keyword_intent(std::string_view text);

class ToolRegistry {
public:
    using Handler = std::function<Json(const ToolRequest&)>;

    explicit ToolRegistry(std::shared_ptr<AuditTrail> audit = std::make_shared<AuditTrail>());

    /// Throws RoutingError on a duplicate name or a descriptor without intents.
    void register_tool(ToolDescriptor descriptor, Handler handler, bool reentrant = true);

    const ToolDescriptor* find(const std::string& name) const;
    /// Descriptors in registration order.
    std::vector<ToolDescriptor> list() const;
    bool empty() const noexcept { return tools_.empty(); }

    /// Exact intent match first, then the keyword table over the payload's
    /// "query" (or "topic") text; unserved intents fall back to retrieval.
    /// Throws RoutingError("unroutable") when nothing can serve the request.
    std::string route(const ToolRequest& req) const;

    /// Routes and runs the handler. Handler exceptions become status=error
    /// with code "tool_failure"; every call leaves exactly one audit record.
    ToolResponse invoke(const ToolRequest& req) const;

    const std::shared_ptr<AuditTrail>& audit() const noexcept { return audit_; }

private:
    struct Entry {
        ToolDescriptor descriptor;
        Handler handler;
        bool reentrant;
        std::unique_ptr<std::mutex> serial;
    };
    const Entry* serving(const std::string& intent) const;

    std::vector<Entry> tools_;
    std::shared_ptr<AuditTrail> audit_;
};

}  // namespace groundwork
