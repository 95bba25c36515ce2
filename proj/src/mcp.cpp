#include "groundwork/mcp.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>

#include "groundwork/corpus.hpp"

namespace groundwork {

namespace {

Frame frame_body(const std::string& body) {
    if (body.size() > UINT32_MAX) throw ProtocolError("frame body too large");
    const auto len = static_cast<std::uint32_t>(body.size());
    Frame out;
    out.reserve(4 + body.size());
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>((len >> shift) & 0xff));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

Json frame_json(std::span<const std::uint8_t> frame) {
    if (frame.size() < 4) throw ProtocolError("short frame");
    const std::uint32_t len = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                              (std::uint32_t{frame[2]} << 8) | std::uint32_t{frame[3]};
    if (frame.size() - 4 < len) throw ProtocolError("short frame");
    if (frame.size() - 4 > len) throw ProtocolError("trailing bytes after frame body");
    Json j;
    try {
        j = Json::parse(frame.begin() + 4, frame.end());
    } catch (const Json::parse_error& e) {
        throw ProtocolError(std::string("malformed frame body: ") + e.what());
    }
    if (!j.is_object()) throw ProtocolError("frame body is not an object");
    return j;
}

const Json& required(const Json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end()) throw ProtocolError(std::string("missing required field \"") + field + "\"");
    return *it;
}

std::string required_string(const Json& j, const char* field) {
    const Json& v = required(j, field);
    if (!v.is_string()) throw ProtocolError(std::string("field \"") + field + "\" must be a string");
    return v.get<std::string>();
}

Json collect_extensions(const Json& j, std::initializer_list<const char*> known) {
    Json ext = Json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool is_known = false;
        for (const char* k : known) is_known = is_known || it.key() == k;
        if (!is_known) ext[it.key()] = it.value();
    }
    return ext;
}

}  // namespace

Frame encode_request(const ToolRequest& req) {
    Json j = req.extensions.is_object() ? req.extensions : Json::object();
    j["request_id"] = req.request_id;
    j["intent"] = req.intent;
    j["context"] = req.context;
    j["constraints"] = req.constraints;
    j["payload"] = req.payload;
    return frame_body(j.dump());
}

ToolRequest decode_request(std::span<const std::uint8_t> frame) {
    const Json j = frame_json(frame);
    ToolRequest req;
    req.request_id = required_string(j, "request_id");
    req.intent = required_string(j, "intent");
    const Json& ctx = required(j, "context");
    if (!ctx.is_object()) throw ProtocolError("field \"context\" must be an object");
    for (auto it = ctx.begin(); it != ctx.end(); ++it) {
        if (!it->is_string()) throw ProtocolError("context values must be strings");
        req.context[it.key()] = it->get<std::string>();
    }
    req.constraints = required(j, "constraints");
    req.payload = required(j, "payload");
    req.extensions = collect_extensions(j, {"request_id", "intent", "context", "constraints", "payload"});
    return req;
}

Frame encode_response(const ToolResponse& resp) {
    if ((resp.status == ToolStatus::error) != resp.error.has_value()) {
        throw ProtocolError("status must be error exactly when an error is present");
    }
    Json j = resp.extensions.is_object() ? resp.extensions : Json::object();
    j["request_id"] = resp.request_id;
    j["status"] = resp.status == ToolStatus::ok ? "ok" : "error";
    j["payload"] = resp.payload;
    if (resp.error) j["error"] = {{"code", resp.error->code}, {"message", resp.error->message}};
    return frame_body(j.dump());
}

ToolResponse decode_response(std::span<const std::uint8_t> frame) {
    const Json j = frame_json(frame);
    ToolResponse resp;
    resp.request_id = required_string(j, "request_id");
    const std::string status = required_string(j, "status");
    if (status == "ok") {
        resp.status = ToolStatus::ok;
    } else if (status == "error") {
        resp.status = ToolStatus::error;
    } else {
        throw ProtocolError("unknown status " + status);
    }
    resp.payload = required(j, "payload");
    if (auto it = j.find("error"); it != j.end() && !it->is_null()) {
        resp.error = ToolFailure{required_string(*it, "code"), required_string(*it, "message")};
    }
    if ((resp.status == ToolStatus::error) != resp.error.has_value()) {
        throw ProtocolError("status must be error exactly when an error is present");
    }
    resp.extensions = collect_extensions(j, {"request_id", "status", "payload", "error"});
    return resp;
}

void write_frame(std::ostream& out, const Frame& frame) {
    out.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
    out.flush();
}

std::optional<Frame> read_frame(std::istream& in) {
    Frame frame(4);
    in.read(reinterpret_cast<char*>(frame.data()), 4);
    if (in.gcount() == 0) return std::nullopt;
    if (in.gcount() < 4) throw ProtocolError("short frame");
    const std::uint32_t len = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                              (std::uint32_t{frame[2]} << 8) | std::uint32_t{frame[3]};
    frame.resize(4 + static_cast<std::size_t>(len));
    in.read(reinterpret_cast<char*>(frame.data() + 4), len);
    if (static_cast<std::uint32_t>(in.gcount()) < len) throw ProtocolError("short frame");
    return frame;
}

// ---------------------------------------------------------------------------

namespace {

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count() % 1000;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

}  // namespace

Json AuditTrail::to_json(const AuditRecord& r) {
    return {{"ts", r.ts}, {"request_id", r.request_id}, {"tool", r.tool}, {"status", r.status},
            {"duration_ms", r.duration_ms}};
}

void AuditTrail::append(AuditRecord record) {
    std::lock_guard lock(mu_);
    if (mirror_ != nullptr) *mirror_ << to_json(record).dump() << '\n';
    records_.push_back(std::move(record));
}

std::vector<AuditRecord> AuditTrail::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::size_t AuditTrail::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

std::string keyword_intent(std::string_view text) {
    std::vector<std::string> words;
    for (auto& t : tokenize(text)) {
        for (auto& c : t) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        words.push_back(std::move(t));
    }
    auto has = [&](std::string_view w) { return std::find(words.begin(), words.end(), w) != words.end(); };
    bool prepare_kit = false;
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
        prepare_kit = prepare_kit || (words[i] == "prepare" && words[i + 1] == "kit");
    }
    if (has("checklist") || prepare_kit) return kIntentChecklist;
    if (has("summarize") || has("steps")) return kIntentSummary;
    return kIntentRetrieve;
}

ToolRegistry::ToolRegistry(std::shared_ptr<AuditTrail> audit) : audit_(std::move(audit)) {
    if (!audit_) audit_ = std::make_shared<AuditTrail>();
}

void ToolRegistry::register_tool(ToolDescriptor descriptor, Handler handler, bool reentrant) {
    if (descriptor.name.empty()) throw RoutingError("tool name must be non-empty");
    if (descriptor.intents.empty()) throw RoutingError("tool " + descriptor.name + " serves no intents");
    if (find(descriptor.name) != nullptr) throw RoutingError("tool " + descriptor.name + " is already registered");
    tools_.push_back({std::move(descriptor), std::move(handler), reentrant,
                      reentrant ? nullptr : std::make_unique<std::mutex>()});
}

const ToolDescriptor* ToolRegistry::find(const std::string& name) const {
    for (const auto& e : tools_) {
        if (e.descriptor.name == name) return &e.descriptor;
    }
    return nullptr;
}

std::vector<ToolDescriptor> ToolRegistry::list() const {
    std::vector<ToolDescriptor> out;
    for (const auto& e : tools_) out.push_back(e.descriptor);
    return out;
}

const ToolRegistry::Entry* ToolRegistry::serving(const std::string& intent) const {
    for (const auto& e : tools_) {
        for (const auto& i : e.descriptor.intents) {
            if (i == intent) return &e;
        }
    }
    return nullptr;
}

std::string ToolRegistry::route(const ToolRequest& req) const {
    if (!req.intent.empty()) {
        if (const Entry* e = serving(req.intent)) return e->descriptor.name;
    }
    std::string text;
    if (req.payload.is_object()) {
        if (auto it = req.payload.find("query"); it != req.payload.end() && it->is_string()) {
            text = it->get<std::string>();
        } else if (auto t = req.payload.find("topic"); t != req.payload.end() && t->is_string()) {
            text = t->get<std::string>();
        }
    }
    if (const Entry* e = serving(keyword_intent(text))) return e->descriptor.name;
    if (const Entry* e = serving(kIntentRetrieve)) return e->descriptor.name;
    throw RoutingError("unroutable: no tool serves request " + req.request_id);
}

ToolResponse ToolRegistry::invoke(const ToolRequest& req) const {
    const auto start = std::chrono::steady_clock::now();
    const auto wall = std::chrono::system_clock::now();
    ToolResponse resp;
    resp.request_id = req.request_id;
    std::string tool;
    try {
        tool = route(req);
        const Entry* entry = nullptr;
        for (const auto& e : tools_) {
            if (e.descriptor.name == tool) entry = &e;
        }
        try {
            if (entry->serial) {
                std::lock_guard lock(*entry->serial);
                resp.payload = entry->handler(req);
            } else {
                resp.payload = entry->handler(req);
            }
        } catch (const std::exception& e) {
            resp.status = ToolStatus::error;
            resp.payload = Json::object();
            resp.error = ToolFailure{"tool_failure", e.what()};
        }
    } catch (const RoutingError& e) {
        resp.status = ToolStatus::error;
        resp.error = ToolFailure{"unroutable", e.what()};
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    audit_->append({utc_timestamp(wall), req.request_id, tool, resp.status == ToolStatus::ok ? "ok" : "error",
                    elapsed.count()});
    return resp;
}

}  // namespace groundwork
