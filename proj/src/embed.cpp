#include "groundwork/embed.hpp"

#include <algorithm>
#include <cmath>

#include "groundwork/corpus.hpp"
#include "groundwork/hashing.hpp"
#include "groundwork/http_client.hpp"

namespace groundwork {

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool is_zero(const Vector& v) noexcept {
    for (double x : v.values) {
        if (x != 0.0) return false;
    }
    return true;
}

Vector normalize(const Vector& v) {
    for (double x : v.values) {
        if (!std::isfinite(x)) throw EmbedError("cannot normalize a non-finite vector");
    }
    const double norm = l2_norm(v.span());
    if (norm == 0.0) return v;
    Vector out(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v[i] / norm;
    return out;
}

namespace {

std::string lowercase(std::string_view token) {
    std::string out(token);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

void add_feature(Vector& v, std::string_view feature) {
    const std::uint64_t h = fnv1a64(feature);
    const std::uint64_t dim = v.dim();
    const auto index = static_cast<std::size_t>(h % dim);
    const bool negative = ((h / dim) & 1U) != 0;
    v[index] += negative ? -1.0 : 1.0;
}

}  // namespace

Vector hash_embed(std::span<const std::string> tokens, std::size_t dim) {
    if (dim < 2) throw EmbedError("embedding dimension must be >= 2");
    Vector raw(dim);
    std::string previous;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string tok = lowercase(tokens[i]);
        add_feature(raw, "uni:" + tok);
        if (i > 0) add_feature(raw, "bi:" + previous + '\x1f' + tok);
        previous = std::move(tok);
    }
    return normalize(raw);
}

Vector Embedder::embed(std::string_view text) const {
    std::string owned(text);
    return std::move(embed_batch(std::span<const std::string>(&owned, 1)).front());
}

std::vector<Vector> Embedder::embed_batch(std::span<const std::string> texts) const {
    for (const auto& text : texts) {
        if (tokenize_with_offsets(text).empty()) throw EmbedError("empty text");
    }
    auto raw = raw_embed(texts);
    if (raw.size() != texts.size()) throw EmbedError("embedder returned the wrong number of vectors");
    for (auto& v : raw) {
        if (v.dim() != dim()) throw EmbedError("embedder returned a vector of the wrong dimension");
        v = normalize(v);
    }
    return raw;
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
    if (dim < 2) throw EmbedError("embedding dimension must be >= 2");
}

std::vector<Vector> HashEmbedder::raw_embed(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(hash_embed(tokenize(text), dim_));
    return out;
}

RemoteEmbedder::RemoteEmbedder(RemoteEndpoint endpoint, std::size_t dim, std::string model_name,
                               std::ptrdiff_t max_in_flight)
    : endpoint_(std::move(endpoint)),
      dim_(dim),
      model_name_(std::move(model_name)),
      in_flight_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, 64)) {
    if (dim < 2) throw EmbedError("embedding dimension must be >= 2");
}

RemoteEmbedder::~RemoteEmbedder() = default;

EmbedderDescriptor RemoteEmbedder::descriptor() const {
    EmbedderDescriptor d{EmbedderKind::remote, dim_, {}};
    if (!model_name_.empty()) d.model_name = model_name_;
    return d;
}

std::vector<Vector> RemoteEmbedder::raw_embed(std::span<const std::string> texts) const {
    struct Permit {
        std::counting_semaphore<64>& sem;
        explicit Permit(std::counting_semaphore<64>& s) : sem(s) { sem.acquire(); }
        ~Permit() { sem.release(); }
    } permit(in_flight_);

    Json body = {{"texts", Json::array()}};
    for (const auto& t : texts) body["texts"].push_back(t);
    if (!model_name_.empty()) body["model"] = model_name_;
    const Json reply = post_json(endpoint_, body);

    auto it = reply.find("vectors");
    if (it == reply.end() || !it->is_array()) throw TransportError("reply has no \"vectors\" array", false);
    std::vector<Vector> out;
    for (const auto& row : *it) {
        if (!row.is_array()) throw TransportError("malformed vector in reply", false);
        Vector v;
        for (const auto& x : row) {
            if (!x.is_number()) throw TransportError("malformed vector in reply", false);
            v.values.push_back(x.get<double>());
        }
        out.push_back(std::move(v));
    }
    return out;
}

Vector embed_text(std::string_view text, const Embedder& embedder) { return embedder.embed(text); }

std::unique_ptr<Embedder> make_embedder(const EmbedderDescriptor& descriptor,
                                        const std::optional<RemoteEndpoint>& endpoint) {
    if (descriptor.kind == EmbedderKind::hash) return std::make_unique<HashEmbedder>(descriptor.dim);
    if (!endpoint) throw EmbedError("remote embedder requires an endpoint");
    return std::make_unique<RemoteEmbedder>(*endpoint, descriptor.dim,
                                            descriptor.model_name.value_or(""));
}

}  // namespace groundwork
