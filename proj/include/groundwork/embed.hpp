#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundwork/error.hpp"

namespace groundwork {

/// Dense real vector. Every vector produced by an Embedder is either unit
/// length (to 1e-9) or exactly zero.
struct Vector {
    std::vector<double> values;

    Vector() = default;
    explicit Vector(std::size_t dim) : values(dim, 0.0) {}
    explicit Vector(std::vector<double> v) : values(std::move(v)) {}
    Vector(std::initializer_list<double> v) : values(v) {}

    std::size_t dim() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    std::span<const double> span() const noexcept { return values; }

    friend bool operator==(const Vector&, const Vector&) = default;
};

class EmbedError : public Error {
public:
    using Error::Error;
};

/// Raised by network-backed embedders. retry_safe is true when the request
/// had no side effects on the server and may simply be re-issued.
class TransportError : public Error {
public:
    TransportError(const std::string& message, bool retry_safe)
        : Error(message), retry_safe_(retry_safe) {}
    bool retry_safe() const noexcept { return retry_safe_; }

private:
    bool retry_safe_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
bool is_zero(const Vector& v) noexcept;

/// Scales v to unit L2 norm; the zero vector is returned unchanged.
/// Throws EmbedError on non-finite input.
Vector normalize(const Vector& v);

/// Signed feature hashing over lowercased unigrams ("uni:<tok>") and
/// adjacent bigrams ("bi:<a>\x1f<b>"). For a feature hash h the bucket is
/// h % dim and the sign is negative when bit 0 of h / dim is set.
Vector hash_embed(std::span<const std::string> tokens, std::size_t dim);

enum class EmbedderKind { hash, remote };

struct EmbedderDescriptor {
    EmbedderKind kind = EmbedderKind::hash;
    std::size_t dim = 256;
    std::optional<std::string> model_name;
};

/// Text to vector contract. Implementations supply raw vectors; the
/// non-virtual entry points enforce the norm invariant.
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual std::size_t dim() const noexcept = 0;
    virtual EmbedderDescriptor descriptor() const = 0;

    /// Throws EmbedError("empty text") when text has no tokens.
    Vector embed(std::string_view text) const;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) const;

protected:
    virtual std::vector<Vector> raw_embed(std::span<const std::string> texts) const = 0;
};

class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 256);

    std::size_t dim() const noexcept override { return dim_; }
    EmbedderDescriptor descriptor() const override { return {EmbedderKind::hash, dim_, {}}; }

protected:
    std::vector<Vector> raw_embed(std::span<const std::string> texts) const override;

private:
    std::size_t dim_;
};

struct RemoteEndpoint {
    /// e.g. "http://127.0.0.1:8089/embed"
    std::string url;
    /// Sent as a bearer token; never logged or serialized.
    std::string auth_token;
    int timeout_seconds = 30;
};

/// POST {"texts": [...]} -> {"vectors": [[...], ...]}.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(RemoteEndpoint endpoint, std::size_t dim, std::string model_name = {},
                   std::ptrdiff_t max_in_flight = 4);
    ~RemoteEmbedder() override;

    std::size_t dim() const noexcept override { return dim_; }
    EmbedderDescriptor descriptor() const override;

protected:
    std::vector<Vector> raw_embed(std::span<const std::string> texts) const override;

private:
    RemoteEndpoint endpoint_;
    std::size_t dim_;
    std::string model_name_;
    mutable std::counting_semaphore<64> in_flight_;
};

/// Convenience: embedder.embed(text).
Vector embed_text(std::string_view text, const Embedder& embedder);

std::unique_ptr<Embedder> make_embedder(const EmbedderDescriptor& descriptor,
                                        const std::optional<RemoteEndpoint>& endpoint = {});

/// Splits "http://host:port/path" into the base ("http://host:port") and path.
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace groundwork
