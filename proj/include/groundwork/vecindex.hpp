#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "groundwork/embed.hpp"

namespace groundwork {

class IndexError : public Error {
public:
    using Error::Error;
};

struct IndexedVector {
    std::string id;
    Vector vector;
};

struct SearchHit {
    std::string id;
    double score = 0.0;

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Cosine similarity, clamped to [-1, 1]. Throws IndexError on a zero
/// vector or a dimension mismatch.
double cosine(const Vector& a, const Vector& b);

/// Ranking order used everywhere: score descending, then id ascending.
inline bool ranks_before(const SearchHit& a, const SearchHit& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

/// Exact flat cosine index. Stores unit-normalized copies in one contiguous
/// row-major buffer so a query costs one dot product per stored vector.
/// Immutable once built; safe for concurrent readers.
class VectorIndex {
public:
    VectorIndex() = default;
    /// Throws IndexError on empty input, duplicate ids (naming the id),
    /// mismatched dimensions, or zero vectors.
    explicit VectorIndex(const std::vector<IndexedVector>& items);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return ids_.empty(); }

    /// Exactly min(k, size()) hits in ranks_before order.
    std::vector<SearchHit> search(const Vector& query, std::size_t k) const;

    /// Score of one stored row against an already-normalized query. Shares
    /// arithmetic with search() so callers ranking subsets get identical values.
    double score_at(std::size_t row, std::span<const double> unit_query) const;
    /// Normalizes a query, rejecting zero vectors and dimension mismatches.
    Vector prepare_query(const Vector& query) const;

    const std::string& id_at(std::size_t row) const { return ids_[row]; }
    /// Row of id, or npos.
    std::size_t find(const std::string& id) const;
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * dim_, dim_};
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    /// Snapshot layout (all integers little-endian): "SMVI", u16 version,
    /// u32 dim, u64 count, then per record u16 id length, id bytes, and dim
    /// float32 values.
    void save(std::ostream& out) const;
    static VectorIndex load(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

    static constexpr std::uint16_t kSnapshotVersion = 1;

private:
    std::vector<std::string> ids_;
    std::vector<double> data_;
    std::unordered_map<std::string, std::size_t> rows_;
    std::size_t dim_ = 0;
};

inline VectorIndex build_index(const std::vector<IndexedVector>& items) { return VectorIndex(items); }

}  // namespace groundwork
