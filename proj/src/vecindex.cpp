#include "groundwork/vecindex.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace groundwork {

double cosine(const Vector& a, const Vector& b) {
    if (a.dim() != b.dim()) throw IndexError("dimension mismatch in cosine");
    const double na = l2_norm(a.span());
    const double nb = l2_norm(b.span());
    if (na == 0.0 || nb == 0.0) throw IndexError("cosine undefined for zero vector");
    return std::clamp(dot(a.span(), b.span()) / (na * nb), -1.0, 1.0);
}

VectorIndex::VectorIndex(const std::vector<IndexedVector>& items) {
    if (items.empty()) throw IndexError("cannot build an index from zero vectors");
    dim_ = items.front().vector.dim();
    if (dim_ == 0) throw IndexError("vectors must have positive dimension");
    ids_.reserve(items.size());
    data_.reserve(items.size() * dim_);
    for (const auto& item : items) {
        if (item.vector.dim() != dim_) throw IndexError("dimension mismatch for id " + item.id);
        if (!rows_.emplace(item.id, ids_.size()).second) throw IndexError("duplicate id " + item.id);
        if (is_zero(item.vector)) throw IndexError("zero vector for id " + item.id);
        const Vector unit = normalize(item.vector);
        ids_.push_back(item.id);
        data_.insert(data_.end(), unit.values.begin(), unit.values.end());
    }
}

Vector VectorIndex::prepare_query(const Vector& query) const {
    if (query.dim() != dim_) throw IndexError("query dimension mismatch");
    if (is_zero(query)) throw IndexError("query is the zero vector");
    return normalize(query);
}

double VectorIndex::score_at(std::size_t r, std::span<const double> unit_query) const {
    return std::clamp(dot(row(r), unit_query), -1.0, 1.0);
}

std::vector<SearchHit> VectorIndex::search(const Vector& query, std::size_t k) const {
    if (k == 0) throw IndexError("k must be positive");
    const Vector unit = prepare_query(query);
    std::vector<SearchHit> hits;
    hits.reserve(ids_.size());
    for (std::size_t r = 0; r < ids_.size(); ++r) hits.push_back({ids_[r], score_at(r, unit.span())});
    const std::size_t take = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(), ranks_before);
    hits.resize(take);
    return hits;
}

std::size_t VectorIndex::find(const std::string& id) const {
    auto it = rows_.find(id);
    return it == rows_.end() ? npos : it->second;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IndexError("truncated index snapshot");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

}  // namespace

void VectorIndex::save(std::ostream& out) const {
    out.write("SMVI", 4);
    put_le<std::uint16_t>(out, kSnapshotVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
    put_le<std::uint64_t>(out, ids_.size());
    for (std::size_t r = 0; r < ids_.size(); ++r) {
        if (ids_[r].size() > UINT16_MAX) throw IndexError("id too long for snapshot: " + ids_[r]);
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ids_[r].size()));
        out.write(ids_[r].data(), static_cast<std::streamsize>(ids_[r].size()));
        for (double x : row(r)) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
    if (!out) throw IndexError("failed writing index snapshot");
}

VectorIndex VectorIndex::load(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "SMVI", 4) != 0) throw IndexError("bad index snapshot magic");
    const auto version = get_le<std::uint16_t>(in);
    if (version != kSnapshotVersion) throw IndexError("unsupported index snapshot version " + std::to_string(version));
    const auto dim = get_le<std::uint32_t>(in);
    const auto count = get_le<std::uint64_t>(in);
    std::vector<IndexedVector> items;
    items.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = get_le<std::uint16_t>(in);
        std::string id(len, '\0');
        if (!in.read(id.data(), len)) throw IndexError("truncated index snapshot");
        Vector v(dim);
        for (std::uint32_t d = 0; d < dim; ++d) v[d] = std::bit_cast<float>(get_le<std::uint32_t>(in));
        items.push_back({std::move(id), std::move(v)});
    }
    return VectorIndex(items);
}

void VectorIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IndexError("cannot open " + path.string());
    save(out);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexError("cannot open " + path.string());
    return load(in);
}

}  // namespace groundwork
