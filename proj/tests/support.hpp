#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "groundwork/corpus.hpp"
#include "groundwork/embed.hpp"
#include "groundwork/hashing.hpp"
#include "groundwork/matrix.hpp"

namespace gwtest {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(GW_FIXTURE_DIR) / name; }

inline groundwork::Vector random_vector(groundwork::Rng& rng, std::size_t dim) {
    groundwork::Vector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

// Box-Muller on the project RNG so fixtures do not depend on the standard
// library's distribution implementations.
inline double gaussian(groundwork::Rng& rng) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double v = rng.uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
}

/// `per_blob` points around each centre with isotropic noise `sigma`.
inline groundwork::Matrix blobs(const std::vector<std::vector<double>>& centres, std::size_t per_blob, double sigma,
                                std::uint64_t seed, std::vector<std::size_t>* labels = nullptr) {
    groundwork::Rng rng(seed);
    const std::size_t d = centres.front().size();
    groundwork::Matrix m(centres.size() * per_blob, d);
    std::size_t r = 0;
    for (std::size_t c = 0; c < centres.size(); ++c) {
        for (std::size_t i = 0; i < per_blob; ++i, ++r) {
            for (std::size_t j = 0; j < d; ++j) m(r, j) = centres[c][j] + sigma * gaussian(rng);
            if (labels) labels->push_back(c);
        }
    }
    return m;
}

inline std::vector<groundwork::Chunk> fixture_chunks() {
    return groundwork::chunk_corpus(groundwork::load_corpus(fixture("corpus.jsonl")), groundwork::ChunkConfig{});
}

}  // namespace gwtest
