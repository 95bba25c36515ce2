#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "groundwork/matrix.hpp"

namespace groundwork {

class ReduceError : public Error {
public:
    using Error::Error;
};

struct ReduceConfig {
    std::size_t n_neighbors = 15;  // capped at N - 1
    std::size_t target_dim = 10;
    double a = 1.0;
    double b = 1.0;
    std::size_t epochs = 200;
    double learning_rate = 1.0;  // decayed linearly towards 0 over the epochs
    std::uint64_t seed = 0;
    /// Calibration target for sum_j p_ij; defaults to log2(n_neighbors).
    std::optional<double> sigma_target;
    /// How many times a loss-increasing step is halved before giving up on the epoch.
    std::size_t max_halvings = 20;

    void validate() const;
};

/// Fuzzy neighbourhood graph in the input space.
struct AffinityMatrix {
    std::size_t n = 0;
    /// Directed p_{j|i} = exp(-||x_i - x_j||^2 / sigma_i) over i's neighbours, row-major n x n.
    std::vector<double> directed;
    /// Symmetrized p = d + d^T - d * d^T.
    std::vector<double> p;
    std::vector<double> sigmas;
    std::vector<std::vector<std::size_t>> neighbor_lists;
    /// Points whose whole neighbourhood collapsed onto exact duplicates; their
    /// duplicate affinities were set to 1 without calibrating sigma.
    std::vector<std::size_t> degenerate_points;

    double operator()(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

struct LowDimEmbedding {
    Matrix y;
    double a = 1.0;
    double b = 1.0;
    /// Loss before the first epoch followed by the loss after each epoch.
    std::vector<double> loss_trace;
};

/// exp(-dist_sq / sigma).
double conditional_affinity(double dist_sq, double sigma);

/// Builds the neighbour graph, calibrates each sigma_i by bisection so that
/// sum over i's neighbours of exp(-d_ij^2 / sigma_i) hits the target within
/// 1e-4 (64 iterations max), then symmetrizes. Requires N >= 3.
AffinityMatrix high_dim_affinities(const Matrix& points, const ReduceConfig& cfg);
AffinityMatrix high_dim_affinities(std::span<const Vector> points, const ReduceConfig& cfg);

/// (1 + a * ||yi - yj||^(2b))^-1.
double low_dim_kernel(std::span<const double> yi, std::span<const double> yj, double a, double b);

inline constexpr double kProbabilityClip = 1e-7;

/// One ordered-pair term p log(p/q) + (1-p) log((1-p)/(1-q)), with both
/// probabilities clipped to [1e-7, 1 - 1e-7].
double cross_entropy_term(double p, double q);

/// Sum of cross_entropy_term over all ordered pairs i != j.
double umap_loss(const AffinityMatrix& affinities, const Matrix& y, double a, double b);
inline double umap_loss(const AffinityMatrix& affinities, const LowDimEmbedding& e) {
    return umap_loss(affinities, e.y, e.a, e.b);
}

/// Analytic d(loss)/dY, same shape as y.
Matrix umap_gradient(const AffinityMatrix& affinities, const Matrix& y, double a, double b);

/// Initial layout: row i is uniform noise in [-1, 1]^d from a generator
/// seeded by (seed, content hash of point i), so permuting the input
/// permutes the initial rows.
Matrix initial_layout(const Matrix& points, std::size_t target_dim, std::uint64_t seed);

/// Full-batch gradient descent with step halving. Requires
/// N >= max(4, n_neighbors + 1) after capping n_neighbors at N - 1.
LowDimEmbedding umap_fit(const Matrix& points, const ReduceConfig& cfg);
LowDimEmbedding umap_fit(std::span<const Vector> points, const ReduceConfig& cfg);

}  // namespace groundwork
