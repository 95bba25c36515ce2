#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "groundwork/matrix.hpp"

namespace groundwork {

class ClusterError : public Error {
public:
    using Error::Error;
};

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> weights;    // k
    Matrix means;                   // k x dim
    Matrix variances;               // k x dim, each >= variance floor
    double log_likelihood = 0.0;    // ln L-hat on the fitting data
    /// Per-iteration log-likelihood, initial parameters first.
    std::vector<double> ll_trace;
    /// Some component holds less than kMinComponentMass points of
    /// responsibility, i.e. it has collapsed onto an outlier and its
    /// likelihood gain comes from the variance floor.
    bool degenerate = false;

    /// (K - 1) + K*d means + K*d variances.
    std::size_t n_params() const noexcept { return (k - 1) + 2 * k * dim; }
};

inline constexpr double kMinComponentMass = 2.0;

struct EmConfig {
    std::size_t max_iters = 200;
    double tol = 1e-6;  // relative log-likelihood change
    std::size_t n_init = 4;
    std::uint64_t seed = 0;
    double membership_threshold = 0.1;
    double variance_floor = 1e-6;

    void validate() const;
};

struct SoftAssignment {
    Matrix responsibilities;  // N x K, rows on the simplex
    std::vector<std::vector<std::size_t>> memberships;
};

/// ln p(x) under the mixture, via log-sum-exp.
double gmm_log_density(std::span<const double> x, const GmmModel& model);
double gmm_density(std::span<const double> x, const GmmModel& model);

/// Posterior component probabilities for one point.
std::vector<double> responsibilities(std::span<const double> x, const GmmModel& model);

/// Best of cfg.n_init seeded restarts (k-means++ style mean seeding) of EM.
/// Non-degenerate restarts win over degenerate ones regardless of likelihood.
/// Throws ClusterError when K > N, K == 0, or the data are non-finite.
GmmModel em_fit(const Matrix& points, std::size_t k, const EmConfig& cfg);

/// ln(N) * n_params - 2 ln L-hat.
double bic(const GmmModel& model, std::size_t n);

/// Fits every K in [k_min, k_max] and keeps the lowest BIC (ties: smaller K).
/// Degenerate fits only compete when every K in the range is degenerate.
GmmModel select_k(const Matrix& points, std::size_t k_min, std::size_t k_max, const EmConfig& cfg);

/// Memberships are components above threshold, always including the argmax.
SoftAssignment soft_assign(const Matrix& points, const GmmModel& model, double threshold);
/// Same rule applied to precomputed responsibilities.
std::vector<std::size_t> memberships_from(std::span<const double> resp, double threshold);

}  // namespace groundwork
