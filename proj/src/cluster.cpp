#include "groundwork/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "groundwork/hashing.hpp"

namespace groundwork {

void EmConfig::validate() const {
    if (max_iters < 1) throw ClusterError("max_iters must be positive");
    if (!(tol > 0.0)) throw ClusterError("tol must be positive");
    if (n_init < 1) throw ClusterError("n_init must be positive");
    if (!(membership_threshold > 0.0 && membership_threshold < 1.0)) {
        throw ClusterError("membership_threshold must lie in (0, 1)");
    }
    if (!(variance_floor > 0.0)) throw ClusterError("variance_floor must be positive");
}

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;  // ln(2 pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double x : xs) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

// ln(pi_k) + ln N(x | mu_k, diag var_k).
double component_log_joint(std::span<const double> x, const GmmModel& m, std::size_t c) {
    if (m.weights[c] <= 0.0) return kNegInf;
    double acc = std::log(m.weights[c]);
    for (std::size_t d = 0; d < m.dim; ++d) {
        const double var = m.variances(c, d);
        const double diff = x[d] - m.means(c, d);
        acc -= 0.5 * (kLogTwoPi + std::log(var) + diff * diff / var);
    }
    return acc;
}

void check_point(std::span<const double> x, const GmmModel& m) {
    if (x.size() != m.dim) throw ClusterError("point dimension does not match model");
}

// One E-step: fills resp (N x K) and returns the total log-likelihood.
double expectation(const Matrix& points, const GmmModel& m, Matrix& resp) {
    std::vector<double> joint(m.k);
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        const auto x = points.row(i);
        for (std::size_t c = 0; c < m.k; ++c) joint[c] = component_log_joint(x, m, c);
        const double lse = log_sum_exp(joint);
        total += lse;
        for (std::size_t c = 0; c < m.k; ++c) resp(i, c) = std::exp(joint[c] - lse);
    }
    return total;
}

void maximization(const Matrix& points, const Matrix& resp, double floor, GmmModel& m) {
    const std::size_t n = points.rows;
    for (std::size_t c = 0; c < m.k; ++c) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += resp(i, c);
        m.weights[c] = nk / static_cast<double>(n);
        // An emptied component keeps its old location; with zero weight it
        // no longer affects the likelihood.
        if (nk <= 0.0) continue;
        for (std::size_t d = 0; d < m.dim; ++d) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += resp(i, c) * points(i, d);
            mean /= nk;
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double diff = points(i, d) - mean;
                var += resp(i, c) * diff * diff;
            }
            m.means(c, d) = mean;
            m.variances(c, d) = std::max(var / nk, floor);
        }
    }
    double total = 0.0;
    for (double w : m.weights) total += w;
    for (double& w : m.weights) w /= total;
}

// k-means++ seeding of the means; variances start at the global per-dimension
// variance and weights uniform.
GmmModel initial_model(const Matrix& points, std::size_t k, double floor, Rng& rng) {
    const std::size_t n = points.rows;
    GmmModel m;
    m.k = k;
    m.dim = points.cols;
    m.weights.assign(k, 1.0 / static_cast<double>(k));
    m.means = Matrix(k, m.dim);
    m.variances = Matrix(k, m.dim);

    std::vector<std::size_t> chosen;
    chosen.push_back(static_cast<std::size_t>(rng.below(n)));
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(points.row(i), points.row(chosen.back())));
            total += nearest[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= nearest[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(n));
        }
        chosen.push_back(pick);
    }
    for (std::size_t c = 0; c < k; ++c) {
        std::copy_n(points.row(chosen[c]).begin(), m.dim, m.means.row(c).begin());
    }

    for (std::size_t d = 0; d < m.dim; ++d) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += points(i, d);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (points(i, d) - mean) * (points(i, d) - mean);
        var = std::max(var / static_cast<double>(n), floor);
        for (std::size_t c = 0; c < k; ++c) m.variances(c, d) = var;
    }
    return m;
}

GmmModel fit_once(const Matrix& points, std::size_t k, const EmConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    GmmModel m = initial_model(points, k, cfg.variance_floor, rng);
    Matrix resp(points.rows, k);
    double ll = expectation(points, m, resp);
    m.ll_trace.push_back(ll);
    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        maximization(points, resp, cfg.variance_floor, m);
        const double next = expectation(points, m, resp);
        m.ll_trace.push_back(next);
        const double change = std::abs(next - ll) / std::max(1.0, std::abs(ll));
        ll = next;
        if (change < cfg.tol) break;
    }
    m.log_likelihood = ll;
    for (std::size_t c = 0; c < k && !m.degenerate; ++c) {
        double nk = 0.0;
        for (std::size_t i = 0; i < points.rows; ++i) nk += resp(i, c);
        m.degenerate = nk < kMinComponentMass;
    }
    return m;
}

}  // namespace

double gmm_log_density(std::span<const double> x, const GmmModel& model) {
    check_point(x, model);
    std::vector<double> joint(model.k);
    for (std::size_t c = 0; c < model.k; ++c) joint[c] = component_log_joint(x, model, c);
    return log_sum_exp(joint);
}

double gmm_density(std::span<const double> x, const GmmModel& model) {
    return std::exp(gmm_log_density(x, model));
}

std::vector<double> responsibilities(std::span<const double> x, const GmmModel& model) {
    check_point(x, model);
    std::vector<double> joint(model.k);
    for (std::size_t c = 0; c < model.k; ++c) joint[c] = component_log_joint(x, model, c);
    const double lse = log_sum_exp(joint);
    for (double& v : joint) v = std::exp(v - lse);
    return joint;
}

GmmModel em_fit(const Matrix& points, std::size_t k, const EmConfig& cfg) {
    cfg.validate();
    if (k == 0) throw ClusterError("K must be positive");
    if (points.cols == 0) throw ClusterError("points must have positive dimension");
    if (k > points.rows) {
        throw ClusterError("K = " + std::to_string(k) + " exceeds N = " + std::to_string(points.rows));
    }
    for (double x : points.data) {
        if (!std::isfinite(x)) throw ClusterError("points contain non-finite values");
    }
    GmmModel best;
    bool have_best = false;
    for (std::size_t r = 0; r < cfg.n_init; ++r) {
        GmmModel m = fit_once(points, k, cfg, mix_seed(cfg.seed, (k << 16) | r));
        const bool better = !have_best || (best.degenerate && !m.degenerate) ||
                            (best.degenerate == m.degenerate && m.log_likelihood > best.log_likelihood);
        if (better) {
            best = std::move(m);
            have_best = true;
        }
    }
    return best;
}

double bic(const GmmModel& model, std::size_t n) {
    return std::log(static_cast<double>(n)) * static_cast<double>(model.n_params()) -
           2.0 * model.log_likelihood;
}

GmmModel select_k(const Matrix& points, std::size_t k_min, std::size_t k_max, const EmConfig& cfg) {
    if (k_min < 1 || k_min > k_max || k_max > points.rows) {
        throw ClusterError("invalid K range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                           "] for N = " + std::to_string(points.rows));
    }
    std::vector<GmmModel> fits;
    bool any_healthy = false;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        fits.push_back(em_fit(points, k, cfg));
        any_healthy = any_healthy || !fits.back().degenerate;
    }
    std::size_t best = fits.size();
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (any_healthy && fits[i].degenerate) continue;
        const double score = bic(fits[i], points.rows);
        if (best == fits.size() || score < best_bic) {
            best_bic = score;
            best = i;
        }
    }
    return std::move(fits[best]);
}

std::vector<std::size_t> memberships_from(std::span<const double> resp, double threshold) {
    std::vector<std::size_t> out;
    const auto argmax = static_cast<std::size_t>(std::max_element(resp.begin(), resp.end()) - resp.begin());
    for (std::size_t c = 0; c < resp.size(); ++c) {
        if (c == argmax || resp[c] > threshold) out.push_back(c);
    }
    return out;
}

SoftAssignment soft_assign(const Matrix& points, const GmmModel& model, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ClusterError("threshold must lie in (0, 1)");
    SoftAssignment out;
    out.responsibilities = Matrix(points.rows, model.k);
    for (std::size_t i = 0; i < points.rows; ++i) {
        const auto r = responsibilities(points.row(i), model);
        std::copy(r.begin(), r.end(), out.responsibilities.row(i).begin());
        out.memberships.push_back(memberships_from(r, threshold));
    }
    return out;
}

}  // namespace groundwork
