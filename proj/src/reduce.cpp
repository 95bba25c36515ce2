#include "groundwork/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "groundwork/hashing.hpp"

namespace groundwork {

Matrix stack_rows(std::span<const Vector> points) {
    if (points.empty()) return {};
    Matrix m(points.size(), points.front().dim());
    for (std::size_t r = 0; r < points.size(); ++r) {
        if (points[r].dim() != m.cols) throw Error("points have mixed dimensions");
        std::copy(points[r].values.begin(), points[r].values.end(), m.row(r).begin());
    }
    return m;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

void ReduceConfig::validate() const {
    if (n_neighbors < 2) throw ReduceError("n_neighbors must be >= 2");
    if (target_dim < 1) throw ReduceError("target_dim must be >= 1");
    if (epochs < 1) throw ReduceError("epochs must be >= 1");
    if (!(a > 0.0) || !(b > 0.0)) throw ReduceError("kernel parameters a and b must be positive");
    if (!(learning_rate > 0.0)) throw ReduceError("learning_rate must be positive");
    if (sigma_target && !(*sigma_target > 0.0)) throw ReduceError("sigma_target must be positive");
}

double conditional_affinity(double dist_sq, double sigma) { return std::exp(-dist_sq / sigma); }

namespace {

constexpr double kSigmaTolerance = 1e-4;
constexpr int kSigmaIterations = 64;

double neighbourhood_mass(std::span<const double> dists, double sigma) {
    double sum = 0.0;
    for (double d : dists) sum += conditional_affinity(d, sigma);
    return sum;
}

// Bisection on sigma; the mass is increasing in sigma. The upper bracket is
// found by doubling from the mean neighbour distance.
double calibrate_sigma(std::span<const double> dists, double target) {
    double positive_sum = 0.0;
    std::size_t positive = 0;
    for (double d : dists) {
        if (d > 0.0) {
            positive_sum += d;
            ++positive;
        }
    }
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double sigma = positive > 0 ? positive_sum / static_cast<double>(positive) : 1.0;
    for (int iter = 0; iter < kSigmaIterations; ++iter) {
        const double mass = neighbourhood_mass(dists, sigma);
        if (std::abs(mass - target) < kSigmaTolerance) break;
        if (mass > target) {
            hi = sigma;
            sigma = 0.5 * (lo + hi);
        } else {
            lo = sigma;
            sigma = std::isinf(hi) ? sigma * 2.0 : 0.5 * (lo + hi);
        }
    }
    return sigma;
}

void check_finite(const Matrix& m) {
    for (double x : m.data) {
        if (!std::isfinite(x)) throw ReduceError("input contains non-finite values");
    }
}

}  // namespace

AffinityMatrix high_dim_affinities(const Matrix& points, const ReduceConfig& cfg) {
    cfg.validate();
    const std::size_t n = points.rows;
    if (n < 3) throw ReduceError("affinities need at least 3 points, got " + std::to_string(n));
    check_finite(points);
    const std::size_t k = std::min(cfg.n_neighbors, n - 1);
    const double target = cfg.sigma_target.value_or(std::log2(static_cast<double>(k)));

    AffinityMatrix out;
    out.n = n;
    out.directed.assign(n * n, 0.0);
    out.sigmas.assign(n, 1.0);
    out.neighbor_lists.resize(n);

    std::vector<std::pair<double, std::size_t>> candidates;
    std::vector<double> dists(k);
    for (std::size_t i = 0; i < n; ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) candidates.emplace_back(squared_distance(points.row(i), points.row(j)), j);
        }
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                          candidates.end());
        auto& neighbours = out.neighbor_lists[i];
        neighbours.resize(k);
        std::size_t duplicates = 0;
        for (std::size_t t = 0; t < k; ++t) {
            dists[t] = candidates[t].first;
            neighbours[t] = candidates[t].second;
            if (dists[t] == 0.0) ++duplicates;
        }

        // Exact duplicates contribute 1 whatever sigma is; if they alone
        // reach the target the calibration has no solution.
        if (static_cast<double>(duplicates) >= target - kSigmaTolerance) {
            out.degenerate_points.push_back(i);
            double smallest = std::numeric_limits<double>::infinity();
            for (double d : dists) {
                if (d > 0.0) smallest = std::min(smallest, d);
            }
            out.sigmas[i] = std::isinf(smallest) ? 1e-12 : smallest * 1e-3;
            for (std::size_t t = 0; t < k; ++t) {
                out.directed[i * n + neighbours[t]] = dists[t] == 0.0 ? 1.0 : 0.0;
            }
            continue;
        }

        const double sigma = calibrate_sigma(dists, target);
        out.sigmas[i] = sigma;
        for (std::size_t t = 0; t < k; ++t) {
            out.directed[i * n + neighbours[t]] = conditional_affinity(dists[t], sigma);
        }
    }

    out.p.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double a = out.directed[i * n + j];
            const double b = out.directed[j * n + i];
            out.p[i * n + j] = a + b - a * b;
        }
    }
    return out;
}

AffinityMatrix high_dim_affinities(std::span<const Vector> points, const ReduceConfig& cfg) {
    return high_dim_affinities(stack_rows(points), cfg);
}

namespace {

inline double kernel_from_sq(double dist_sq, double a, double b) {
    return 1.0 / (1.0 + a * std::pow(dist_sq, b));
}

inline double clip(double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); }

// d/dq of cross_entropy_term, zero where the clip is active.
inline double term_slope(double p, double q) {
    if (q < kProbabilityClip || q > 1.0 - kProbabilityClip) return 0.0;
    const double pc = clip(p);
    return -pc / q + (1.0 - pc) / (1.0 - q);
}

}  // namespace

double low_dim_kernel(std::span<const double> yi, std::span<const double> yj, double a, double b) {
    return kernel_from_sq(squared_distance(yi, yj), a, b);
}

double cross_entropy_term(double p, double q) {
    const double pc = clip(p);
    const double qc = clip(q);
    return pc * std::log(pc / qc) + (1.0 - pc) * std::log((1.0 - pc) / (1.0 - qc));
}

double umap_loss(const AffinityMatrix& affinities, const Matrix& y, double a, double b) {
    const std::size_t n = affinities.n;
    if (y.rows != n) throw ReduceError("embedding rows do not match affinity size");
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double q = kernel_from_sq(squared_distance(y.row(i), y.row(j)), a, b);
            loss += cross_entropy_term(affinities.p[i * n + j], q);
            loss += cross_entropy_term(affinities.p[j * n + i], q);
        }
    }
    return loss;
}

Matrix umap_gradient(const AffinityMatrix& affinities, const Matrix& y, double a, double b) {
    const std::size_t n = affinities.n;
    if (y.rows != n) throw ReduceError("embedding rows do not match affinity size");
    Matrix grad(n, y.cols);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = squared_distance(y.row(i), y.row(j));
            if (s == 0.0 && b < 1.0) continue;
            const double q = kernel_from_sq(s, a, b);
            const double slope = term_slope(affinities.p[i * n + j], q) + term_slope(affinities.p[j * n + i], q);
            if (slope == 0.0) continue;
            const double s_pow = b == 1.0 ? 1.0 : std::pow(s, b - 1.0);
            const double dq_ds = -a * b * s_pow * q * q;
            const double coef = 2.0 * slope * dq_ds;
            for (std::size_t c = 0; c < y.cols; ++c) {
                const double diff = coef * (y(i, c) - y(j, c));
                grad(i, c) += diff;
                grad(j, c) -= diff;
            }
        }
    }
    return grad;
}

Matrix initial_layout(const Matrix& points, std::size_t target_dim, std::uint64_t seed) {
    Matrix y(points.rows, target_dim);
    for (std::size_t r = 0; r < points.rows; ++r) {
        const auto row = points.row(r);
        std::string_view bytes(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(double));
        Rng rng(mix_seed(seed, fnv1a64(bytes)));
        for (std::size_t c = 0; c < target_dim; ++c) y(r, c) = rng.uniform(-1.0, 1.0);
    }
    return y;
}

LowDimEmbedding umap_fit(const Matrix& points, const ReduceConfig& cfg) {
    cfg.validate();
    const std::size_t n = points.rows;
    if (n < 4) throw ReduceError("reduction needs at least 4 points, got " + std::to_string(n));
    if (cfg.target_dim >= points.cols) {
        throw ReduceError("target_dim must be smaller than the input dimension");
    }
    const AffinityMatrix affinities = high_dim_affinities(points, cfg);

    LowDimEmbedding out;
    out.a = cfg.a;
    out.b = cfg.b;
    out.y = initial_layout(points, cfg.target_dim, cfg.seed);
    double loss = umap_loss(affinities, out.y, cfg.a, cfg.b);
    out.loss_trace.push_back(loss);

    Matrix candidate(out.y.rows, out.y.cols);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double decay = 1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
        double step = cfg.learning_rate * decay;
        const Matrix grad = umap_gradient(affinities, out.y, cfg.a, cfg.b);
        for (std::size_t attempt = 0; attempt <= cfg.max_halvings; ++attempt, step *= 0.5) {
            for (std::size_t t = 0; t < candidate.data.size(); ++t) {
                candidate.data[t] = out.y.data[t] - step * grad.data[t];
            }
            const double next = umap_loss(affinities, candidate, cfg.a, cfg.b);
            if (std::isfinite(next) && next <= loss) {
                std::swap(out.y, candidate);
                loss = next;
                break;
            }
        }
        out.loss_trace.push_back(loss);
    }
    return out;
}

LowDimEmbedding umap_fit(std::span<const Vector> points, const ReduceConfig& cfg) {
    return umap_fit(stack_rows(points), cfg);
}

}  // namespace groundwork
