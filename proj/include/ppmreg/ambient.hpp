#pragma once

#include <cmath>
#include <vector>

#include "ppmreg/errors.hpp"
#include "ppmreg/fastmath.hpp"
#include "ppmreg/geometry.hpp"
#include "ppmreg/kernels.hpp"
#include "ppmreg/parallel.hpp"
#include "ppmreg/ppm.hpp"

namespace ppmreg {

namespace detail {

// sum_{i,j} ||a_i - b_j|| with optional row gradients
// rowgrad_i = sum_j (a_i - b_j)/||a_i - b_j|| (zero at coincident points).
inline double pair_distance_sum(const PointCloud& a, const PointCloud& b, int workers,
                                std::vector<double>* rowgrad) {
    const std::size_t na = a.size(), nb = b.size(), dim = a.dim();
    constexpr std::size_t kBlock = 64;
    const std::size_t nblocks = (na + kBlock - 1) / kBlock;
    std::vector<double> block_sums(nblocks, 0.0);
    const double* pa = a.flat().data();
    const double* pb = b.flat().data();

    parallel_blocks(na, kBlock, workers, [&](std::size_t blk, std::size_t lo, std::size_t hi) {
        double total = 0.0;
        std::vector<double> diff(dim);
        for (std::size_t i = lo; i < hi; ++i) {
            const double* ai = pa + i * dim;
            double* g = rowgrad ? rowgrad->data() + i * dim : nullptr;
            for (std::size_t j = 0; j < nb; ++j) {
                const double* bj = pb + j * dim;
                double s = 0.0;
                for (std::size_t d = 0; d < dim; ++d) {
                    diff[d] = ai[d] - bj[d];
                    s += diff[d] * diff[d];
                }
                const double r = std::sqrt(s);
                total += r;
                if (g && r > 0.0) {
                    const double inv = 1.0 / r;
                    for (std::size_t d = 0; d < dim; ++d) g[d] += diff[d] * inv;
                }
            }
        }
        block_sums[blk] = total;
    });

    double sum = 0.0;
    for (double v : block_sums) sum += v;
    return sum;
}

// sum_{i,j} exp(-||a_i - b_j||^2 / (2 sigma)) with optional row gradients
// rowgrad_i = sum_j d k / d a_i.
inline double rbf_sum(const PointCloud& a, const PointCloud& b, double sigma, int workers,
                      std::vector<double>* rowgrad) {
    const std::size_t na = a.size(), nb = b.size(), dim = a.dim();
    const double inv_2s = 1.0 / (2.0 * sigma);
    const double inv_s = 1.0 / sigma;
    constexpr std::size_t kBlock = 64;
    const std::size_t nblocks = (na + kBlock - 1) / kBlock;
    std::vector<double> block_sums(nblocks, 0.0);
    const double* pa = a.flat().data();
    const double* pb = b.flat().data();

    parallel_blocks(na, kBlock, workers, [&](std::size_t blk, std::size_t lo, std::size_t hi) {
        double total = 0.0;
        std::vector<double> diff(dim);
        for (std::size_t i = lo; i < hi; ++i) {
            const double* ai = pa + i * dim;
            double* g = rowgrad ? rowgrad->data() + i * dim : nullptr;
            for (std::size_t j = 0; j < nb; ++j) {
                const double* bj = pb + j * dim;
                double s = 0.0;
                for (std::size_t d = 0; d < dim; ++d) {
                    diff[d] = ai[d] - bj[d];
                    s += diff[d] * diff[d];
                }
                const double e = exp_neg(-s * inv_2s);
                total += e;
                if (g) {
                    const double f = -e * inv_s;
                    for (std::size_t d = 0; d < dim; ++d) g[d] += diff[d] * f;
                }
            }
        }
        block_sums[blk] = total;
    });

    double sum = 0.0;
    for (double v : block_sums) sum += v;
    return sum;
}

inline void check_pair(const PointCloud& a, const PointCloud& b, const char* who) {
    if (a.empty() || b.empty()) throw ContractViolation(std::string(who) + ": empty cloud");
    if (a.dim() != b.dim()) throw ContractViolation(std::string(who) + ": dimension mismatch");
}

} // namespace detail

// Fixed terms of the reference side, computed once per run. The reference
// cloud never moves, so its self sums are constants of the optimization.
struct AmbientSelfSums {
    double cramer_self = 0.0;  // sum ||b_i - b_j||
    double rbf_self = 0.0;     // sum k(b_i, b_j)
};

// Empirical energy (Cramer) distance between two clouds viewed as uniform
// measures: 2 E||X-Y|| - E||X-X'|| - E||Y-Y'||, self pairs included.
inline double cramer_distance(const PointCloud& a, const PointCloud& b, int workers = 1,
                              const double* cached_self_b = nullptr) {
    detail::check_pair(a, b, "cramer_distance");
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    const double sab = detail::pair_distance_sum(a, b, workers, nullptr);
    const double saa = detail::pair_distance_sum(a, a, workers, nullptr);
    const double sbb =
        cached_self_b ? *cached_self_b : detail::pair_distance_sum(b, b, workers, nullptr);
    double v = 2.0 * sab / (n * m) - saa / (n * n) - sbb / (m * m);
    if (v < 0.0 && v > -1e-12) v = 0.0;
    return v;
}

// Value plus scale * gradient with respect to the first cloud.
inline double cramer_grad(const PointCloud& a, const PointCloud& b, int workers,
                          GradAccumulator& grad, double scale,
                          const double* cached_self_b = nullptr) {
    detail::check_pair(a, b, "cramer_grad");
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    std::vector<double> rab(a.size() * a.dim(), 0.0);
    std::vector<double> raa(a.size() * a.dim(), 0.0);
    const double sab = detail::pair_distance_sum(a, b, workers, &rab);
    const double saa = detail::pair_distance_sum(a, a, workers, &raa);
    const double sbb =
        cached_self_b ? *cached_self_b : detail::pair_distance_sum(b, b, workers, nullptr);

    const double fab = scale * 2.0 / (n * m);
    const double faa = scale * 2.0 / (n * n);
    auto& g = grad.mutable_flat();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += fab * rab[k] - faa * raa[k];

    double v = 2.0 * sab / (n * m) - saa / (n * n) - sbb / (m * m);
    if (v < 0.0 && v > -1e-12) v = 0.0;
    return v;
}

// Plain-RBF empirical MMD (norm) between ambient clouds, biased V-statistic
// normalization. Same exponent convention as the Omega kernel.
inline double ambient_mmd(const PointCloud& a, const PointCloud& b, double sigma, int workers = 1,
                          const double* cached_self_b = nullptr) {
    detail::check_pair(a, b, "ambient_mmd");
    if (!(sigma > 0.0)) throw ConfigError("ambient mmd sigma must be positive");
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    const double saa = detail::rbf_sum(a, a, sigma, workers, nullptr);
    const double sab = detail::rbf_sum(a, b, sigma, workers, nullptr);
    const double sbb = cached_self_b ? *cached_self_b : detail::rbf_sum(b, b, sigma, workers, nullptr);
    const double m2 = saa / (n * n) - 2.0 * sab / (n * m) + sbb / (m * m);
    return std::sqrt(m2 < 0.0 ? 0.0 : m2);
}

inline double ambient_mmd_grad(const PointCloud& a, const PointCloud& b, double sigma, int workers,
                               GradAccumulator& grad, double scale,
                               const double* cached_self_b = nullptr) {
    detail::check_pair(a, b, "ambient_mmd_grad");
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    std::vector<double> raa(a.size() * a.dim(), 0.0);
    std::vector<double> rab(a.size() * a.dim(), 0.0);
    const double saa = detail::rbf_sum(a, a, sigma, workers, &raa);
    const double sab = detail::rbf_sum(a, b, sigma, workers, &rab);
    const double sbb = cached_self_b ? *cached_self_b : detail::rbf_sum(b, b, sigma, workers, nullptr);
    double m2 = saa / (n * n) - 2.0 * sab / (n * m) + sbb / (m * m);
    if (m2 < 0.0) m2 = 0.0;
    const double value = std::sqrt(m2);

    const double chain = m2 < kMmdSqrtGuard ? 0.0 : 0.5 / value;
    if (chain != 0.0) {
        const double faa = scale * chain * 2.0 / (n * n);
        const double fab = scale * chain * 2.0 / (n * m);
        auto& g = grad.mutable_flat();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += faa * raa[k] - fab * rab[k];
    }
    return value;
}

// Softplus barrier keeping the centroid gap from shrinking below c_delta:
// (lambda_p / beta) * ln(1 + exp(beta * (c_delta - ||c_a - c_b||))).
struct PenaltyParams {
    double lambda_p = 0.0;
    double beta = 80.0;
    double c_delta = 0.0;

    void validate() const {
        if (lambda_p < 0.0) throw ConfigError("penalty strength must be >= 0");
        if (!(beta > 0.0)) throw ConfigError("penalty beta must be positive");
        if (c_delta < 0.0) throw ConfigError("penalty c_delta must be >= 0");
    }
};

namespace detail {

inline double softplus(double t) {
    return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double centroid_gap(const PointCloud& a, const PointCloud& b, std::vector<double>& dir) {
    const auto ca = centroid(a);
    const auto cb = centroid(b);
    dir.resize(ca.size());
    double s = 0.0;
    for (std::size_t d = 0; d < ca.size(); ++d) {
        dir[d] = ca[d] - cb[d];
        s += dir[d] * dir[d];
    }
    return std::sqrt(s);
}

} // namespace detail

inline double centroid_penalty(const PointCloud& a, const PointCloud& b,
                               const PenaltyParams& params) {
    params.validate();
    detail::check_pair(a, b, "centroid_penalty");
    std::vector<double> dir;
    const double gap = detail::centroid_gap(a, b, dir);
    return params.lambda_p / params.beta * detail::softplus(params.beta * (params.c_delta - gap));
}

inline double centroid_penalty_grad(const PointCloud& a, const PointCloud& b,
                                    const PenaltyParams& params, GradAccumulator& grad,
                                    double scale) {
    params.validate();
    detail::check_pair(a, b, "centroid_penalty_grad");
    std::vector<double> dir;
    const double gap = detail::centroid_gap(a, b, dir);
    const double value =
        params.lambda_p / params.beta * detail::softplus(params.beta * (params.c_delta - gap));
    if (gap > 0.0 && params.lambda_p > 0.0) {
        // d value / d gap = -lambda_p * sigmoid(beta (c_delta - gap));
        // d gap / d a_i = (c_a - c_b)/gap * 1/n.
        const double dv =
            -params.lambda_p * detail::sigmoid(params.beta * (params.c_delta - gap));
        const double f = scale * dv / (gap * static_cast<double>(a.size()));
        auto& g = grad.mutable_flat();
        const std::size_t dim = a.dim();
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t d = 0; d < dim; ++d) g[i * dim + d] += f * dir[d];
    }
    return value;
}

} // namespace ppmreg
