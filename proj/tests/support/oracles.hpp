#pragma once

// Independent reference implementations used as oracles. These deliberately
// avoid the library's code paths: silhouette is the literal per-point
// formula, the k-means optimum comes from exhaustive partition enumeration,
// ANOVA recomputes the sums of squares through a different algebraic route,
// and the incomplete beta is evaluated by adaptive Simpson quadrature
// instead of a continued fraction.

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "promptforge/vectors.hpp"

namespace oracles {

inline double point_distance(const promptforge::EmbeddingVector& a,
                             const promptforge::EmbeddingVector& b) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.dim(); ++d) sum += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(sum);
}

// Rousseeuw's formula exactly as written: a(i) mean distance to own cluster,
// b(i) min over other clusters of mean distance, s(i) = (b-a)/max(a,b);
// singletons score 0.
inline double naive_silhouette(const std::vector<promptforge::EmbeddingVector>& points,
                               const std::vector<int>& assignments) {
    const std::size_t n = points.size();
    int k = 0;
    for (int a : assignments) k = std::max(k, a + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t own_count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && assignments[j] == assignments[i]) ++own_count;
        }
        if (own_count == 0) continue; // singleton contributes 0
        double a_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && assignments[j] == assignments[i]) a_sum += point_distance(points[i], points[j]);
        }
        const double a = a_sum / static_cast<double>(own_count);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == assignments[i]) continue;
            double c_sum = 0.0;
            std::size_t c_count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (assignments[j] == c) {
                    c_sum += point_distance(points[i], points[j]);
                    ++c_count;
                }
            }
            if (c_count > 0) b = std::min(b, c_sum / static_cast<double>(c_count));
        }
        const double denom = std::max(a, b);
        total += denom == 0.0 ? 0.0 : (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

inline double assignment_sse(const std::vector<promptforge::EmbeddingVector>& points,
                             const std::vector<int>& assignment, int k) {
    const std::size_t dim = points[0].dim();
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = static_cast<std::size_t>(assignment[i]);
        ++counts[c];
        for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = static_cast<std::size_t>(assignment[i]);
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = points[i][d] - sums[c][d] / counts[c];
            sse += diff * diff;
        }
    }
    return sse;
}

// Global optimum of the k-means objective by enumerating every k^n
// assignment with no empty cluster. Only feasible for tiny instances.
inline double brute_force_min_sse(const std::vector<promptforge::EmbeddingVector>& points, int k) {
    const std::size_t n = points.size();
    if (n > 12) throw std::invalid_argument("instance too large for brute force");
    std::vector<int> assignment(n, 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        std::vector<bool> present(static_cast<std::size_t>(k), false);
        for (int a : assignment) present[static_cast<std::size_t>(a)] = true;
        bool all_present = true;
        for (bool p : present) all_present = all_present && p;
        if (all_present) best = std::min(best, assignment_sse(points, assignment, k));

        std::size_t pos = 0;
        while (pos < n && assignment[pos] == k - 1) assignment[pos++] = 0;
        if (pos == n) break;
        ++assignment[pos];
    }
    return best;
}

// Adaptive Simpson quadrature of the normalized beta density. The density
// integrates to 1, so an absolute tolerance is meaningful; x > 0.5 is
// reflected onto the other tail to keep the domain away from the t = 1
// singularity when a shape parameter is below 1.
namespace detail {

inline double beta_density(double log_norm, double a, double b, double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return std::exp(log_norm + (a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t));
}

inline double simpson(double log_norm, double a, double b, double lo, double hi, double flo,
                      double fmid, double fhi, double whole, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double lmid = 0.5 * (lo + mid);
    const double rmid = 0.5 * (mid + hi);
    const double flmid = beta_density(log_norm, a, b, lmid);
    const double frmid = beta_density(log_norm, a, b, rmid);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flmid + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frmid + fhi);
    if (depth <= 0 || std::abs(left + right - whole) < 1e-13) {
        return left + right;
    }
    return simpson(log_norm, a, b, lo, mid, flo, flmid, fmid, left, depth - 1) +
           simpson(log_norm, a, b, mid, hi, fmid, frmid, fhi, right, depth - 1);
}

} // namespace detail

inline double quadrature_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x > 0.5) return 1.0 - quadrature_incomplete_beta(b, a, 1.0 - x);
    const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    const double lo = 0.0;
    const double hi = x;
    const double mid = 0.5 * (lo + hi);
    const double flo = detail::beta_density(log_norm, a, b, lo);
    const double fmid = detail::beta_density(log_norm, a, b, mid);
    const double fhi = detail::beta_density(log_norm, a, b, hi);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    return detail::simpson(log_norm, a, b, lo, hi, flo, fmid, fhi, whole, 60);
}

struct AnovaOracle {
    double f = 0.0;
    double p = 1.0;
    int df_between = 0;
    int df_within = 0;
};

// Textbook route via raw sums: SS_total = sum(x^2) - N*mean^2,
// SS_between = sum(n_i * mean_i^2) - N * mean^2, SS_within by subtraction.
inline AnovaOracle anova_reference(const std::vector<std::vector<double>>& groups) {
    double sum = 0.0, sum_sq = 0.0;
    int total = 0;
    for (const auto& group : groups) {
        for (double v : group) {
            sum += v;
            sum_sq += v * v;
            ++total;
        }
    }
    const double grand_mean = sum / total;
    double between = -static_cast<double>(total) * grand_mean * grand_mean;
    for (const auto& group : groups) {
        double group_sum = 0.0;
        for (double v : group) group_sum += v;
        const double mean = group_sum / static_cast<double>(group.size());
        between += static_cast<double>(group.size()) * mean * mean;
    }
    const double ss_total = sum_sq - static_cast<double>(total) * grand_mean * grand_mean;
    const double within = ss_total - between;

    AnovaOracle result;
    result.df_between = static_cast<int>(groups.size()) - 1;
    result.df_within = total - static_cast<int>(groups.size());
    const double ms_between = between / result.df_between;
    const double ms_within = within / result.df_within;
    if (ms_within <= 0.0) {
        result.f = ms_between <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        result.p = ms_between <= 0.0 ? 1.0 : 0.0;
        return result;
    }
    result.f = ms_between / ms_within;
    const double x = result.df_within / (result.df_within + result.df_between * result.f);
    result.p = quadrature_incomplete_beta(result.df_within / 2.0, result.df_between / 2.0, x);
    return result;
}

} // namespace oracles
