#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/rng.hpp"
#include "promptforge/vectors.hpp"

namespace promptforge {

struct ClusteringResult {
    int k = 0;
    std::vector<int> assignments;          // item index -> cluster index in [0, k)
    std::vector<EmbeddingVector> centroids;
    double silhouette = 0.0;               // 0 when k < 2 (not defined there)
    std::uint64_t seed = 0;
    int iterations_run = 0;
};

inline void to_json(nlohmann::json& j, const ClusteringResult& r) {
    j = nlohmann::json{{"k", r.k},
                       {"assignments", r.assignments},
                       {"centroids", r.centroids},
                       {"silhouette", r.silhouette},
                       {"seed", r.seed},
                       {"iterations_run", r.iterations_run}};
}

inline void from_json(const nlohmann::json& j, ClusteringResult& r) {
    j.at("k").get_to(r.k);
    j.at("assignments").get_to(r.assignments);
    j.at("centroids").get_to(r.centroids);
    j.at("silhouette").get_to(r.silhouette);
    j.at("seed").get_to(r.seed);
    j.at("iterations_run").get_to(r.iterations_run);
}

namespace detail {

inline void require_uniform_dim(const std::vector<EmbeddingVector>& points) {
    for (std::size_t i = 1; i < points.size(); ++i) require_same_dim(points[0], points[i]);
}

inline std::size_t count_distinct(const std::vector<EmbeddingVector>& points) {
    std::set<std::vector<double>> seen;
    for (const auto& p : points) seen.insert(p.values());
    return seen.size();
}

inline EmbeddingVector mean_of(const std::vector<EmbeddingVector>& points,
                               const std::vector<int>& assignments, int cluster) {
    std::vector<double> sum(points[0].dim(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (assignments[i] != cluster) continue;
        for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += points[i][d];
        ++count;
    }
    for (double& v : sum) v /= static_cast<double>(count);
    return EmbeddingVector(std::move(sum));
}

// Nearest centroid by squared Euclidean distance, ties to the lower index.
inline int nearest_centroid(const EmbeddingVector& point,
                            const std::vector<EmbeddingVector>& centroids) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(point, centroids[c]);
        if (d < best_dist) {
            best_dist = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

// k-means++ seeding: first centroid uniform, the rest proportional to the
// squared distance from the nearest chosen centroid. Points coincident with
// a chosen centroid carry zero weight and cannot be picked twice.
inline std::vector<EmbeddingVector> kmeanspp_init(const std::vector<EmbeddingVector>& points,
                                                  int k, SplitMix64& rng) {
    const std::size_t n = points.size();
    std::vector<EmbeddingVector> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    centroids.push_back(points[rng.next_below(n)]);

    std::vector<double> dist2(n);
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, squared_distance(points[i], c));
            dist2[i] = best;
            total += best;
        }
        std::size_t chosen = n;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (dist2[i] > 0.0 && acc >= r) {
                    chosen = i;
                    break;
                }
            }
            if (chosen == n) { // numeric edge: fall back to last positive-weight point
                for (std::size_t i = n; i-- > 0;) {
                    if (dist2[i] > 0.0) {
                        chosen = i;
                        break;
                    }
                }
            }
        } else {
            // All remaining points coincide with existing centroids; the
            // distinct-point precondition makes this unreachable, but keep a
            // deterministic fallback.
            chosen = 0;
        }
        centroids.push_back(points[chosen]);
    }
    return centroids;
}

// Moves the point farthest from its current centroid into each empty cluster,
// never emptying a donor cluster in the process.
inline void repair_empty_clusters(const std::vector<EmbeddingVector>& points,
                                  const std::vector<EmbeddingVector>& centroids,
                                  std::vector<int>& assignments, int k) {
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] > 0) continue;
        std::size_t farthest = points.size();
        double far_dist = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const int owner = assignments[i];
            if (sizes[static_cast<std::size_t>(owner)] <= 1) continue;
            const double d = squared_distance(points[i], centroids[static_cast<std::size_t>(owner)]);
            if (d > far_dist) {
                far_dist = d;
                farthest = i;
            }
        }
        if (farthest == points.size()) continue; // nothing movable
        --sizes[static_cast<std::size_t>(assignments[farthest])];
        assignments[farthest] = c;
        ++sizes[static_cast<std::size_t>(c)];
    }
}

} // namespace detail

inline double within_cluster_sse(const std::vector<EmbeddingVector>& points,
                                 const ClusteringResult& result) {
    double sse = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        sse += squared_distance(points[i], result.centroids[static_cast<std::size_t>(result.assignments[i])]);
    }
    return sse;
}

// Per-point silhouette values s(i) = (b - a) / max(a, b), with the Rousseeuw
// convention that members of singleton clusters score 0.
inline std::vector<double> silhouette_samples(const std::vector<EmbeddingVector>& points,
                                              const std::vector<int>& assignments) {
    const std::size_t n = points.size();
    if (assignments.size() != n) throw ValidationError("assignments must cover every point");
    detail::require_uniform_dim(points);

    int k = 0;
    for (int a : assignments) {
        if (a < 0) throw ValidationError("negative cluster index");
        k = std::max(k, a + 1);
    }
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    if (k < 2) throw ValidationError("silhouette requires at least 2 clusters");
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        if (sizes[c] == 0) throw ValidationError("empty cluster " + std::to_string(c));
    }

    std::vector<double> samples(n, 0.0);
    std::vector<double> sum_to_cluster(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        const int own = assignments[i];
        if (sizes[static_cast<std::size_t>(own)] == 1) {
            samples[i] = 0.0;
            continue;
        }
        std::fill(sum_to_cluster.begin(), sum_to_cluster.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum_to_cluster[static_cast<std::size_t>(assignments[j])] +=
                euclidean_distance(points[i], points[j]);
        }
        const double a = sum_to_cluster[static_cast<std::size_t>(own)] /
                         static_cast<double>(sizes[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own) continue;
            b = std::min(b, sum_to_cluster[static_cast<std::size_t>(c)] /
                                static_cast<double>(sizes[static_cast<std::size_t>(c)]));
        }
        const double denom = std::max(a, b);
        samples[i] = denom == 0.0 ? 0.0 : (b - a) / denom;
    }
    return samples;
}

inline double silhouette_score(const std::vector<EmbeddingVector>& points,
                               const std::vector<int>& assignments) {
    const std::vector<double> samples = silhouette_samples(points, assignments);
    double sum = 0.0;
    for (double s : samples) sum += s;
    return sum / static_cast<double>(samples.size());
}

// Lloyd's algorithm with k-means++ seeding. Deterministic for fixed
// (points, k, seed, max_iterations, restarts); convergence means an
// iteration that changes no assignment.
inline ClusteringResult kmeans(const std::vector<EmbeddingVector>& points, int k,
                               std::uint64_t seed, int max_iterations = 300, int restarts = 1) {
    const std::size_t n = points.size();
    if (n == 0) throw ValidationError("kmeans requires at least one point");
    detail::require_uniform_dim(points);
    if (k < 1 || static_cast<std::size_t>(k) > n) {
        throw ValidationError("k out of range: " + std::to_string(k) + " for " + std::to_string(n) +
                              " points");
    }
    if (max_iterations < 1) throw ValidationError("max_iterations must be positive");
    if (detail::count_distinct(points) < static_cast<std::size_t>(k)) {
        throw ValidationError("fewer distinct points than k");
    }

    ClusteringResult best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < std::max(1, restarts); ++attempt) {
        SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
        ClusteringResult result;
        result.k = k;
        result.seed = seed;
        result.centroids = detail::kmeanspp_init(points, k, rng);
        result.assignments.assign(n, -1);

        for (int iter = 0; iter < max_iterations; ++iter) {
            std::vector<int> next(n);
            for (std::size_t i = 0; i < n; ++i) next[i] = detail::nearest_centroid(points[i], result.centroids);
            detail::repair_empty_clusters(points, result.centroids, next, k);
            const bool changed = next != result.assignments;
            result.assignments = std::move(next);
            result.iterations_run = iter + 1;
            for (int c = 0; c < k; ++c) {
                result.centroids[static_cast<std::size_t>(c)] =
                    detail::mean_of(points, result.assignments, c);
            }
            if (!changed) break;
        }

        result.silhouette =
            (k >= 2) ? silhouette_score(points, result.assignments) : 0.0;
        const double sse = within_cluster_sse(points, result);
        if (sse < best_sse) {
            best_sse = sse;
            best = std::move(result);
        }
    }
    return best;
}

// Runs kmeans for every candidate K in [k_min, k_max] and keeps the result
// with the highest silhouette; ties go to the smaller K. The default
// candidate range elsewhere is 3..N-1; an explicit k_max may reach N.
inline ClusteringResult select_k(const std::vector<EmbeddingVector>& points, int k_min, int k_max,
                                 std::uint64_t seed, int max_iterations = 300, int restarts = 1) {
    const std::size_t n = points.size();
    if (k_min < 2) throw ValidationError("k_min must be at least 2");
    if (k_max < k_min) throw ValidationError("K range empty: k_max < k_min");
    if (static_cast<std::size_t>(k_max) > n) throw ValidationError("k_max must be <= point count");

    ClusteringResult best;
    bool have_best = false;
    for (int k = k_min; k <= k_max; ++k) {
        ClusteringResult candidate = kmeans(points, k, seed, max_iterations, restarts);
        if (!have_best || candidate.silhouette > best.silhouette) {
            best = std::move(candidate);
            have_best = true;
        }
    }
    return best;
}

} // namespace promptforge
