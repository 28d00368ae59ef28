#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "promptforge/clustering.hpp"
#include "support/oracles.hpp"

using namespace promptforge;

namespace {

EmbeddingVector vec(std::initializer_list<double> values) {
    return EmbeddingVector(std::vector<double>(values));
}

std::vector<EmbeddingVector> random_points(std::mt19937& rng, std::size_t n, std::size_t dim,
                                           double span = 10.0) {
    std::uniform_real_distribution<double> dist(-span, span);
    std::vector<EmbeddingVector> points;
    points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> values(dim);
        for (auto& v : values) v = dist(rng);
        points.push_back(EmbeddingVector(values));
    }
    return points;
}

// Gaussian blobs with far-separated centers.
std::vector<EmbeddingVector> blob_points(std::mt19937& rng, int blobs, int per_blob,
                                         std::size_t dim, double center_span,
                                         double spread) {
    std::normal_distribution<double> noise(0.0, spread);
    std::uniform_real_distribution<double> center_dist(-center_span, center_span);
    std::vector<EmbeddingVector> points;
    for (int b = 0; b < blobs; ++b) {
        std::vector<double> center(dim);
        for (auto& c : center) c = center_dist(rng);
        for (int p = 0; p < per_blob; ++p) {
            std::vector<double> values(dim);
            for (std::size_t d = 0; d < dim; ++d) values[d] = center[d] + noise(rng);
            points.push_back(EmbeddingVector(values));
        }
    }
    return points;
}

} // namespace

TEST_CASE("kmeans separates two obvious pairs") {
    const std::vector<EmbeddingVector> points = {vec({0, 0}), vec({0, 1}), vec({10, 10}),
                                                 vec({10, 11})};
    const ClusteringResult result = kmeans(points, 2, 7);

    CHECK(result.assignments[0] == result.assignments[1]);
    CHECK(result.assignments[2] == result.assignments[3]);
    CHECK(result.assignments[0] != result.assignments[2]);

    // brute-force partition oracle
    const double optimal = oracles::brute_force_min_sse(points, 2);
    CHECK(within_cluster_sse(points, result) == Catch::Approx(optimal).margin(1e-9));

    const auto& first_centroid = result.centroids[static_cast<std::size_t>(result.assignments[0])];
    CHECK(first_centroid[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(first_centroid[1] == Catch::Approx(0.5).margin(1e-12));
    const auto& second_centroid = result.centroids[static_cast<std::size_t>(result.assignments[2])];
    CHECK(second_centroid[0] == Catch::Approx(10.0).margin(1e-12));
    CHECK(second_centroid[1] == Catch::Approx(10.5).margin(1e-12));
}

TEST_CASE("kmeans with k equal to point count gives singleton clusters") {
    std::mt19937 rng(11);
    const auto points = random_points(rng, 6, 3);
    const ClusteringResult result = kmeans(points, 6, 1);
    CHECK(within_cluster_sse(points, result) == Catch::Approx(0.0).margin(1e-12));
    std::set<int> used(result.assignments.begin(), result.assignments.end());
    CHECK(used.size() == 6);
}

TEST_CASE("kmeans on identical points with k=1") {
    const std::vector<EmbeddingVector> points(4, vec({2.5, -1.0}));
    const ClusteringResult result = kmeans(points, 1, 99);
    CHECK(result.centroids[0][0] == Catch::Approx(2.5).margin(1e-12));
    CHECK(result.centroids[0][1] == Catch::Approx(-1.0).margin(1e-12));
    CHECK(within_cluster_sse(points, result) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("kmeans validates its inputs") {
    std::mt19937 rng(5);
    const auto points = random_points(rng, 4, 2);
    CHECK_THROWS_AS(kmeans(points, 0, 1), ValidationError);
    CHECK_THROWS_AS(kmeans(points, 5, 1), ValidationError);
    CHECK_THROWS_AS(kmeans({vec({1, 2}), vec({1, 2, 3})}, 1, 1), DimensionMismatchError);

    // fewer distinct points than k
    const std::vector<EmbeddingVector> dupes = {vec({1, 1}), vec({1, 1}), vec({2, 2})};
    CHECK_THROWS_AS(kmeans(dupes, 3, 1), ValidationError);
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
    std::mt19937 rng(21);
    const auto points = random_points(rng, 20, 4);
    const ClusteringResult a = kmeans(points, 4, 1234);
    const ClusteringResult b = kmeans(points, 4, 1234);
    CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());
}

TEST_CASE("within-cluster SSE is non-increasing across iterations") {
    std::mt19937 rng(31);
    for (int instance = 0; instance < 10; ++instance) {
        const auto points = random_points(rng, 25, 3);
        double previous = std::numeric_limits<double>::infinity();
        // same seed and increasing caps replay the same iteration prefix
        for (int cap = 1; cap <= 12; ++cap) {
            const ClusteringResult result = kmeans(points, 3, 77, cap);
            const double sse = within_cluster_sse(points, result);
            CHECK(sse <= previous + 1e-9);
            previous = sse;
        }
    }
}

TEST_CASE("empty cluster repair moves the farthest point") {
    const std::vector<EmbeddingVector> points = {vec({0, 0}), vec({0, 1}), vec({5, 5})};
    const std::vector<EmbeddingVector> centroids = {vec({0, 0.5}), vec({9, 9})};
    std::vector<int> assignments = {0, 0, 0}; // cluster 1 empty
    detail::repair_empty_clusters(points, centroids, assignments, 2);
    CHECK(assignments == std::vector<int>{0, 0, 1});
}

TEST_CASE("silhouette matches the formula oracle on a tight two-pair fixture") {
    const std::vector<EmbeddingVector> points = {vec({0, 0}), vec({0, 0.1}), vec({10, 10}),
                                                 vec({10, 10.1})};
    const std::vector<int> assignments = {0, 0, 1, 1};
    const double score = silhouette_score(points, assignments);
    CHECK(score == Catch::Approx(oracles::naive_silhouette(points, assignments)).margin(1e-12));
    CHECK(score > 0.98);
}

TEST_CASE("per-point silhouette is zero when a(i) equals b(i)") {
    // point 0 sits at distance 2 from both its partner and the other cluster
    const std::vector<EmbeddingVector> points = {vec({0, 0}), vec({0, 2}), vec({2, 0})};
    const std::vector<int> assignments = {0, 0, 1};
    const std::vector<double> samples = silhouette_samples(points, assignments);
    CHECK(samples[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(samples[2] == 0.0); // singleton convention
}

TEST_CASE("silhouette validates cluster structure") {
    const std::vector<EmbeddingVector> points = {vec({0, 0}), vec({1, 1})};
    CHECK_THROWS_AS(silhouette_score(points, {0, 0}), ValidationError);          // one cluster
    CHECK_THROWS_AS(silhouette_score(points, {0, 2}), ValidationError);          // empty cluster 1
    CHECK_THROWS_AS(silhouette_score(points, {0}), ValidationError);             // bad coverage
}

TEST_CASE("silhouette equals the naive reference on random instances") {
    std::mt19937 rng(47);
    for (int instance = 0; instance < 60; ++instance) {
        const std::size_t n = 5 + rng() % 46; // up to 50
        const std::size_t dim = 1 + rng() % 6;
        const auto points = random_points(rng, n, dim);
        const int k = 2 + static_cast<int>(rng() % 4);
        std::vector<int> assignments(n);
        for (std::size_t i = 0; i < n; ++i) assignments[i] = static_cast<int>(i % k);
        const double mine = silhouette_score(points, assignments);
        const double reference = oracles::naive_silhouette(points, assignments);
        CHECK(mine == Catch::Approx(reference).margin(1e-9));
        CHECK(mine >= -1.0 - 1e-12);
        CHECK(mine <= 1.0 + 1e-12);
    }
}

TEST_CASE("select_k recovers the blob count") {
    std::mt19937 rng(53);
    const auto points = blob_points(rng, 3, 3, 4, 50.0, 0.5);
    const ClusteringResult result = select_k(points, 2, static_cast<int>(points.size()) - 1, 7);
    CHECK(result.k == 3);

    // the returned silhouette dominates every candidate K
    for (int k = 2; k <= static_cast<int>(points.size()) - 1; ++k) {
        const ClusteringResult candidate = kmeans(points, k, 7);
        CHECK(result.silhouette >= candidate.silhouette - 1e-12);
    }
}

TEST_CASE("select_k on two points returns singletons with silhouette zero") {
    const std::vector<EmbeddingVector> points = {vec({0, 0}), vec({3, 3})};
    const ClusteringResult result = select_k(points, 2, 2, 1);
    CHECK(result.k == 2);
    CHECK(result.silhouette == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("select_k breaks silhouette ties toward smaller K") {
    // regular tetrahedron: all pairwise distances equal, every candidate
    // partition scores silhouette 0
    const std::vector<EmbeddingVector> points = {
        vec({1, 1, 1}), vec({1, -1, -1}), vec({-1, 1, -1}), vec({-1, -1, 1})};
    const ClusteringResult result = select_k(points, 2, 3, 5);
    CHECK(result.silhouette == Catch::Approx(0.0).margin(1e-12));
    CHECK(result.k == 2);
}

TEST_CASE("select_k validates the candidate range") {
    std::mt19937 rng(3);
    const auto points = random_points(rng, 3, 2);
    CHECK_THROWS_AS(select_k(points, 3, 2, 1), ValidationError);  // empty K range
    CHECK_THROWS_AS(select_k(points, 1, 2, 1), ValidationError);  // k_min >= 2
    CHECK_THROWS_AS(select_k(points, 2, 4, 1), ValidationError);  // k_max <= n
}
