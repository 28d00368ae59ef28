#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "promptforge/vectors.hpp"

using namespace promptforge;

namespace {

EmbeddingVector vec(std::initializer_list<double> values) {
    return EmbeddingVector(std::vector<double>(values));
}

EmbeddingVector random_vector(std::mt19937& rng, std::size_t dim) {
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    std::vector<double> values(dim);
    bool nonzero = false;
    for (auto& v : values) {
        v = dist(rng);
        nonzero = nonzero || v != 0.0;
    }
    if (!nonzero) values[0] = 1.0;
    return EmbeddingVector(values);
}

} // namespace

TEST_CASE("embedding vector construction enforces invariants") {
    CHECK_THROWS_AS(EmbeddingVector(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(vec({1.0, std::numeric_limits<double>::quiet_NaN()}), ValidationError);
    CHECK_THROWS_AS(vec({std::numeric_limits<double>::infinity()}), ValidationError);
    CHECK(vec({1.0, 2.0}).dim() == 2);
}

TEST_CASE("cosine similarity on known inputs") {
    CHECK(cosine_similarity(vec({3, 4}), vec({3, 4})) == Catch::Approx(1.0).margin(1e-9));
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == Catch::Approx(0.0).margin(1e-9));

    // scalar oracle: dot = 4+10+18 = 32, norms sqrt(14), sqrt(77)
    const double expected = 32.0 / (std::sqrt(14.0) * std::sqrt(77.0));
    CHECK(expected == Catch::Approx(0.9746318461970762).margin(1e-12));
    CHECK(cosine_similarity(vec({1, 2, 3}), vec({4, 5, 6})) ==
          Catch::Approx(expected).margin(1e-9));
}

TEST_CASE("cosine similarity reports errors distinctly") {
    CHECK_THROWS_AS(cosine_similarity(vec({1, 2}), vec({1, 2, 3})), DimensionMismatchError);
    CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 2})), ZeroNormError);
}

TEST_CASE("l2_normalize known values") {
    const EmbeddingVector unit = l2_normalize(vec({0, 5}));
    CHECK(unit[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(unit[1] == Catch::Approx(1.0).margin(1e-12));

    // Pythagorean oracle: norm of (3,4) is 5
    const EmbeddingVector scaled = l2_normalize(vec({3, 4}));
    CHECK(scaled[0] == Catch::Approx(0.6).margin(1e-12));
    CHECK(scaled[1] == Catch::Approx(0.8).margin(1e-12));

    CHECK_THROWS_AS(l2_normalize(vec({0, 0})), ZeroNormError);
}

TEST_CASE("cosine and normalization properties on random vectors") {
    std::mt19937 rng(20240801);
    std::uniform_real_distribution<double> scale_dist(0.1, 10.0);
    for (int i = 0; i < 200; ++i) {
        const std::size_t dim = 1 + (rng() % 8);
        const EmbeddingVector a = random_vector(rng, dim);
        const EmbeddingVector b = random_vector(rng, dim);

        CHECK(cosine_similarity(a, a) == Catch::Approx(1.0).margin(1e-9));
        CHECK(cosine_similarity(a, b) == Catch::Approx(cosine_similarity(b, a)).margin(1e-12));

        const double c = scale_dist(rng);
        std::vector<double> scaled = b.values();
        for (auto& v : scaled) v *= c;
        CHECK(cosine_similarity(a, EmbeddingVector(scaled)) ==
              Catch::Approx(cosine_similarity(a, b)).margin(1e-9));

        CHECK(l2_norm(l2_normalize(a)) == Catch::Approx(1.0).margin(1e-9));

        // normalization preserves direction
        CHECK(cosine_similarity(a, l2_normalize(a)) == Catch::Approx(1.0).margin(1e-9));

        const double s = cosine_similarity(a, b);
        CHECK(s >= -1.0 - 1e-12);
        CHECK(s <= 1.0 + 1e-12);
    }
}

TEST_CASE("embedding vectors serialize as JSON arrays") {
    const EmbeddingVector v = vec({0.5, -1.25, 3.0});
    const nlohmann::json j = v;
    CHECK(j.is_array());
    CHECK(j.dump() == "[0.5,-1.25,3.0]");
    CHECK(j.get<EmbeddingVector>() == v);
}

TEST_CASE("idempotent normalization of a unit vector") {
    const EmbeddingVector u = l2_normalize(vec({1, 1, 1}));
    const EmbeddingVector again = l2_normalize(u);
    for (std::size_t i = 0; i < u.dim(); ++i) {
        CHECK(again[i] == Catch::Approx(u[i]).margin(1e-12));
    }
}
