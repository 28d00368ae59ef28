#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"

namespace promptforge {

// Dense embedding vector. Immutable after construction; construction rejects
// empty vectors and non-finite components.
class EmbeddingVector {
public:
    EmbeddingVector() = default; // unset placeholder, dim() == 0

    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw ValidationError("embedding vector must have dim >= 1");
        for (double v : values_) {
            if (!std::isfinite(v)) throw ValidationError("embedding vector has non-finite component");
        }
    }

    std::size_t dim() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool operator==(const EmbeddingVector& other) const { return values_ == other.values_; }

private:
    std::vector<double> values_;
};

inline void require_same_dim(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatchError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                                     std::to_string(b.dim()));
    }
}

// Plain sequential accumulation; fine at embedding-scale dimensions.
inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    require_same_dim(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) sum += a[i] * b[i];
    return sum;
}

inline double l2_norm(const EmbeddingVector& v) {
    double sum = 0.0;
    for (std::size_t i = 0; i < v.dim(); ++i) sum += v[i] * v[i];
    return std::sqrt(sum);
}

inline double squared_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    require_same_dim(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

inline double euclidean_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    return std::sqrt(squared_distance(a, b));
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    require_same_dim(a, b);
    const double norm_a = l2_norm(a);
    const double norm_b = l2_norm(b);
    if (norm_a == 0.0 || norm_b == 0.0) throw ZeroNormError("cosine similarity of zero-norm vector");
    return dot(a, b) / (norm_a * norm_b);
}

inline EmbeddingVector l2_normalize(const EmbeddingVector& v) {
    const double norm = l2_norm(v);
    if (norm == 0.0) throw ZeroNormError("cannot normalize zero-norm vector");
    std::vector<double> scaled(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) scaled[i] = v[i] / norm;
    return EmbeddingVector(std::move(scaled));
}

// Serialized as a bare JSON array of numbers.
inline void to_json(nlohmann::json& j, const EmbeddingVector& v) {
    j = v.values();
}

inline void from_json(const nlohmann::json& j, EmbeddingVector& v) {
    v = EmbeddingVector(j.get<std::vector<double>>());
}

} // namespace promptforge
