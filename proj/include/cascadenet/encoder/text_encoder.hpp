#pragma once

// Frozen post-content encoders.

#include "cascadenet/core/common.hpp"

#include <cctype>
#include <concepts>
#include <memory>
#include <optional>

namespace cascadenet {

/// encode(string) -> d-vector; deterministic and stateless.
template <class E>
concept TextEncoder = requires(const E& e, std::string_view text) {
    { e.encode(text) } -> std::convertible_to<RowVector>;
    { e.dim() } -> std::convertible_to<int>;
};

/// Lower-cased alphanumeric runs (bytes >= 0x80 count as word characters so
/// UTF-8 text stays intact), truncated to `max_tokens`.
inline std::vector<std::string> tokenize(std::string_view text, std::size_t max_tokens) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && tokens.size() < max_tokens) tokens.push_back(current);
        current.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) current += static_cast<char>(std::tolower(c));
        else flush();
        if (tokens.size() >= max_tokens) return tokens;
    }
    flush();
    return tokens;
}

/// Hashed bag-of-tokens: each token's FNV-1a hash selects one of `buckets`
/// rows of a fixed Gaussian projection; the post vector is the mean of the
/// selected rows (zero for empty text).
class HashTextEncoder {
public:
    static constexpr std::size_t kDefaultBuckets = std::size_t{1} << 14;

    HashTextEncoder(int dim, std::uint64_t seed, std::size_t max_tokens = 50, std::size_t buckets = kDefaultBuckets)
        : dim_(dim), max_tokens_(max_tokens), buckets_(buckets), seed_(seed) {}

    int dim() const { return dim_; }
    std::size_t buckets() const { return buckets_; }
    std::size_t max_tokens() const { return max_tokens_; }

    static std::size_t bucket_of(std::string_view token, std::size_t buckets) {
        return static_cast<std::size_t>(fnv1a64(token) % buckets);
    }

    /// Projection row for a bucket, generated from (seed, bucket) on demand.
    RowVector projection_row(std::size_t bucket) const {
        Rng rng(derive_seed(seed_, bucket));
        RowVector row(dim_);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
        for (int j = 0; j < dim_; ++j) row(j) = standard_normal(rng) * scale;
        return row;
    }

    RowVector encode(std::string_view text) const {
        RowVector out = RowVector::Zero(dim_);
        const auto tokens = tokenize(text, max_tokens_);
        if (tokens.empty()) return out;
        for (const auto& t : tokens) out += row_cached(bucket_of(t, buckets_));
        return out / static_cast<double>(tokens.size());
    }

private:
    const RowVector& row_cached(std::size_t bucket) const {
        if (!cache_) cache_ = std::make_shared<std::vector<std::optional<RowVector>>>(buckets_);
        auto& slot = (*cache_)[bucket];
        if (!slot) slot = projection_row(bucket);
        return *slot;
    }

    int dim_;
    std::size_t max_tokens_;
    std::size_t buckets_;
    std::uint64_t seed_;
    // Lazily filled; the values are a pure function of (seed, bucket). Not
    // safe for concurrent encode() calls on one instance.
    mutable std::shared_ptr<std::vector<std::optional<RowVector>>> cache_;
};

}  // namespace cascadenet
