#pragma once

// Shared aliases, the error type, and deterministic random helpers.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cascadenet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

enum class ErrorCode {
    MalformedRecord,
    MissingSource,
    DanglingParent,
    CycleDetected,
    NonMonotoneChild,
    InsufficientNonOverlap,
    ConfigInvalid,
    IsolatedAnchor,
    NoNegativeCandidate,
    NonFiniteLoss,
    EmptyInput,
    VersionMismatch,
    CorruptCheckpoint,
    IoError,
    UsageError,
    ValidationError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::MissingSource: return "MissingSource";
        case ErrorCode::DanglingParent: return "DanglingParent";
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::NonMonotoneChild: return "NonMonotoneChild";
        case ErrorCode::InsufficientNonOverlap: return "InsufficientNonOverlap";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::IsolatedAnchor: return "IsolatedAnchor";
        case ErrorCode::NoNegativeCandidate: return "NoNegativeCandidate";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::UsageError: return "UsageError";
        case ErrorCode::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// mt19937_64 is fully specified by the standard, so its stream (and its
// textual state) is portable. Distributions below avoid the library
// distribution objects, whose outputs and cached state are implementation
// defined.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return static_cast<std::size_t>(x % n);
}

inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double exponential(Rng& rng, double rate) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    return -std::log(u) / rate;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent seed for a named sub-stream of a run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

template <class Container>
void shuffle_in_place(Container& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[uniform_index(rng, i)]);
    }
}

inline std::string rng_state(const Rng& rng) {
    std::ostringstream out;
    out << rng;
    return out.str();
}

inline void restore_rng(Rng& rng, const std::string& state) {
    std::istringstream in(state);
    in >> rng;
    if (!in) throw Error(ErrorCode::CorruptCheckpoint, "unreadable rng state");
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace cascadenet
