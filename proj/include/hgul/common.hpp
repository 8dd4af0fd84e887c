#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgul {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Deterministic per-purpose RNG streams: the same (seed, tag) pair always
// yields the same stream, and distinct tags decorrelate streams sharing a seed.
inline std::mt19937_64 rng_stream(std::uint64_t seed, const std::string& tag) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t x) {
        h ^= x;
        h *= 1099511628211ull;
    };
    mix(seed);
    for (char c : tag) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return std::mt19937_64(h);
}

inline Mat random_uniform(int rows, int cols, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

inline Mat random_normal(int rows, int cols, double mean, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvariantError(msg);
}

}  // namespace hgul
