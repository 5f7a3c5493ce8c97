#ifndef DTPM_TYPES_HPP
#define DTPM_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace dtpm {

// Batches are stored one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

/// Derives an independent generator for a given purpose from a run seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

}  // namespace dtpm

#endif
