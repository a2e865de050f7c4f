#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace mnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// All randomness flows through explicitly seeded 64-bit Mersenne twisters;
/// operations that consume one are deterministic given the engine state.
using Rng = std::mt19937_64;

/// A (row, col) coordinate into an outcome matrix.
struct Cell {
    Index row = 0;
    Index col = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
};

}  // namespace mnn
