#pragma once

#include <cmath>
#include <stdexcept>

#include "mnn/observation.hpp"
#include "mnn/spectral.hpp"
#include "mnn/types.hpp"

namespace mnn {

/// Observation pattern prepared for distance estimation. In centered form
/// every entry is a_ij - rho/2; the practical (uncentered) form keeps the
/// raw 0/1 mask and compensates with one extra rank during estimation.
struct CenteredMask {
    Matrix values;
    double rho_used = 1.0;
    bool centered = true;
};

/// Pairwise latent-distance estimates between users and between items.
/// Symmetric with exactly zero diagonal by construction.
struct DistanceEstimates {
    Matrix user_dist;
    Matrix item_dist;
    bool no_signal = false;  // set when the input mask carried no signal at all
};

/// Centered observation pattern: A - (rho/2) 11^T.
inline CenteredMask center_observations(const ObservationSet& obs, double rho) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("center_observations: rho outside (0, 1]");
    CenteredMask mask;
    mask.values = Matrix::Constant(obs.n_users(), obs.n_items(), -rho / 2.0);
    for (const auto& e : obs.entries()) mask.values(e.row, e.col) = 1.0 - rho / 2.0;
    mask.rho_used = rho;
    mask.centered = true;
    return mask;
}

/// Practical variant: the raw mask stands in for the centered one. When no
/// sparsity hint is available, rho is estimated as twice the observed
/// fraction (the all-ones component contributes rho/2 on average).
inline CenteredMask raw_observations(const ObservationSet& obs) {
    CenteredMask mask;
    mask.values = obs.dense_mask();
    mask.rho_used = obs.rho_hint.value_or(
        std::min(1.0, std::max(2.0 * obs.observed_fraction(), 1e-12)));
    mask.centered = false;
    return mask;
}

namespace detail {

// Pairwise row distances of an embedding, scaled; mirrored so symmetry is
// exact and the diagonal is exactly zero.
inline Matrix pairwise_row_distances(const Matrix& embed, double scale) {
    const Index n = embed.rows();
    Matrix dist = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            double d = (embed.row(i) - embed.row(j)).norm() * scale;
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    return dist;
}

}  // namespace detail

/// Estimate latent distances from the (centered or raw) observation pattern.
/// A rank-d reconstruction of the mask is formed (rank d+1 in the raw case,
/// one extra dimension for the all-ones component); user distances come from
/// row differences scaled by (2/rho) sqrt(d/m), item distances from column
/// differences scaled by (2/rho) sqrt(d/n). Distances depend on the
/// reconstruction only, never on individual singular-vector signs.
inline DistanceEstimates estimate_distances(const CenteredMask& mask, int d) {
    const Index n = mask.values.rows(), m = mask.values.cols();
    if (d < 1 || static_cast<Index>(d) > std::min(n, m))
        throw std::invalid_argument("estimate_distances: d out of range");

    DistanceEstimates est;
    if (mask.values.isZero(0.0)) {
        est.user_dist = Matrix::Zero(n, n);
        est.item_dist = Matrix::Zero(m, m);
        est.no_signal = true;
        return est;
    }

    const int rank = mask.centered ? d : std::min<int>(d + 1, static_cast<int>(std::min(n, m)));
    TruncatedSVD svd = truncated_svd(mask.values, rank);

    // Row (column) norms of the reconstruction are preserved by dropping the
    // orthonormal right (left) factor, so distances are computed on the
    // small n x rank and m x rank embeddings.
    Matrix user_embed = svd.left * svd.singular_values.asDiagonal();
    Matrix item_embed = svd.right * svd.singular_values.asDiagonal();

    const double dd = static_cast<double>(d);
    est.user_dist = detail::pairwise_row_distances(
        user_embed, (2.0 / mask.rho_used) * std::sqrt(dd / static_cast<double>(m)));
    est.item_dist = detail::pairwise_row_distances(
        item_embed, (2.0 / mask.rho_used) * std::sqrt(dd / static_cast<double>(n)));
    return est;
}

/// High-probability bound on the distance estimation error:
/// (C / rho^2) sqrt(d^3/n log(2n/delta)). Diagnostic only.
inline double distance_error_bound(Index n, int d, double rho, double delta, double c = 1.0) {
    if (n <= 0 || d <= 0 || rho <= 0.0 || c <= 0.0)
        throw std::invalid_argument("distance_error_bound: arguments must be positive");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("distance_error_bound: delta outside (0, 1)");
    const double nn = static_cast<double>(n), dd = static_cast<double>(d);
    return c / (rho * rho) * std::sqrt(dd * dd * dd / nn * std::log(2.0 * nn / delta));
}

}  // namespace mnn
