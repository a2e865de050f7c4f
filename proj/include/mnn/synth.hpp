#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "mnn/observation.hpp"
#include "mnn/types.hpp"

namespace mnn {

enum class OutcomeKind {
    exp_separable,  // x_ij = sum_k exp(sqrt(d) u_ik) exp(sqrt(d) v_jk)
    custom,         // reserved for externally supplied outcomes
};

/// Generator configuration for the synthetic latent-factor model.
struct ModelConfig {
    Index n_users = 0;
    Index n_items = 0;
    int d = 1;                  // latent dimension
    int r = 1;                  // outcome rank (equals d for exp_separable)
    double beta = 0.0;          // sparsity exponent, rho = min(n)^-beta
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
    OutcomeKind outcome_kind = OutcomeKind::exp_separable;

    double rho() const {
        return std::pow(static_cast<double>(std::min(n_users, n_items)), -beta);
    }

    void validate() const {
        if (n_users <= 0 || n_items <= 0)
            throw std::invalid_argument("ModelConfig: n_users and n_items must be positive");
        if (d < 1 || static_cast<Index>(d) > std::min(n_users, n_items))
            throw std::invalid_argument("ModelConfig: latent dimension out of range");
        if (r < 1)
            throw std::invalid_argument("ModelConfig: outcome rank must be >= 1");
        if (beta < 0.0 || beta >= 1.0)
            throw std::invalid_argument("ModelConfig: beta must lie in [0, 1)");
        if (noise_sigma < 0.0)
            throw std::invalid_argument("ModelConfig: noise_sigma must be >= 0");
        const double r_ = rho();
        if (!(r_ > 0.0 && r_ <= 1.0))
            throw std::invalid_argument("ModelConfig: rho outside (0, 1]");
    }
};

/// Unit-norm latent factor rows for users (U) and items (V).
struct LatentFactors {
    Matrix users;  // n_users x d
    Matrix items;  // n_items x d
};

/// Observation probabilities P and noiseless outcomes X on every cell.
struct GroundTruth {
    Matrix probabilities;
    Matrix outcomes;
};

namespace detail {

inline Matrix sphere_rows(Index n, int d, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix rows(n, d);
    for (Index i = 0; i < n; ++i) {
        double norm = 0.0;
        do {
            for (int k = 0; k < d; ++k) rows(i, k) = gauss(rng);
            norm = rows.row(i).norm();
        } while (norm == 0.0);  // measure-zero draw: redraw the row
        rows.row(i) /= norm;
    }
    return rows;
}

}  // namespace detail

/// Draw latent factors uniformly on the unit sphere: d i.i.d. standard
/// normals per row, normalized to unit norm.
inline LatentFactors sample_latent_factors(const ModelConfig& config, Rng& rng) {
    config.validate();
    LatentFactors f;
    f.users = detail::sphere_rows(config.n_users, config.d, rng);
    f.items = detail::sphere_rows(config.n_items, config.d, rng);
    return f;
}

/// p_ij = (rho/2) (u_i . v_j + 1), clamped into [0, rho] against roundoff.
inline Matrix observation_probabilities(const LatentFactors& factors, double rho) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("observation_probabilities: rho outside (0, 1]");
    Matrix p = (rho / 2.0) * ((factors.users * factors.items.transpose()).array() + 1.0).matrix();
    return p.cwiseMax(0.0).cwiseMin(rho);
}

/// x_ij = sum_k exp(sqrt(d) u_ik) exp(sqrt(d) v_jk); rank at most d.
inline Matrix outcome_matrix(const LatentFactors& factors, OutcomeKind kind) {
    if (kind != OutcomeKind::exp_separable)
        throw std::invalid_argument("outcome_matrix: unsupported outcome kind");
    const double root_d = std::sqrt(static_cast<double>(factors.users.cols()));
    Matrix theta = (root_d * factors.users).array().exp().matrix();
    Matrix phi = (root_d * factors.items).array().exp().matrix();
    return theta * phi.transpose();
}

inline GroundTruth make_ground_truth(const ModelConfig& config, const LatentFactors& factors) {
    return GroundTruth{observation_probabilities(factors, config.rho()),
                       outcome_matrix(factors, config.outcome_kind)};
}

/// Reveal each cell independently with probability P(i,j); revealed values
/// carry independent Gaussian noise of standard deviation sigma. Cells are
/// scanned in row-major order so the draw sequence is reproducible.
inline ObservationSet sample_observations(const GroundTruth& truth, double sigma, Rng& rng) {
    if (sigma < 0.0)
        throw std::invalid_argument("sample_observations: sigma must be >= 0");
    const Index n = truth.probabilities.rows(), m = truth.probabilities.cols();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Observation> entries;
    entries.reserve(static_cast<std::size_t>(truth.probabilities.sum()) + 16);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            if (unif(rng) < truth.probabilities(i, j)) {
                double noise = sigma > 0.0 ? sigma * gauss(rng) : 0.0;
                entries.push_back({i, j, truth.outcomes(i, j) + noise});
            }
        }
    }
    return ObservationSet::from_entries(n, m, std::move(entries));
}

}  // namespace mnn
