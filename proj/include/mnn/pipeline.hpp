#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "mnn/baseline.hpp"
#include "mnn/cluster.hpp"
#include "mnn/complete.hpp"
#include "mnn/cross_validate.hpp"
#include "mnn/distance.hpp"
#include "mnn/observation.hpp"

namespace mnn {

enum class Algorithm { mnn_path, mnn_als, usvt_known_rank, usvt_standard };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::mnn_path: return "mnn_path";
        case Algorithm::mnn_als: return "mnn_als";
        case Algorithm::usvt_known_rank: return "usvt_known_rank";
        case Algorithm::usvt_standard: return "usvt_standard";
    }
    throw std::invalid_argument("unknown algorithm");
}

inline Algorithm algorithm_from_string(const std::string& name) {
    if (name == "mnn_path") return Algorithm::mnn_path;
    if (name == "mnn_als") return Algorithm::mnn_als;
    if (name == "usvt_known_rank") return Algorithm::usvt_known_rank;
    if (name == "usvt_standard") return Algorithm::usvt_standard;
    throw std::invalid_argument("unknown algorithm: " + name);
}

/// Hyperparameters of the full nearest-neighbor pipeline. ParamSet keys of
/// the same names override the defaults (epsilon, min_obs, mask_dim, rank,
/// lambda, als_iters, als_tol).
struct MnnOptions {
    double epsilon = 0.15;    // cluster resolution; centers are 6*epsilon apart
    int min_obs = 10;         // reveal threshold N_n on cluster-pair counts
    int mask_dim = 5;         // latent dimension used on the observation pattern
    int rank = 5;             // outcome rank for ALS (ignored by the path backend)
    double lambda = 1e-2;
    int als_iters = 200;
    double als_tol = 1e-6;
    bool use_path = false;    // telescoping path products instead of ALS (rank-1 data)
    bool center = false;      // subtract rho/2 when a sparsity hint is available
    std::uint64_t seed = 0;
};

inline MnnOptions mnn_options_from_params(const ParamSet& p, MnnOptions base = MnnOptions{}) {
    base.epsilon = param_or(p, "epsilon", base.epsilon);
    base.min_obs = static_cast<int>(param_or(p, "min_obs", base.min_obs));
    base.mask_dim = static_cast<int>(param_or(p, "mask_dim", base.mask_dim));
    base.rank = static_cast<int>(param_or(p, "rank", base.rank));
    base.lambda = param_or(p, "lambda", base.lambda);
    base.als_iters = static_cast<int>(param_or(p, "als_iters", base.als_iters));
    base.als_tol = param_or(p, "als_tol", base.als_tol);
    return base;
}

/// Block-constant predictor: every cell reads its cluster-pair estimate.
class ClusterPredictor final : public Predictor {
public:
    ClusterPredictor(Matrix h_hat, std::vector<Index> user_rank, std::vector<Index> item_rank)
        : h_hat_(std::move(h_hat)), user_rank_(std::move(user_rank)),
          item_rank_(std::move(item_rank)) {}

    double at(Index i, Index j) const override { return h_hat_(user_rank_[i], item_rank_[j]); }

    const Matrix& clustered_estimate() const { return h_hat_; }
    std::size_t n_user_clusters() const { return static_cast<std::size_t>(h_hat_.rows()); }
    std::size_t n_item_clusters() const { return static_cast<std::size_t>(h_hat_.cols()); }

private:
    Matrix h_hat_;
    std::vector<Index> user_rank_;
    std::vector<Index> item_rank_;
};

class DensePredictor final : public Predictor {
public:
    explicit DensePredictor(Matrix values) : values_(std::move(values)) {}
    double at(Index i, Index j) const override { return values_(i, j); }

private:
    Matrix values_;
};

namespace detail {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(name) + " stage: " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(name) + " stage: " + e.what());
    }
}

}  // namespace detail

/// Full nearest-neighbor fit: distance estimation on the mask, greedy
/// clustering, cluster-pair averaging, imputation, block-constant predictor.
/// A precomputed distance estimate may be supplied when the caller already
/// ran the (grid-independent) first stage on the same observations.
inline std::unique_ptr<ClusterPredictor> fit_mnn(const ObservationSet& obs, const MnnOptions& opt,
                                                 const DistanceEstimates* precomputed = nullptr) {
    DistanceEstimates local;
    const DistanceEstimates* dist = precomputed;
    if (dist == nullptr) {
        local = detail::stage("distance", [&] {
            CenteredMask mask = (opt.center && obs.rho_hint)
                                    ? center_observations(obs, *obs.rho_hint)
                                    : raw_observations(obs);
            return estimate_distances(mask, opt.mask_dim);
        });
        dist = &local;
    }

    ClusterAssignment assignment =
        detail::stage("cluster", [&] { return make_assignment(*dist, opt.epsilon); });
    PairIndexSets sets =
        detail::stage("cluster", [&] { return build_index_sets(assignment, obs); });
    ClusteredMatrix h = detail::stage(
        "average", [&] { return build_clustered_matrix(obs, sets, opt.min_obs); });

    Matrix h_hat = detail::stage("impute", [&] {
        if (opt.use_path) return impute_all_path(h);
        AlsOptions als;
        als.rank = opt.rank;
        als.lambda = opt.lambda;
        als.max_iters = opt.als_iters;
        als.tol = opt.als_tol;
        als.seed = opt.seed;
        return impute_als(h, als).h_hat;
    });

    return std::make_unique<ClusterPredictor>(std::move(h_hat),
                                              std::move(assignment.user_center_rank),
                                              std::move(assignment.item_center_rank));
}

/// Fit the selected algorithm and return a queryable model.
inline std::unique_ptr<Predictor> fit_model(const ObservationSet& obs, Algorithm algorithm,
                                            const ParamSet& params, std::uint64_t seed = 0) {
    switch (algorithm) {
        case Algorithm::mnn_path:
        case Algorithm::mnn_als: {
            MnnOptions opt = MnnOptions::from_params(params);
            opt.use_path = algorithm == Algorithm::mnn_path;
            opt.center = param_or(params, "center", 0.0) != 0.0;
            opt.seed = seed;
            return fit_mnn(obs, opt);
        }
        case Algorithm::usvt_known_rank: {
            const int rank = static_cast<int>(param_or(params, "rank", 1.0));
            const bool clip = param_or(params, "clip", 1.0) != 0.0;
            return std::make_unique<DensePredictor>(detail::stage("usvt", [&] {
                return usvt_known_rank(obs, rank,
                                       clip ? ClipSpec::observed_range() : ClipSpec::none());
            }));
        }
        case Algorithm::usvt_standard: {
            const double eta = param_or(params, "eta", 0.02);
            const bool clip = param_or(params, "clip", 1.0) != 0.0;
            return std::make_unique<DensePredictor>(detail::stage("usvt", [&] {
                return usvt_standard(obs, eta,
                                     clip ? ClipSpec::observed_range() : ClipSpec::none());
            }));
        }
    }
    throw std::invalid_argument("fit_model: unknown algorithm");
}

/// Fit and materialize the full estimate matrix.
inline Matrix fit_predict(const ObservationSet& obs, Algorithm algorithm, const ParamSet& params,
                          std::uint64_t seed = 0) {
    return fit_model(obs, algorithm, params, seed)->full(obs.n_users(), obs.n_items());
}

/// Cross-validation pipeline for the nearest-neighbor algorithm. Distance
/// estimates depend only on the training mask, centering mode, and mask_dim,
/// so they are cached per fold and shared across grid points.
class MnnCvPipeline final : public CvPipeline {
public:
    explicit MnnCvPipeline(MnnOptions base) : base_(base) {}

    void prepare_fold(const ObservationSet& train) override {
        (void)train;
        cache_.clear();
    }

    std::unique_ptr<Predictor> fit(const ObservationSet& train, const ParamSet& params) override {
        MnnOptions opt = MnnOptions::from_params(params, base_);
        auto it = cache_.find(opt.mask_dim);
        if (it == cache_.end()) {
            CenteredMask mask = (opt.center && train.rho_hint)
                                    ? center_observations(train, *train.rho_hint)
                                    : raw_observations(train);
            it = cache_.emplace(opt.mask_dim, estimate_distances(mask, opt.mask_dim)).first;
        }
        return fit_mnn(train, opt, &it->second);
    }

private:
    MnnOptions base_;
    std::map<int, DistanceEstimates> cache_;
};

/// Cross-validation pipeline wrapping either USVT variant.
class UsvtCvPipeline final : public CvPipeline {
public:
    explicit UsvtCvPipeline(Algorithm algorithm) : algorithm_(algorithm) {}

    std::unique_ptr<Predictor> fit(const ObservationSet& train, const ParamSet& params) override {
        return fit_model(train, algorithm_, params);
    }

private:
    Algorithm algorithm_;
};

}  // namespace mnn
