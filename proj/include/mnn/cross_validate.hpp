#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mnn/metrics.hpp"
#include "mnn/observation.hpp"
#include "mnn/types.hpp"

namespace mnn {

/// Flat hyperparameter bag; pipelines read the keys they understand.
using ParamSet = std::map<std::string, double>;

inline double param_or(const ParamSet& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

inline std::string describe(const ParamSet& params) {
    std::string out = "{";
    for (const auto& [k, v] : params) {
        if (out.size() > 1) out += ", ";
        out += k + "=" + std::to_string(v);
    }
    return out + "}";
}

/// A fitted model: cheap per-cell queries, materialized on demand.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual double at(Index i, Index j) const = 0;

    Matrix full(Index n, Index m) const {
        Matrix out(n, m);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < m; ++j) out(i, j) = at(i, j);
        return out;
    }
};

/// Fit-predict procedure handed to cross_validate. prepare_fold runs once
/// per fold before the grid sweep, letting pipelines reuse work that does
/// not depend on the grid point (e.g. distance estimation).
class CvPipeline {
public:
    virtual ~CvPipeline() = default;
    virtual void prepare_fold(const ObservationSet& train) { (void)train; }
    virtual std::unique_ptr<Predictor> fit(const ObservationSet& train, const ParamSet& params) = 0;
};

struct CvResult {
    ParamSet best;
    std::size_t best_index = 0;
    Matrix fold_mse;                // grid x folds
    std::vector<double> mean_mse;   // per grid point
};

/// Split 0..n_cells-1 into `folds` disjoint, near-equal, seed-deterministic
/// parts (a true partition of the observed cells).
inline std::vector<std::vector<std::size_t>> split_folds(std::size_t n_cells, int folds, Rng& rng) {
    if (folds < 2)
        throw std::invalid_argument("split_folds: need at least 2 folds");
    if (n_cells < static_cast<std::size_t>(folds))
        throw std::invalid_argument("split_folds: a fold would be empty");
    std::vector<std::size_t> order(n_cells);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> parts(folds);
    for (std::size_t i = 0; i < n_cells; ++i)
        parts[i % folds].push_back(order[i]);
    return parts;
}

namespace detail {

inline ObservationSet train_subset(const ObservationSet& obs, const std::vector<char>& held_out) {
    std::vector<Observation> kept;
    kept.reserve(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        if (!held_out[i]) kept.push_back(obs.entries()[i]);
    return ObservationSet::from_entries(obs.n_users(), obs.n_items(), std::move(kept), obs.rho_hint);
}

}  // namespace detail

/// K-fold cross-validation over a hyperparameter grid: each fold of observed
/// cells is held out in turn, the pipeline fits on the remainder, and the
/// held-out cells are scored by MSE. Returns the grid point with the lowest
/// mean held-out MSE (first in grid order on ties).
inline CvResult cross_validate(const ObservationSet& obs, int folds,
                               const std::vector<ParamSet>& grid, CvPipeline& pipeline, Rng& rng) {
    if (grid.empty())
        throw std::invalid_argument("cross_validate: empty grid");
    auto parts = split_folds(obs.size(), folds, rng);

    CvResult res;
    res.fold_mse = Matrix::Zero(static_cast<Index>(grid.size()), folds);
    for (int f = 0; f < folds; ++f) {
        std::vector<char> held(obs.size(), 0);
        for (std::size_t idx : parts[f]) held[idx] = 1;
        ObservationSet train = detail::train_subset(obs, held);

        std::vector<double> truth;
        std::vector<Cell> cells;
        truth.reserve(parts[f].size());
        cells.reserve(parts[f].size());
        for (std::size_t idx : parts[f]) {
            const auto& e = obs.entries()[idx];
            cells.push_back({e.row, e.col});
            truth.push_back(e.value);
        }

        pipeline.prepare_fold(train);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            std::unique_ptr<Predictor> model;
            try {
                model = pipeline.fit(train, grid[g]);
            } catch (const std::exception& err) {
                throw std::runtime_error("cross_validate: fit failed at grid point " +
                                         describe(grid[g]) + ": " + err.what());
            }
            std::vector<double> pred(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i)
                pred[i] = model->at(cells[i].row, cells[i].col);
            res.fold_mse(static_cast<Index>(g), f) = compute_metrics(pred, truth).mse;
        }
    }

    res.mean_mse.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        res.mean_mse[g] = res.fold_mse.row(static_cast<Index>(g)).mean();
    res.best_index = static_cast<std::size_t>(
        std::min_element(res.mean_mse.begin(), res.mean_mse.end()) - res.mean_mse.begin());
    res.best = grid[res.best_index];
    return res;
}

}  // namespace mnn
