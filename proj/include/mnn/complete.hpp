#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mnn/cluster.hpp"
#include "mnn/observation.hpp"
#include "mnn/types.hpp"

namespace mnn {

/// Cluster-pair averages of observed outcomes. A cell is revealed iff its
/// pair collected at least `threshold` observations; its value is then the
/// arithmetic mean of those observations.
struct ClusteredMatrix {
    Matrix values;                             // meaningful where revealed
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> revealed;
    Eigen::MatrixXi counts;
    int threshold = 1;  // N_n

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

inline ClusteredMatrix build_clustered_matrix(const ObservationSet& obs,
                                              const PairIndexSets& sets, int min_obs) {
    if (min_obs < 1)
        throw std::invalid_argument("build_clustered_matrix: threshold must be >= 1");
    const Index nu = sets.n_user_clusters(), nv = sets.n_item_clusters();
    ClusteredMatrix h;
    h.values = Matrix::Zero(nu, nv);
    h.revealed.setConstant(nu, nv, false);
    h.counts = Eigen::MatrixXi::Zero(nu, nv);
    h.threshold = min_obs;

    Matrix filled = obs.zero_filled();
    for (Index i = 0; i < nu; ++i) {
        for (Index j = 0; j < nv; ++j) {
            auto cells = sets.cells(i, j);
            h.counts(i, j) = static_cast<int>(cells.size());
            if (cells.size() >= static_cast<std::size_t>(min_obs)) {
                double sum = 0.0;
                for (const Cell& c : cells) sum += filled(c.row, c.col);
                h.values(i, j) = sum / static_cast<double>(cells.size());
                h.revealed(i, j) = true;
            }
        }
    }
    return h;
}

/// Bipartite reveal graph between user clusters and item clusters: an edge
/// (i, j) exists iff cell (i, j) of the clustered matrix is revealed.
/// Adjacency lists are kept in ascending index order so traversals are
/// deterministic.
struct ClusterGraph {
    std::vector<std::vector<Index>> items_of_user;  // user cluster -> item clusters
    std::vector<std::vector<Index>> users_of_item;

    explicit ClusterGraph(const ClusteredMatrix& h)
        : items_of_user(h.rows()), users_of_item(h.cols()) {
        for (Index i = 0; i < h.rows(); ++i)
            for (Index j = 0; j < h.cols(); ++j)
                if (h.revealed(i, j)) {
                    items_of_user[i].push_back(j);
                    users_of_item[j].push_back(i);
                }
    }
};

inline double default_pivot_floor(const ClusteredMatrix& h, double rel = 1e-6) {
    double max_abs = 0.0;
    for (Index i = 0; i < h.rows(); ++i)
        for (Index j = 0; j < h.cols(); ++j)
            if (h.revealed(i, j)) max_abs = std::max(max_abs, std::abs(h.values(i, j)));
    return rel * max_abs;
}

namespace detail {

// Single-source BFS over the bipartite reveal graph with ascending neighbor
// expansion, accumulating the telescoping path product at every reachable
// item cluster. A denominator whose magnitude falls below pivot_floor marks
// the item as poisoned by that cell instead of producing a huge ratio.
struct PathImputeResult {
    std::vector<double> value;       // per item cluster; meaningful if reached
    std::vector<bool> reached;
    std::vector<Cell> bad_pivot;     // (i,j) of the offending denominator, row<0 if none
};

inline PathImputeResult path_impute_from(const ClusteredMatrix& h, const ClusterGraph& g,
                                         Index source_user, double pivot_floor) {
    const Index nu = h.rows(), nv = h.cols();
    PathImputeResult res;
    res.value.assign(nv, 0.0);
    res.reached.assign(nv, false);
    res.bad_pivot.assign(nv, Cell{-1, -1});

    std::vector<bool> seen_user(nu, false), seen_item(nv, false);
    // Entry-edge into each item cluster: the user it was discovered from.
    std::vector<Index> entry_user(nv, -1);
    seen_user[source_user] = true;

    std::deque<Index> queue;  // item-cluster frontier
    for (Index j : g.items_of_user[source_user]) {
        seen_item[j] = true;
        entry_user[j] = source_user;
        res.value[j] = h.values(source_user, j);
        res.reached[j] = true;
        queue.push_back(j);
    }

    while (!queue.empty()) {
        Index j = queue.front();
        queue.pop_front();
        for (Index i : g.users_of_item[j]) {
            if (seen_user[i]) continue;
            seen_user[i] = true;
            const double denom = h.values(i, j);
            const bool denom_bad = std::abs(denom) < pivot_floor;
            for (Index j2 : g.items_of_user[i]) {
                if (seen_item[j2]) continue;
                seen_item[j2] = true;
                entry_user[j2] = i;
                res.reached[j2] = true;
                if (denom_bad || res.bad_pivot[j].row >= 0) {
                    res.bad_pivot[j2] = denom_bad ? Cell{i, j} : res.bad_pivot[j];
                } else {
                    res.value[j2] = res.value[j] * h.values(i, j2) / denom;
                }
                queue.push_back(j2);
            }
        }
    }
    return res;
}

[[noreturn]] inline void throw_near_zero_pivot(const Cell& cell) {
    throw std::runtime_error("impute_path: near-zero pivot at clustered cell (" +
                             std::to_string(cell.row) + "," + std::to_string(cell.col) + ")");
}

}  // namespace detail

/// Impute one missing cell of the clustered matrix by the telescoping
/// product along the BFS-shortest path from user cluster i to item cluster
/// j. Returns 0 when the two clusters live in different components.
inline double impute_path(const ClusteredMatrix& h, Index i, Index j,
                          double pivot_floor = -1.0) {
    if (i < 0 || i >= h.rows() || j < 0 || j >= h.cols())
        throw std::invalid_argument("impute_path: cluster index out of range");
    if (h.revealed(i, j))
        throw std::invalid_argument("impute_path: cell is already revealed");
    if (pivot_floor < 0.0) pivot_floor = default_pivot_floor(h);
    ClusterGraph g(h);
    auto res = detail::path_impute_from(h, g, i, pivot_floor);
    if (!res.reached[j]) return 0.0;
    if (res.bad_pivot[j].row >= 0) detail::throw_near_zero_pivot(res.bad_pivot[j]);
    return res.value[j];
}

/// Impute every missing cell by path products; revealed cells pass through.
inline Matrix impute_all_path(const ClusteredMatrix& h, double pivot_floor = -1.0) {
    if (pivot_floor < 0.0) pivot_floor = default_pivot_floor(h);
    ClusterGraph g(h);
    Matrix out = Matrix::Zero(h.rows(), h.cols());
    for (Index i = 0; i < h.rows(); ++i) {
        bool any_missing = false;
        for (Index j = 0; j < h.cols(); ++j) {
            if (h.revealed(i, j)) out(i, j) = h.values(i, j);
            else any_missing = true;
        }
        if (!any_missing) continue;
        auto res = detail::path_impute_from(h, g, i, pivot_floor);
        for (Index j = 0; j < h.cols(); ++j) {
            if (h.revealed(i, j)) continue;
            if (!res.reached[j]) continue;  // disconnected: stays 0
            if (res.bad_pivot[j].row >= 0) detail::throw_near_zero_pivot(res.bad_pivot[j]);
            out(i, j) = res.value[j];
        }
    }
    return out;
}

struct AlsOptions {
    int rank = 1;
    double lambda = 1e-2;
    int max_iters = 200;
    double tol = 1e-6;  // relative objective decrease
    std::uint64_t seed = 0;
};

struct AlsResult {
    Matrix h_hat;                   // revealed cells pass through, missing = W Z^T
    Matrix w;                       // rows x rank
    Matrix z;                       // cols x rank
    std::vector<double> objective;  // after each alternation
    bool converged = false;
    bool had_empty_row_or_col = false;
};

/// Alternating ridge regression on the revealed cells of the clustered
/// matrix. Factors start from a seeded Gaussian scaled by
/// sqrt(mean|h|/rank); each half-step solves its ridge problem exactly, so
/// the objective never increases.
inline AlsResult impute_als(const ClusteredMatrix& h, const AlsOptions& opt) {
    if (opt.rank < 1) throw std::invalid_argument("impute_als: rank must be >= 1");
    if (opt.lambda < 0.0) throw std::invalid_argument("impute_als: lambda must be >= 0");
    const Index nu = h.rows(), nv = h.cols();
    const int r = opt.rank;

    std::vector<std::vector<Index>> row_obs(nu), col_obs(nv);
    double mean_abs = 0.0;
    std::size_t n_rev = 0;
    for (Index i = 0; i < nu; ++i)
        for (Index j = 0; j < nv; ++j)
            if (h.revealed(i, j)) {
                row_obs[i].push_back(j);
                col_obs[j].push_back(i);
                mean_abs += std::abs(h.values(i, j));
                ++n_rev;
            }
    mean_abs = n_rev > 0 ? mean_abs / static_cast<double>(n_rev) : 0.0;

    AlsResult res;
    const double init_scale = std::sqrt(std::max(mean_abs, 1e-12) / static_cast<double>(r));
    Rng rng(opt.seed ^ 0xa15a15a1u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    res.w.resize(nu, r);
    res.z.resize(nv, r);
    for (Index i = 0; i < nu; ++i)
        for (int k = 0; k < r; ++k) res.w(i, k) = init_scale * gauss(rng);
    for (Index j = 0; j < nv; ++j)
        for (int k = 0; k < r; ++k) res.z(j, k) = init_scale * gauss(rng);

    auto objective = [&]() {
        double sq = 0.0;
        for (Index i = 0; i < nu; ++i)
            for (Index j : row_obs[i]) {
                double d = h.values(i, j) - res.w.row(i).dot(res.z.row(j));
                sq += d * d;
            }
        return sq + opt.lambda * (res.w.squaredNorm() + res.z.squaredNorm());
    };

    auto solve_side = [&](Matrix& target, const Matrix& other,
                          const std::vector<std::vector<Index>>& obs_of, bool row_major_h) {
        Matrix gram(r, r);
        Vector rhs(r);
        for (Index i = 0; i < target.rows(); ++i) {
            const auto& cells = obs_of[i];
            if (cells.empty()) {
                target.row(i).setZero();
                res.had_empty_row_or_col = true;
                continue;
            }
            gram.setZero();
            rhs.setZero();
            for (Index j : cells) {
                gram.noalias() += other.row(j).transpose() * other.row(j);
                rhs.noalias() += (row_major_h ? h.values(i, j) : h.values(j, i)) * other.row(j).transpose();
            }
            gram.diagonal().array() += opt.lambda;
            target.row(i) = gram.ldlt().solve(rhs).transpose();
        }
    };

    double prev = objective();
    res.objective.push_back(prev);
    for (int it = 0; it < opt.max_iters; ++it) {
        solve_side(res.w, res.z, row_obs, true);
        solve_side(res.z, res.w, col_obs, false);
        double cur = objective();
        res.objective.push_back(cur);
        const double denom = std::max(prev, 1e-300);
        if ((prev - cur) / denom < opt.tol) {
            res.converged = true;
            break;
        }
        prev = cur;
    }

    res.h_hat = res.w * res.z.transpose();
    for (Index i = 0; i < nu; ++i)
        for (Index j = 0; j < nv; ++j)
            if (h.revealed(i, j)) res.h_hat(i, j) = h.values(i, j);
    return res;
}

/// Expand the imputed clustered matrix back to unit level: every cell takes
/// the value of its cluster pair.
inline Matrix predict(const Matrix& h_hat, const ClusterAssignment& assignment) {
    const Index n = static_cast<Index>(assignment.user_center_rank.size());
    const Index m = static_cast<Index>(assignment.item_center_rank.size());
    if (h_hat.rows() != static_cast<Index>(assignment.central_users.size()) ||
        h_hat.cols() != static_cast<Index>(assignment.central_items.size()))
        throw std::invalid_argument("predict: clustered matrix does not match the assignment");
    Matrix out(n, m);
    for (Index i = 0; i < n; ++i) {
        const Index uc = assignment.user_center_rank[i];
        for (Index j = 0; j < m; ++j) out(i, j) = h_hat(uc, assignment.item_center_rank[j]);
    }
    return out;
}

}  // namespace mnn
