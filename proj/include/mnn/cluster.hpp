#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "mnn/distance.hpp"
#include "mnn/observation.hpp"
#include "mnn/types.hpp"

namespace mnn {

/// Central users/items and the map from every unit to its assigned center.
/// Centers are 6*epsilon-separated; every unit maps to its nearest center
/// (lowest center index on ties) and each center maps to itself.
struct ClusterAssignment {
    std::vector<Index> central_users;  // ascending original indices
    std::vector<Index> central_items;
    std::vector<Index> user_center;       // user  -> original index of its center
    std::vector<Index> item_center;       // item  -> original index of its center
    std::vector<Index> user_center_rank;  // user  -> row of its center in the clustered matrix
    std::vector<Index> item_center_rank;  // item  -> column likewise
    double epsilon = 0.0;
};

/// Greedy maximal 6-epsilon-separated subset, scanning indices in ascending
/// order. An index is added iff its distance to every previously selected
/// center is at least six_eps; index 0 is always selected.
inline std::vector<Index> select_centers(const Matrix& dist, double six_eps) {
    if (dist.rows() != dist.cols() || dist.rows() == 0)
        throw std::invalid_argument("select_centers: distance matrix must be square and nonempty");
    if (!(six_eps > 0.0))
        throw std::invalid_argument("select_centers: separation must be positive");
    std::vector<Index> centers;
    for (Index i = 0; i < dist.rows(); ++i) {
        bool separated = true;
        for (Index c : centers) {
            if (dist(i, c) < six_eps) {
                separated = false;
                break;
            }
        }
        if (separated) centers.push_back(i);
    }
    return centers;
}

/// Map every index to its nearest center; ties go to the lowest center index.
inline std::vector<Index> assign_to_centers(const Matrix& dist, const std::vector<Index>& centers) {
    if (centers.empty())
        throw std::invalid_argument("assign_to_centers: no centers");
    std::vector<Index> assignment(dist.rows());
    for (Index i = 0; i < dist.rows(); ++i) {
        Index best = centers.front();
        double best_dist = dist(i, best);
        for (std::size_t c = 1; c < centers.size(); ++c) {
            double d = dist(i, centers[c]);
            if (d < best_dist) {
                best_dist = d;
                best = centers[c];
            }
        }
        assignment[i] = best;
    }
    return assignment;
}

/// Run center selection and assignment on both sides.
inline ClusterAssignment make_assignment(const DistanceEstimates& dist, double epsilon) {
    ClusterAssignment a;
    a.epsilon = epsilon;
    a.central_users = select_centers(dist.user_dist, 6.0 * epsilon);
    a.central_items = select_centers(dist.item_dist, 6.0 * epsilon);
    a.user_center = assign_to_centers(dist.user_dist, a.central_users);
    a.item_center = assign_to_centers(dist.item_dist, a.central_items);

    std::vector<Index> user_rank(dist.user_dist.rows(), -1);
    for (std::size_t r = 0; r < a.central_users.size(); ++r) user_rank[a.central_users[r]] = static_cast<Index>(r);
    std::vector<Index> item_rank(dist.item_dist.rows(), -1);
    for (std::size_t r = 0; r < a.central_items.size(); ++r) item_rank[a.central_items[r]] = static_cast<Index>(r);

    a.user_center_rank.resize(a.user_center.size());
    for (std::size_t i = 0; i < a.user_center.size(); ++i)
        a.user_center_rank[i] = user_rank[a.user_center[i]];
    a.item_center_rank.resize(a.item_center.size());
    for (std::size_t j = 0; j < a.item_center.size(); ++j)
        a.item_center_rank[j] = item_rank[a.item_center[j]];
    return a;
}

/// Observed cells partitioned by (user cluster, item cluster), stored as one
/// flat list grouped per cluster pair. Every observed cell appears in
/// exactly one group.
class PairIndexSets {
public:
    PairIndexSets(Index n_user_clusters, Index n_item_clusters)
        : nu_(n_user_clusters), nv_(n_item_clusters),
          offsets_(static_cast<std::size_t>(nu_ * nv_) + 1, 0) {}

    Index n_user_clusters() const { return nu_; }
    Index n_item_clusters() const { return nv_; }

    std::span<const Cell> cells(Index uc, Index vc) const {
        const std::size_t key = pair_key(uc, vc);
        return {cells_.data() + offsets_[key], offsets_[key + 1] - offsets_[key]};
    }

    std::size_t count(Index uc, Index vc) const { return cells(uc, vc).size(); }
    std::size_t total() const { return cells_.size(); }

    friend PairIndexSets build_index_sets(const ClusterAssignment&, const ObservationSet&);

private:
    std::size_t pair_key(Index uc, Index vc) const {
        return static_cast<std::size_t>(uc) * static_cast<std::size_t>(nv_) + static_cast<std::size_t>(vc);
    }

    Index nu_, nv_;
    std::vector<std::size_t> offsets_;
    std::vector<Cell> cells_;
};

/// Partition the observed cells by the cluster pair of their user and item.
inline PairIndexSets build_index_sets(const ClusterAssignment& assignment, const ObservationSet& obs) {
    if (assignment.user_center_rank.size() != static_cast<std::size_t>(obs.n_users()) ||
        assignment.item_center_rank.size() != static_cast<std::size_t>(obs.n_items()))
        throw std::invalid_argument("build_index_sets: assignment does not cover the observation set");

    PairIndexSets sets(static_cast<Index>(assignment.central_users.size()),
                       static_cast<Index>(assignment.central_items.size()));

    // Counting sort on the pair key keeps construction linear in the number
    // of observed cells.
    std::vector<std::size_t> counts(static_cast<std::size_t>(sets.nu_ * sets.nv_), 0);
    for (const auto& e : obs.entries())
        ++counts[sets.pair_key(assignment.user_center_rank[e.row], assignment.item_center_rank[e.col])];
    for (std::size_t k = 0; k < counts.size(); ++k)
        sets.offsets_[k + 1] = sets.offsets_[k] + counts[k];

    sets.cells_.resize(obs.size());
    std::vector<std::size_t> cursor(sets.offsets_.begin(), sets.offsets_.end() - 1);
    for (const auto& e : obs.entries()) {
        const std::size_t key =
            sets.pair_key(assignment.user_center_rank[e.row], assignment.item_center_rank[e.col]);
        sets.cells_[cursor[key]++] = Cell{e.row, e.col};
    }
    return sets;
}

}  // namespace mnn
