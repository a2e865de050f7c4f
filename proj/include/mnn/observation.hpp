#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mnn/types.hpp"

namespace mnn {

/// One revealed entry of the outcome matrix.
struct Observation {
    Index row = 0;
    Index col = 0;
    double value = 0.0;
};

/// A partially observed matrix: the set of revealed cells and their noisy
/// values. The binary mask and the value map are one and the same storage,
/// so a value exists exactly where the mask is 1. Entries are kept sorted
/// in row-major order.
class ObservationSet {
public:
    ObservationSet(Index n_users, Index n_items)
        : n_users_(n_users), n_items_(n_items) {
        if (n_users <= 0 || n_items <= 0)
            throw std::invalid_argument("ObservationSet: dimensions must be positive");
    }

    static ObservationSet from_entries(Index n_users, Index n_items,
                                       std::vector<Observation> entries,
                                       std::optional<double> rho_hint = std::nullopt) {
        ObservationSet obs(n_users, n_items);
        obs.rho_hint = rho_hint;
        std::sort(entries.begin(), entries.end(), [](const Observation& a, const Observation& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            if (e.row < 0 || e.row >= n_users || e.col < 0 || e.col >= n_items)
                throw std::invalid_argument("ObservationSet: cell out of range");
            if (i > 0 && entries[i - 1].row == e.row && entries[i - 1].col == e.col)
                throw std::invalid_argument("ObservationSet: duplicate cell (" +
                                            std::to_string(e.row) + "," + std::to_string(e.col) + ")");
        }
        obs.entries_ = std::move(entries);
        return obs;
    }

    Index n_users() const { return n_users_; }
    Index n_items() const { return n_items_; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<Observation>& entries() const { return entries_; }

    double observed_fraction() const {
        return static_cast<double>(entries_.size()) /
               (static_cast<double>(n_users_) * static_cast<double>(n_items_));
    }

    bool is_observed(Index i, Index j) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), Cell{i, j},
                                   [](const Observation& a, const Cell& c) {
                                       return a.row != c.row ? a.row < c.row : a.col < c.col;
                                   });
        return it != entries_.end() && it->row == i && it->col == j;
    }

    /// 0/1 mask as a dense matrix.
    Matrix dense_mask() const {
        Matrix mask = Matrix::Zero(n_users_, n_items_);
        for (const auto& e : entries_) mask(e.row, e.col) = 1.0;
        return mask;
    }

    /// Values with unobserved cells set to zero (the USVT fill convention).
    Matrix zero_filled() const {
        Matrix filled = Matrix::Zero(n_users_, n_items_);
        for (const auto& e : entries_) filled(e.row, e.col) = e.value;
        return filled;
    }

    /// Range [min, max] of the observed values; requires at least one entry.
    std::pair<double, double> value_range() const {
        if (entries_.empty())
            throw std::invalid_argument("ObservationSet: no observations");
        double lo = entries_.front().value, hi = lo;
        for (const auto& e : entries_) {
            lo = std::min(lo, e.value);
            hi = std::max(hi, e.value);
        }
        return {lo, hi};
    }

    /// Known sparsity factor, when the generator (or caller) provided one.
    std::optional<double> rho_hint;

private:
    Index n_users_;
    Index n_items_;
    std::vector<Observation> entries_;
};

}  // namespace mnn
