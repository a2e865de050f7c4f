#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mnn/types.hpp"

namespace mnn {

/// R^2 (coefficient of determination, can be negative), mean squared error,
/// and mean absolute error over the evaluated cells. When the truth has zero
/// variance R^2 is undefined; r2_defined is cleared and r2 set to NaN while
/// mse/mae stay valid.
struct MetricsReport {
    double r2 = 0.0;
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n_evaluated = 0;
    bool r2_defined = true;
};

namespace detail {

class MetricsAccumulator {
public:
    void add(double pred, double truth) {
        ++n_;
        const double err = pred - truth;
        sq_err_ += err * err;
        abs_err_ += std::abs(err);
        // Welford update keeps SS_tot stable under large constant offsets.
        const double delta = truth - truth_mean_;
        truth_mean_ += delta / static_cast<double>(n_);
        truth_m2_ += delta * (truth - truth_mean_);
    }

    MetricsReport finish() const {
        if (n_ == 0)
            throw std::invalid_argument("compute_metrics: empty evaluation set");
        MetricsReport rep;
        rep.n_evaluated = n_;
        const double n = static_cast<double>(n_);
        rep.mse = sq_err_ / n;
        rep.mae = abs_err_ / n;
        if (truth_m2_ <= 0.0) {
            rep.r2_defined = false;
            rep.r2 = std::numeric_limits<double>::quiet_NaN();
        } else {
            rep.r2 = 1.0 - sq_err_ / truth_m2_;
        }
        return rep;
    }

private:
    std::size_t n_ = 0;
    double sq_err_ = 0.0;
    double abs_err_ = 0.0;
    double truth_mean_ = 0.0;
    double truth_m2_ = 0.0;
};

}  // namespace detail

inline MetricsReport compute_metrics(const Matrix& pred, const Matrix& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("compute_metrics: shape mismatch");
    detail::MetricsAccumulator acc;
    for (Index j = 0; j < pred.cols(); ++j)
        for (Index i = 0; i < pred.rows(); ++i) acc.add(pred(i, j), truth(i, j));
    return acc.finish();
}

inline MetricsReport compute_metrics(const Matrix& pred, const Matrix& truth,
                                     std::span<const Cell> cells) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("compute_metrics: shape mismatch");
    detail::MetricsAccumulator acc;
    for (const Cell& c : cells) acc.add(pred(c.row, c.col), truth(c.row, c.col));
    return acc.finish();
}

inline MetricsReport compute_metrics(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("compute_metrics: length mismatch");
    detail::MetricsAccumulator acc;
    for (std::size_t i = 0; i < pred.size(); ++i) acc.add(pred[i], truth[i]);
    return acc.finish();
}

}  // namespace mnn
