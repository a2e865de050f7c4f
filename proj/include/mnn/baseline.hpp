#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mnn/observation.hpp"
#include "mnn/spectral.hpp"
#include "mnn/types.hpp"

namespace mnn {

/// Output clipping policy for the USVT estimators. The observed-range mode
/// clips to [min, max] of the observed values; raw USVT on strongly biased
/// data can wander far outside that range.
struct ClipSpec {
    enum class Mode { none, observed_range, fixed };
    Mode mode = Mode::observed_range;
    double lo = 0.0;
    double hi = 0.0;

    static ClipSpec none() { return {Mode::none, 0.0, 0.0}; }
    static ClipSpec observed_range() { return {Mode::observed_range, 0.0, 0.0}; }
    static ClipSpec fixed(double lo, double hi) { return {Mode::fixed, lo, hi}; }
};

namespace detail {

inline void apply_clip(Matrix& est, const ClipSpec& clip, const ObservationSet& obs) {
    if (clip.mode == ClipSpec::Mode::none) return;
    double lo = clip.lo, hi = clip.hi;
    if (clip.mode == ClipSpec::Mode::observed_range) {
        auto range = obs.value_range();
        lo = range.first;
        hi = range.second;
    }
    est = est.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace detail

/// Known-rank USVT: zero-fill the missing cells, truncate the SVD at the
/// given rank, rescale by the observed fraction, clip.
inline Matrix usvt_known_rank(const ObservationSet& obs, int rank,
                              ClipSpec clip = ClipSpec::observed_range()) {
    if (obs.size() == 0)
        throw std::invalid_argument("usvt_known_rank: no observations");
    if (rank < 1 || static_cast<Index>(rank) > std::min(obs.n_users(), obs.n_items()))
        throw std::invalid_argument("usvt_known_rank: rank out of range");
    const double p_hat = obs.observed_fraction();
    Matrix est = low_rank_approx(truncated_svd(obs.zero_filled(), rank)) / p_hat;
    detail::apply_clip(est, clip, obs);
    return est;
}

/// Standard USVT: keep every singular value above (2 + eta) sqrt(max(n, m) p̂)
/// instead of a fixed rank.
inline Matrix usvt_standard(const ObservationSet& obs, double eta = 0.02,
                            ClipSpec clip = ClipSpec::observed_range()) {
    if (obs.size() == 0)
        throw std::invalid_argument("usvt_standard: no observations");
    if (!(eta > 0.0))
        throw std::invalid_argument("usvt_standard: eta must be positive");
    const Index n = obs.n_users(), m = obs.n_items();
    const double p_hat = obs.observed_fraction();
    const double threshold =
        (2.0 + eta) * std::sqrt(static_cast<double>(std::max(n, m)) * p_hat);

    Matrix filled = obs.zero_filled();
    const Index min_dim = std::min(n, m);
    int k = static_cast<int>(std::min<Index>(16, min_dim));
    TruncatedSVD svd = truncated_svd(filled, k);
    while (svd.singular_values[k - 1] > threshold && static_cast<Index>(k) < min_dim) {
        k = static_cast<int>(std::min<Index>(2 * k, min_dim));
        svd = truncated_svd(filled, k);
    }
    int keep = 0;
    while (keep < k && svd.singular_values[keep] > threshold) ++keep;

    Matrix est;
    if (keep == 0) {
        est = Matrix::Zero(n, m);
    } else {
        TruncatedSVD kept{svd.singular_values.head(keep), svd.left.leftCols(keep),
                          svd.right.leftCols(keep)};
        est = low_rank_approx(kept) / p_hat;
    }
    detail::apply_clip(est, clip, obs);
    return est;
}

}  // namespace mnn
