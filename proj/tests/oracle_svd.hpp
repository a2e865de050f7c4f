#pragma once

// Brute-force reference SVD for tests: one-sided Jacobi (Hestenes) rotations
// applied to column pairs until the columns are mutually orthogonal. Shares
// no code with the library's decomposition path.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mnn/types.hpp"

namespace oracle {

struct Svd {
    mnn::Vector singular_values;  // descending, full min(n, m)
    mnn::Matrix left;
    mnn::Matrix right;
};

inline Svd oracle_svd(mnn::Matrix a) {
    using mnn::Index;
    bool transposed = false;
    if (a.rows() < a.cols()) {
        a.transposeInPlace();
        transposed = true;
    }
    const Index m = a.cols();
    mnn::Matrix v = mnn::Matrix::Identity(m, m);

    const double tol = 1e-15;
    for (int sweep = 0; sweep < 128; ++sweep) {
        double worst = 0.0;
        for (Index p = 0; p < m - 1; ++p) {
            for (Index q = p + 1; q < m; ++q) {
                const double app = a.col(p).squaredNorm();
                const double aqq = a.col(q).squaredNorm();
                const double apq = a.col(p).dot(a.col(q));
                const double denom = std::sqrt(app * aqq);
                if (denom <= 0.0) continue;
                worst = std::max(worst, std::abs(apq) / denom);
                if (std::abs(apq) <= tol * denom) continue;

                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Index i = 0; i < a.rows(); ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (Index i = 0; i < m; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (worst < 1e-14) break;
    }

    std::vector<Index> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> norms(m);
    for (Index j = 0; j < m; ++j) norms[j] = a.col(j).norm();
    std::sort(order.begin(), order.end(), [&](Index x, Index y) { return norms[x] > norms[y]; });

    Svd out;
    out.singular_values.resize(m);
    out.left.resize(a.rows(), m);
    out.right.resize(m, m);
    for (Index j = 0; j < m; ++j) {
        const Index src = order[j];
        out.singular_values[j] = norms[src];
        out.left.col(j) = norms[src] > 1e-300 ? (a.col(src) / norms[src]).eval()
                                              : mnn::Vector::Zero(a.rows()).eval();
        out.right.col(j) = v.col(src);
    }
    if (transposed) std::swap(out.left, out.right);
    return out;
}

}  // namespace oracle
