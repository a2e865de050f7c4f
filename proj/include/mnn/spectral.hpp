#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

#include "mnn/types.hpp"

namespace mnn {

/// The k leading singular triplets of a matrix: sigma_1 >= ... >= sigma_k >= 0
/// with column-orthonormal left/right vectors.
struct TruncatedSVD {
    Vector singular_values;  // length k, non-increasing
    Matrix left;             // n x k
    Matrix right;            // m x k

    int rank() const { return static_cast<int>(singular_values.size()); }
};

namespace detail {

// Dense exact decomposition, leading k triplets.
inline TruncatedSVD dense_truncated_svd(const Matrix& m, int k) {
    TruncatedSVD out;
    if (std::min(m.rows(), m.cols()) <= 32) {
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.singular_values = svd.singularValues().head(k);
        out.left = svd.matrixU().leftCols(k);
        out.right = svd.matrixV().leftCols(k);
    } else {
        Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.singular_values = svd.singularValues().head(k);
        out.left = svd.matrixU().leftCols(k);
        out.right = svd.matrixV().leftCols(k);
    }
    return out;
}

// Randomized block subspace iteration. Deterministic: the start block is
// drawn from a generator seeded only by the problem shape, and iteration
// stops when the leading k singular value estimates stabilize (relative
// change below 1e-12) or after 300 sweeps, whichever comes first.
inline TruncatedSVD subspace_truncated_svd(const Matrix& m, int k) {
    const Index nr = m.rows(), nc = m.cols();
    const Index block = std::min<Index>(k + 10, std::min(nr, nc));

    Rng rng(0x5eed0000u ^ (static_cast<std::uint64_t>(nr) << 20) ^
            (static_cast<std::uint64_t>(nc) << 4) ^ static_cast<std::uint64_t>(k));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix start(nc, block);
    for (Index j = 0; j < block; ++j)
        for (Index i = 0; i < nc; ++i) start(i, j) = gauss(rng);

    Eigen::HouseholderQR<Matrix> qr(m * start);
    Matrix q = qr.householderQ() * Matrix::Identity(nr, block);

    Vector prev = Vector::Zero(k);
    for (int iter = 0; iter < 300; ++iter) {
        Eigen::HouseholderQR<Matrix> qr_t(m.transpose() * q);
        Matrix qz = qr_t.householderQ() * Matrix::Identity(nc, block);
        Matrix y = m * qz;
        Eigen::HouseholderQR<Matrix> qr_y(y);
        q = qr_y.householderQ() * Matrix::Identity(nr, block);

        // Ritz estimates from the small projected factor.
        Matrix r = Matrix(qr_y.matrixQR().topRows(block).triangularView<Eigen::Upper>());
        Eigen::JacobiSVD<Matrix> small(r);
        Vector sigma = small.singularValues().head(k);
        double change = 0.0;
        for (int i = 0; i < k; ++i) {
            double scale = std::max(sigma[0], 1e-300);
            change = std::max(change, std::abs(sigma[i] - prev[i]) / scale);
        }
        prev = sigma;
        if (iter > 0 && change < 1e-12) break;
    }

    // Project once more and take the exact SVD of the small factor.
    Matrix b = q.transpose() * m;  // block x nc
    Eigen::JacobiSVD<Matrix> small(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    TruncatedSVD out;
    out.singular_values = small.singularValues().head(k);
    out.left = q * small.matrixU().leftCols(k);
    out.right = small.matrixV().leftCols(k);
    return out;
}

}  // namespace detail

/// Leading-k singular value decomposition of a dense matrix. Exact dense
/// decomposition for small inputs; randomized subspace iteration beyond
/// that. Output is deterministic for fixed input.
inline TruncatedSVD truncated_svd(const Matrix& m, int k) {
    const Index min_dim = std::min(m.rows(), m.cols());
    if (k < 1 || k > min_dim)
        throw std::invalid_argument("truncated_svd: rank k out of range");
    if (!m.allFinite())
        throw std::invalid_argument("truncated_svd: non-finite entries");
    if (min_dim <= 512 || 3 * static_cast<Index>(k) >= min_dim)
        return detail::dense_truncated_svd(m, k);
    return detail::subspace_truncated_svd(m, k);
}

/// Rank-k reconstruction sum_i sigma_i q_i w_i^T.
inline Matrix low_rank_approx(const TruncatedSVD& svd) {
    return svd.left * svd.singular_values.asDiagonal() * svd.right.transpose();
}

}  // namespace mnn
