#include <catch2/catch_amalgamated.hpp>

#include "mnn/spectral.hpp"

#include "oracle_svd.hpp"

using mnn::Index;
using mnn::Matrix;
using mnn::Vector;

namespace {

Matrix random_matrix(Index n, Index m, std::uint64_t seed) {
    mnn::Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix a(n, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < n; ++i) a(i, j) = gauss(rng);
    return a;
}

// Matrix with a prescribed spectrum, via QR-orthonormalized Gaussian factors.
Matrix matrix_with_spectrum(Index n, Index m, const Vector& sigma, std::uint64_t seed) {
    const Index k = sigma.size();
    Eigen::HouseholderQR<Matrix> qu(random_matrix(n, k, seed));
    Eigen::HouseholderQR<Matrix> qv(random_matrix(m, k, seed + 1));
    Matrix u = qu.householderQ() * Matrix::Identity(n, k);
    Matrix v = qv.householderQ() * Matrix::Identity(m, k);
    return u * sigma.asDiagonal() * v.transpose();
}

}  // namespace

TEST_CASE("identity matrix has unit singular values") {
    auto svd = mnn::truncated_svd(Matrix::Identity(3, 3), 1);
    REQUIRE(svd.singular_values[0] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rank-1 outer product: sigma = |a||b|, reconstruction exact") {
    Vector a(3), b(4);
    a << 2, 0, 0;
    b << 0, 3, 0, 0;
    Matrix m = a * b.transpose();
    auto svd = mnn::truncated_svd(m, 1);
    REQUIRE(svd.singular_values[0] == Catch::Approx(6.0).epsilon(1e-12));
    REQUIRE((mnn::low_rank_approx(svd) - m).norm() < 1e-10);
}

TEST_CASE("singular values match the dense Jacobi oracle") {
    Matrix m = random_matrix(6, 5, 42);
    auto svd = mnn::truncated_svd(m, 5);
    auto ref = oracle::oracle_svd(m);
    for (int i = 0; i < 5; ++i)
        REQUIRE(svd.singular_values[i] ==
                Catch::Approx(ref.singular_values[i]).epsilon(1e-8).margin(1e-12));
}

TEST_CASE("low_rank_approx places sigma q w^T correctly") {
    mnn::TruncatedSVD svd;
    svd.singular_values = Vector::Constant(1, 2.0);
    svd.left = Matrix::Zero(3, 1);
    svd.left(0, 0) = 1.0;
    svd.right = Matrix::Zero(3, 1);
    svd.right(1, 0) = 1.0;
    Matrix m = mnn::low_rank_approx(svd);
    REQUIRE(m(0, 1) == 2.0);
    REQUIRE(m.norm() == Catch::Approx(2.0));
}

TEST_CASE("full-rank decomposition reconstructs the input") {
    Matrix m = random_matrix(7, 5, 7);
    auto svd = mnn::truncated_svd(m, 5);
    REQUIRE((mnn::low_rank_approx(svd) - m).norm() < 1e-8);
}

TEST_CASE("Eckart-Young: truncation error equals the dropped tail") {
    Matrix m = random_matrix(8, 6, 99);
    auto ref = oracle::oracle_svd(m);
    auto svd = mnn::truncated_svd(m, 2);
    const double err = (mnn::low_rank_approx(svd) - m).norm();
    const double tail = ref.singular_values.tail(4).norm();
    REQUIRE(err == Catch::Approx(tail).epsilon(1e-8));
}

TEST_CASE("Eckart-Young holds on random matrices", "[property]") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Matrix m = random_matrix(20 + 3 * seed, 15 + 2 * seed, seed * 31);
        auto ref = oracle::oracle_svd(m);
        const int k = 3 + static_cast<int>(seed % 4);
        auto svd = mnn::truncated_svd(m, k);
        const double err2 = (mnn::low_rank_approx(svd) - m).squaredNorm();
        const double tail2 = ref.singular_values.tail(ref.singular_values.size() - k).squaredNorm();
        REQUIRE(err2 == Catch::Approx(tail2).epsilon(1e-6).margin(1e-10));
    }
}

TEST_CASE("large-matrix subspace path matches a prescribed spectrum") {
    Vector sigma(8);
    sigma << 50, 40, 30, 20, 10, 1.0, 0.5, 0.25;
    Matrix m = matrix_with_spectrum(600, 540, sigma, 5);
    auto svd = mnn::truncated_svd(m, 5);
    for (int i = 0; i < 5; ++i)
        REQUIRE(svd.singular_values[i] == Catch::Approx(sigma[i]).epsilon(1e-8));
    const double err = (mnn::low_rank_approx(svd) - m).norm();
    REQUIRE(err == Catch::Approx(sigma.tail(3).norm()).epsilon(1e-6));
}

TEST_CASE("scale equivariance of singular values") {
    Matrix m = random_matrix(9, 9, 3);
    auto base = mnn::truncated_svd(m, 4);
    auto scaled = mnn::truncated_svd(3.7 * m, 4);
    for (int i = 0; i < 4; ++i)
        REQUIRE(scaled.singular_values[i] ==
                Catch::Approx(3.7 * base.singular_values[i]).epsilon(1e-9));
}

TEST_CASE("reconstruction is identical across repeated runs") {
    Matrix m = random_matrix(30, 25, 11);
    Matrix a = mnn::low_rank_approx(mnn::truncated_svd(m, 3));
    Matrix b = mnn::low_rank_approx(mnn::truncated_svd(m, 3));
    REQUIRE((a - b).norm() == 0.0);

    Matrix big = matrix_with_spectrum(560, 530, (Vector(4) << 9, 7, 5, 2).finished(), 21);
    Matrix c = mnn::low_rank_approx(mnn::truncated_svd(big, 3));
    Matrix d = mnn::low_rank_approx(mnn::truncated_svd(big, 3));
    REQUIRE((c - d).norm() == 0.0);
}

TEST_CASE("invalid rank or non-finite entries are rejected") {
    Matrix m = Matrix::Identity(4, 4);
    REQUIRE_THROWS_AS(mnn::truncated_svd(m, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(mnn::truncated_svd(m, 5), std::invalid_argument);
    m(1, 1) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(mnn::truncated_svd(m, 2), std::invalid_argument);
}

TEST_CASE("orthonormal factors within tolerance") {
    Matrix m = random_matrix(40, 30, 17);
    auto svd = mnn::truncated_svd(m, 6);
    Matrix gl = svd.left.transpose() * svd.left;
    Matrix gr = svd.right.transpose() * svd.right;
    REQUIRE((gl - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE((gr - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
    for (int i = 1; i < 6; ++i)
        REQUIRE(svd.singular_values[i] <= svd.singular_values[i - 1] + 1e-15);
}
