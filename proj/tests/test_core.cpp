#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"

#include "crl/core.hpp"
#include "crl/rng.hpp"

using namespace crl;

namespace {

// Index-by-index oracle for B = S V^T + nothing else: b_jk = sum_l S(j,l) V(k,l).
Mat compose_oracle(const Mat& S, const Mat& V) {
    Mat B = Mat::Zero(S.rows(), V.rows());
    for (Eigen::Index j = 0; j < S.rows(); ++j)
        for (Eigen::Index k = 0; k < V.rows(); ++k)
            for (Eigen::Index l = 0; l < S.cols(); ++l) B(j, k) += S(j, l) * V(k, l);
    return B;
}

// Random m x r orthonormal frame via QR of a Gaussian matrix.
Mat random_orthonormal(int m, int r, Rng& rng) {
    const Mat G = rng.normal_matrix(m, r);
    Eigen::HouseholderQR<Mat> qr(G);
    Mat Q = qr.householderQ() * Mat::Identity(m, r);
    return Q;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("loss names round-trip") {
    for (LossKind k : {LossKind::Quadratic, LossKind::Logistic, LossKind::Poisson})
        CHECK(loss_from_name(loss_name(k)) == k);
    CHECK_THROWS_AS(loss_from_name("gamma"), ConfigError);
}

TEST_CASE("compose matches the elementwise oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 1 + static_cast<int>(rng.below(7));
        const int m = 2 + static_cast<int>(rng.below(6));
        const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(p, m))));
        const Mat S = rng.normal_matrix(p, r);
        const Mat V = random_orthonormal(m, r, rng);
        const Factorization f(S, V, Vec::Zero(m));
        const Mat B = compose_coefficients(f).B;
        CHECK((B - compose_oracle(S, V)).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("factorization validates orthonormality and shapes") {
    Mat S = Mat::Ones(3, 2);
    Mat V = Mat::Identity(4, 2);
    CHECK_NOTHROW(Factorization(S, V, Vec::Zero(4)));
    CHECK_THROWS_AS(Factorization(S, 2.0 * V, Vec::Zero(4)), StructuralError);
    CHECK_THROWS_AS(Factorization(S, V, Vec::Zero(3)), StructuralError);
    CHECK_THROWS_AS(Factorization(Mat::Ones(1, 2), Mat::Identity(4, 2), Vec::Zero(4)),
                    StructuralError);
}

TEST_CASE("dataset validation") {
    CHECK_THROWS_AS(Dataset(Mat::Zero(3, 2), Mat::Zero(4, 2), LossKind::Quadratic),
                    StructuralError);
    Mat bad = Mat::Zero(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(Dataset(bad, Mat::Zero(2, 2), LossKind::Quadratic), StructuralError);
    Mat Yneg = Mat::Constant(2, 2, -1.0);
    CHECK_THROWS_AS(Dataset(Yneg, Mat::Zero(2, 2), LossKind::Poisson), DomainError);
    Mat Ybig = Mat::Constant(2, 2, 1.5);
    CHECK_THROWS_AS(Dataset(Ybig, Mat::Zero(2, 2), LossKind::Logistic), DomainError);
}

TEST_CASE("cluster structure expands by exact row copies") {
    Mat mu(2, 3);
    mu << 1.0, 2.0, 3.0, -1.0, 0.5, 0.25;
    const ClusterStructure cs({1, 2, 1, 1, 2}, mu);
    const Mat S = cs.expand();
    REQUIRE(S.rows() == 5);
    for (int j = 0; j < 5; ++j) CHECK((S.row(j) - mu.row(cs.assign[j] - 1)).norm() == 0.0);
    CHECK_THROWS_AS(ClusterStructure({1, 3}, mu), StructuralError);   // label out of range
    CHECK_THROWS_AS(ClusterStructure({1, 1}, mu), StructuralError);   // cluster 2 empty
}

TEST_CASE("distinct rows under exact and tolerant equality") {
    Mat B(4, 2);
    B << 1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0 + 1e-13;
    CHECK(distinct_row_count(B, 0.0) == 3);
    CHECK(distinct_row_count(B, 1e-12) == 2);
    CHECK(distinct_row_count(B) == 2);                 // default 1e-12 * max|B|
    CHECK(distinct_row_count(Mat::Zero(5, 3), 0.0) == 1);

    // Transitive chaining: rows 0.0, 0.9 tol, 1.8 tol pairwise-link into one class.
    Mat C(3, 1);
    C << 0.0, 0.9, 1.8;
    CHECK(distinct_row_count(C, 1.0) == 1);
    CHECK(distinct_row_count(C, 0.5) == 3);
}

TEST_CASE("numerical rank") {
    Rng rng(7);
    const Mat A = rng.normal_matrix(6, 3);
    const Mat B = A * rng.normal_matrix(3, 5);         // rank 3 by construction a.s.
    CHECK(numerical_rank(B) == 3);
    CHECK(numerical_rank(Mat::Zero(4, 4)) == 0);
    CHECK(numerical_rank(Mat::Identity(4, 4)) == 4);
    CHECK_THROWS_AS(numerical_rank(B, 2.0), ConfigError);
}

TEST_CASE("column standardization centers and scales") {
    Rng rng(3);
    Mat X = rng.normal_matrix(40, 3);
    X.col(1) *= 10.0;
    X.col(2).setConstant(4.0);                         // constant column stays at zero
    const Mat Y = rng.normal_matrix(40, 2);
    const Dataset d(Y, X, LossKind::Quadratic);
    const Dataset z = standardize_columns(d, true, true);
    CHECK(z.centered);
    CHECK(z.standardized);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(z.X.col(j).mean()) < 1e-12);
    for (int j = 0; j < 2; ++j) {
        const double sd = std::sqrt(z.X.col(j).squaredNorm() / (z.X.rows() - 1));
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(z.X.col(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(z.Y.col(0).mean()) < 1e-12);
}

}  // TEST_SUITE
