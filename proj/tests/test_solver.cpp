#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"

#include "crl/losses.hpp"
#include "crl/metrics.hpp"
#include "crl/rng.hpp"
#include "crl/solver.hpp"

using namespace crl;

namespace {

Mat random_orthonormal(int m, int r, Rng& rng) {
    Eigen::HouseholderQR<Mat> qr(rng.normal_matrix(m, r));
    return qr.householderQ() * Mat::Identity(m, r);
}

// Planted instance: S* has exactly q distinct rows, B* = S* V*^T, Y = X B* + noise.
struct Planted {
    Dataset d;
    Mat B_star;
    std::vector<int> labels;
};

Planted make_planted(int n, int p, int m, int q, int r, double noise_sd, std::uint64_t seed) {
    Rng rng(seed);
    const Mat mu = 4.0 * rng.normal_matrix(q, r);
    std::vector<int> labels(static_cast<std::size_t>(p));
    Mat S(p, r);
    for (int j = 0; j < p; ++j) {
        labels[static_cast<std::size_t>(j)] = (j % q) + 1;
        S.row(j) = mu.row(j % q);
    }
    const Mat V = random_orthonormal(m, r, rng);
    const Mat B = S * V.transpose();
    const Mat X = rng.normal_matrix(n, p) / std::sqrt(static_cast<double>(p));
    Mat Y = X * B;
    if (noise_sd > 0.0) Y += noise_sd * rng.normal_matrix(n, m);
    return Planted{Dataset(Y, X, LossKind::Quadratic), B, labels};
}

bool trace_nonincreasing(const std::vector<double>& tr, double tol) {
    for (std::size_t i = 1; i < tr.size(); ++i)
        if (tr[i] > tr[i - 1] + tol) return false;
    return true;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("procrustes maximizes the trace inner product over random rotations") {
    Rng rng(41);
    for (int t = 0; t < 25; ++t) {
        const int m = 3 + static_cast<int>(rng.below(5));
        const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
        const Mat W = rng.normal_matrix(m, r);
        const Mat V = procrustes_rotation(W);
        REQUIRE(V.rows() == m);
        REQUIRE(V.cols() == r);
        CHECK((V.transpose() * V - Mat::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-10);
        const double star = (W.transpose() * V).trace();
        for (int s = 0; s < 60; ++s) {
            const Mat Q = random_orthonormal(m, r, rng);
            CHECK(star >= (W.transpose() * Q).trace() - 1e-9);
        }
    }
}

TEST_CASE("procrustes handles rank-deficient and zero inputs") {
    Mat W = Mat::Zero(4, 2);
    const Mat V0 = procrustes_rotation(W);
    CHECK((V0.transpose() * V0 - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    W.col(0) = Vec::Ones(4);           // rank 1, two columns
    const Mat V1 = procrustes_rotation(W);
    CHECK((V1.transpose() * V1 - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((W.transpose() * V1).trace() >= (W.transpose() * V0).trace() - 1e-12);
}

TEST_CASE("objective equals the loss at the composed predictor") {
    Rng rng(42);
    const int n = 12, p = 5, m = 4, r = 2;
    const Mat X = rng.normal_matrix(n, p);
    const Mat Y = rng.normal_matrix(n, m);
    const Mat S = rng.normal_matrix(p, r);
    const Mat V = random_orthonormal(m, r, rng);
    Vec alpha(m);
    for (int j = 0; j < m; ++j) alpha(j) = rng.normal();
    const Factorization f(S, V, alpha);
    const Dataset d(Y, X, LossKind::Quadratic);
    const Mat Eta = (X * (S * V.transpose())).rowwise() + alpha.transpose();
    CHECK(objective_value(d, f) == doctest::Approx(loss_value(d.loss, Eta, Y)).epsilon(1e-13));
}

TEST_CASE("pseudo response and intercept step match the hand formulas") {
    Rng rng(43);
    const int n = 9, p = 4, m = 3, r = 2;
    const Mat X = rng.normal_matrix(n, p);
    const Mat Y = rng.normal_matrix(n, m);
    const Mat S = rng.normal_matrix(p, r);
    const Mat V = random_orthonormal(m, r, rng);
    Vec alpha(m);
    for (int j = 0; j < m; ++j) alpha(j) = rng.normal();
    const Factorization f(S, V, alpha);
    const Dataset d(Y, X, LossKind::Quadratic);
    const double rho = 3.5;
    const Mat B = S * V.transpose();
    const Mat G = ((X * B).rowwise() + alpha.transpose()) - Y;   // quadratic gradient Eta - Y
    const Mat expect = B - X.transpose() * G / rho;
    CHECK((pseudo_response(d, f, rho) - expect).cwiseAbs().maxCoeff() < 1e-12);
    const Vec aexp = alpha - G.colwise().sum().transpose() / rho;
    CHECK((intercept_step(d, f, rho) - aexp).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("descent traces are monotone for every loss family") {
    Rng rng(44);
    for (LossKind kind : {LossKind::Quadratic, LossKind::Logistic, LossKind::Poisson}) {
        for (int t = 0; t < 6; ++t) {
            const int n = 40, p = 8, m = 5;
            const Mat X = rng.normal_matrix(n, p) / 3.0;
            Mat Y(n, m);
            for (Eigen::Index i = 0; i < Y.rows(); ++i)
                for (Eigen::Index j = 0; j < Y.cols(); ++j) {
                    switch (kind) {
                        case LossKind::Quadratic: Y(i, j) = rng.normal(); break;
                        case LossKind::Logistic: Y(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0; break;
                        case LossKind::Poisson: Y(i, j) = static_cast<double>(rng.below(4)); break;
                    }
                }
            const Dataset d(Y, X, kind);
            FitConfig cfg;
            cfg.q = 3;
            cfg.r = 2;
            cfg.max_outer = 60;
            cfg.seed = 17 + static_cast<std::uint64_t>(t);
            const FitResult res = fit(d, cfg);
            CHECK(trace_nonincreasing(res.objective_trace, 1e-9));
            CHECK(res.objective_trace.size() >= 2);
        }
    }
}

TEST_CASE("noiseless planted model is recovered exactly at the true budgets") {
    const Planted pl = make_planted(120, 12, 8, 4, 2, 0.0, 91);
    FitConfig cfg;
    cfg.q = 4;
    cfg.r = 2;
    cfg.fit_intercept = false;
    cfg.seed = 5;
    const FitResult res = fit(pl.d, cfg);
    const Mat B = res.factorization.S * res.factorization.V.transpose();
    CHECK((B - pl.B_star).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(res.objective_trace.back() < 1e-8);
    CHECK(res.q_eff == 4);
    CHECK(res.r_eff == 2);
    CHECK(clustering_accuracy(LabelPair(pl.labels, res.clusters.assign)) == doctest::Approx(1.0));
}

TEST_CASE("structural budgets hold on the returned factorization") {
    const Planted pl = make_planted(60, 10, 6, 3, 2, 0.3, 92);
    FitConfig cfg;
    cfg.q = 5;
    cfg.r = 3;
    cfg.seed = 2;
    const FitResult res = fit(pl.d, cfg);
    CHECK(res.q_eff <= 5);
    CHECK(res.r_eff <= 3);
    CHECK(distinct_row_count(res.factorization.S, 0.0) == res.q_eff);
    const Mat VtV = res.factorization.V.transpose() * res.factorization.V;
    CHECK((VtV - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    // S rows are exact copies of centroid rows
    const Mat S2 = res.clusters.expand();
    CHECK((S2 - res.factorization.S).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unconstrained budgets reach the least-squares optimum") {
    Rng rng(45);
    const int n = 50, p = 4, m = 3;
    const Mat X = rng.normal_matrix(n, p);
    const Mat Y = rng.normal_matrix(n, m);
    const Dataset d(Y, X, LossKind::Quadratic);
    const Mat B_ols = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
    const double f_ols = 0.5 * (Y - X * B_ols).squaredNorm();
    FitConfig cfg;
    cfg.q = p;
    cfg.r = m;
    cfg.fit_intercept = false;
    cfg.eps = 1e-9;
    cfg.max_outer = 2000;
    const FitResult res = fit(d, cfg);
    CHECK(res.objective_trace.back() <= f_ols * (1.0 + 1e-5) + 1e-8);
}

TEST_CASE("intercept fit recovers a pure mean shift") {
    Rng rng(46);
    const int n = 80, p = 6, m = 4;
    const Mat X = rng.normal_matrix(n, p);
    Vec alpha(m);
    for (int j = 0; j < m; ++j) alpha(j) = rng.normal(0.0, 2.0);
    const Planted pl = make_planted(n, p, m, 3, 2, 0.0, 93);
    Mat Y = pl.d.Y.rowwise() + alpha.transpose();
    const Dataset d(Y, pl.d.X, LossKind::Quadratic);
    FitConfig cfg;
    cfg.q = 3;
    cfg.r = 2;
    const FitResult res = fit(d, cfg);
    CHECK(res.objective_trace.back() < 1e-6);
    CHECK((res.factorization.alpha - alpha).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("conservative stepsize policy also descends and converges") {
    const Planted pl = make_planted(80, 10, 6, 3, 2, 0.2, 94);
    FitConfig cfg;
    cfg.q = 3;
    cfg.r = 2;
    cfg.rho_policy = RhoPolicy::Conservative;
    const FitResult res = fit(pl.d, cfg);
    CHECK(trace_nonincreasing(res.objective_trace, 1e-9));
    CHECK(res.converged);
    CHECK_THROWS_AS([&] {
        FitConfig bad = cfg;
        Dataset dp(pl.d.Y.cwiseAbs(), pl.d.X, LossKind::Poisson);
        bad.rho_policy = RhoPolicy::Conservative;
        fit(dp, bad);
    }(), ConfigError);   // no global curvature bound for counts
}

TEST_CASE("debug checks pass on full runs") {
    const Planted pl = make_planted(50, 9, 5, 3, 2, 0.5, 95);
    FitConfig cfg;
    cfg.q = 3;
    cfg.r = 2;
    cfg.debug_checks = true;
    CHECK_NOTHROW(fit(pl.d, cfg));
}

TEST_CASE("rank-wise variant quantizes each column of S") {
    const Planted pl = make_planted(70, 10, 6, 3, 2, 0.4, 96);
    FitConfig cfg;
    cfg.q = 3;
    cfg.r = 2;
    cfg.variant = Variant::RankWise;
    const FitResult res = fit(pl.d, cfg);
    for (Eigen::Index j = 0; j < res.factorization.S.cols(); ++j) {
        std::set<double> levels;
        for (Eigen::Index i = 0; i < res.factorization.S.rows(); ++i)
            levels.insert(res.factorization.S(i, j));
        CHECK(static_cast<int>(levels.size()) <= 3);
    }
    CHECK(trace_nonincreasing(res.objective_trace, 1e-9));
}

TEST_CASE("configuration validation") {
    const Planted pl = make_planted(20, 5, 4, 2, 2, 0.1, 97);
    FitConfig cfg;
    cfg.q = 6;                          // q > p
    cfg.r = 2;
    CHECK_THROWS_AS(fit(pl.d, cfg), ConfigError);
    cfg.q = 2;
    cfg.r = 5;                          // r > min(m, p)
    CHECK_THROWS_AS(fit(pl.d, cfg), ConfigError);
    cfg.r = 3;                          // row-wise needs q >= r
    CHECK_THROWS_AS(fit(pl.d, cfg), ConfigError);
    cfg.r = 2;
    cfg.grow = 0.5;
    CHECK_THROWS_AS(fit(pl.d, cfg), ConfigError);
}

TEST_CASE("reduced-rank pieces match the closed form") {
    Rng rng(47);
    const int n = 40, p = 6, m = 5;
    const Mat X = rng.normal_matrix(n, p);
    const Mat Y = rng.normal_matrix(n, m);
    const Dataset d(Y, X, LossKind::Quadratic);
    const Mat B_ols = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
    for (int r = 1; r <= 3; ++r) {
        const RrrParts parts = rrr_components(d, r);
        CHECK((parts.B_ols - B_ols).cwiseAbs().maxCoeff() < 1e-9);
        // oracle: leading right singular vectors of the fitted values
        Eigen::BDCSVD<Mat> svd(X * B_ols, Eigen::ComputeThinV);
        const Mat Vr = svd.matrixV().leftCols(r);
        const Mat proj_oracle = Vr * Vr.transpose();
        const Mat proj = parts.V_r * parts.V_r.transpose();
        CHECK((proj - proj_oracle).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((parts.B_rrr - B_ols * proj_oracle).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(numerical_rank(parts.B_rrr) == r);
    }
}

TEST_CASE("reduced-rank fit error never beats but tracks OLS as r grows") {
    Rng rng(48);
    const int n = 50, p = 5, m = 4;
    const Mat X = rng.normal_matrix(n, p);
    const Mat Y = rng.normal_matrix(n, m);
    const Dataset d(Y, X, LossKind::Quadratic);
    double prev = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= 4; ++r) {
        const RrrParts parts = rrr_components(d, r);
        const double rss = (Y - X * parts.B_rrr).squaredNorm();
        CHECK(rss <= prev + 1e-9);      // nested models improve monotonically
        prev = rss;
    }
}

TEST_CASE("weighted fit with the identity weight matches the plain fit") {
    const Planted pl = make_planted(60, 8, 5, 3, 2, 0.3, 98);
    FitConfig cfg;
    cfg.q = 3;
    cfg.r = 2;
    cfg.fit_intercept = false;
    cfg.seed = 4;
    const WeightedFitResult wr = fit_weighted(pl.d, Mat::Identity(5, 5), cfg);
    const FitResult plain = fit(pl.d, cfg);
    CHECK((wr.B_original - wr.B_whitened).cwiseAbs().maxCoeff() == 0.0);
    const Mat Bp = plain.factorization.S * plain.factorization.V.transpose();
    CHECK((wr.B_original - Bp).cwiseAbs().maxCoeff() < 1e-8);

    Mat bad = Mat::Identity(5, 5);
    bad(0, 1) = 0.5;                    // asymmetric
    CHECK_THROWS(fit_weighted(pl.d, bad, cfg));
    Mat neg = Mat::Identity(5, 5);
    neg(0, 0) = -1.0;                   // not PSD
    CHECK_THROWS(fit_weighted(pl.d, neg, cfg));
}

TEST_CASE("weighted fit maps back through the weight square root") {
    Rng rng(49);
    const Planted pl = make_planted(60, 8, 5, 3, 2, 0.3, 99);
    Mat A = rng.normal_matrix(5, 5);
    const Mat Gamma = A * A.transpose() + 0.5 * Mat::Identity(5, 5);
    FitConfig cfg;
    cfg.q = 3;
    cfg.r = 2;
    cfg.fit_intercept = false;
    const WeightedFitResult wr = fit_weighted(pl.d, Gamma, cfg);
    Eigen::SelfAdjointEigenSolver<Mat> es(Gamma);
    const Mat half = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                     es.eigenvectors().transpose();
    CHECK((wr.B_original - wr.B_whitened * half).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("unsupervised fit clusters well-separated rows perfectly") {
    Rng rng(50);
    const int q = 3, m = 6, per = 15;
    const Mat centers = 20.0 * rng.normal_matrix(q, m);
    Mat Y(q * per, m);
    std::vector<int> truth(static_cast<std::size_t>(q * per));
    for (int i = 0; i < q * per; ++i) {
        Y.row(i) = centers.row(i % q) + rng.normal_matrix(1, m);
        truth[static_cast<std::size_t>(i)] = (i % q) + 1;
    }
    FitConfig cfg;
    cfg.q = q;
    cfg.r = q;
    cfg.seed = 8;
    const FitResult res = fit_unsupervised(Y, cfg);
    CHECK(clustering_accuracy(LabelPair(truth, res.clusters.assign)) == doctest::Approx(1.0));
    CHECK(trace_nonincreasing(res.objective_trace, 1e-9));
}

TEST_CASE("trace-regression segmentation recovers planted groups") {
    Rng rng(51);
    const int p = 4, q = 3, per = 25, n = q * per;
    const Mat groups = 6.0 * rng.normal_matrix(q, p);
    Mat X(n, p);
    Vec y(n);
    std::vector<int> truth(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        X.row(i) = rng.normal_matrix(1, p);
        y(i) = X.row(i).dot(groups.row(i % q));
        truth[static_cast<std::size_t>(i)] = (i % q) + 1;
    }
    const TraceProblem prob = build_trace_design(X, y);
    FitConfig cfg;
    cfg.seed = 3;
    const TraceFitResult res = fit_trace(prob, q, cfg);
    CHECK(clustering_accuracy(LabelPair(truth, res.labels)) == doctest::Approx(1.0));
    CHECK(res.residual_ss < 1e-6);
    CHECK(trace_nonincreasing(res.objective_trace, 1e-9));
    REQUIRE(res.group_coefs.rows() == q);
    // recovered group coefficients match the planted ones up to label permutation
    for (int k = 0; k < q; ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (int l = 0; l < q; ++l)
            best = std::min(best, (res.group_coefs.row(l) - groups.row(k)).norm());
        CHECK(best < 1e-3);
    }
}

TEST_CASE("segmentation edge cases: one segment, per-sample segments, two sub-models") {
    Rng rng(52);
    const int n = 24, p = 3;
    const Mat X = rng.normal_matrix(n, p);
    Vec beta(p);
    beta << 1.5, -2.0, 0.5;
    const Vec y = X * beta + 0.3 * rng.normal_matrix(n, 1);
    const TraceProblem prob = build_trace_design(X, y);
    FitConfig cfg;
    cfg.seed = 5;

    // q = 1 collapses to ordinary least squares on the pooled data
    const TraceFitResult one = fit_trace(prob, 1, cfg);
    const Vec ols = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK((one.group_coefs.row(0).transpose() - ols).norm() < 1e-8);

    // q = n interpolates every sample (each row of X is nonzero a.s.)
    const TraceFitResult full = fit_trace(prob, n, cfg);
    CHECK(full.residual_ss < 1e-8);

    // two planted sub-models with disjoint slopes, recovered exactly without noise
    Vec beta1(2), beta2(2);
    beta1 << 4.0, 0.0;
    beta2 << 0.0, -3.0;
    const Mat X2 = rng.normal_matrix(30, 2);
    Vec y2(30);
    std::vector<int> truth2(30);
    for (int i = 0; i < 30; ++i) {
        y2(i) = X2.row(i).dot(i < 15 ? beta1 : beta2);
        truth2[static_cast<std::size_t>(i)] = (i < 15) ? 1 : 2;
    }
    const TraceFitResult two = fit_trace(build_trace_design(X2, y2), 2, cfg);
    CHECK(clustering_accuracy(LabelPair(truth2, two.labels)) == doctest::Approx(1.0));
    CHECK(two.residual_ss < 1e-8);
}

TEST_CASE("warm start through an explicit initializer is honored") {
    const Planted pl = make_planted(60, 9, 6, 3, 2, 0.2, 100);
    FitConfig cfg;
    cfg.q = 3;
    cfg.r = 2;
    cfg.fit_intercept = false;
    const FitResult cold = fit(pl.d, cfg);
    const FitResult warm = fit(pl.d, cfg, cold.factorization);
    CHECK(warm.objective_trace.front() <=
          cold.objective_trace.back() * (1.0 + 1e-10) + 1e-12);
    CHECK(warm.objective_trace.back() <= cold.objective_trace.back() + 1e-9);
}

}  // TEST_SUITE
