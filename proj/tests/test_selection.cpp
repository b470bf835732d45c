#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"

#include "crl/rng.hpp"
#include "crl/selection.hpp"
#include "crl/solver.hpp"

using namespace crl;

namespace {

Mat random_orthonormal(int m, int r, Rng& rng) {
    Eigen::HouseholderQR<Mat> qr(rng.normal_matrix(m, r));
    return qr.householderQ() * Mat::Identity(m, r);
}

// Dataset with known residual: Y = X B + E, ||E||^2 hand-picked.
struct KnownRss {
    Dataset d;
    Mat B;
};

KnownRss make_known_rss() {
    Rng rng(61);
    const int n = 30, p = 4, m = 2;
    const Mat X = rng.normal_matrix(n, p);
    const Mat B = Mat::Ones(p, m);             // q = 1 distinct row, rank 1
    Mat E = Mat::Zero(n, m);
    E(0, 0) = std::sqrt(5.1);                  // ||E||^2 = 5.1 exactly
    return KnownRss{Dataset(X * B + E, X, LossKind::Quadratic), B};
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("penalty formula at hand-computed points") {
    // (min(q, rank_x) + m) r + (p - q) ln q
    CHECK(penalty_po(1, 1, 5, 3, 5) == doctest::Approx(4.0));
    CHECK(penalty_po(10, 5, 50, 25, 50) ==
          doctest::Approx(175.0 + 40.0 * std::log(10.0)).epsilon(1e-12));
    CHECK(penalty_po(10, 5, 50, 25, 50) == doctest::Approx(267.10340372392821).epsilon(1e-10));
    CHECK(penalty_po(2, 0, 4, 3, 4) == doctest::Approx(2.0 * std::log(2.0)));  // r = 0 allowed
    CHECK_THROWS_AS(penalty_po(0, 1, 5, 3, 5), ConfigError);
    CHECK_THROWS_AS(penalty_po(6, 1, 5, 3, 5), ConfigError);      // q > p
    CHECK_THROWS_AS(penalty_po(2, 4, 5, 3, 5), ConfigError);      // r > min(q, m)
}

TEST_CASE("plug-in criterion equals loss plus scaled penalty") {
    const KnownRss k = make_known_rss();
    // l0 = rss / 2 = 2.55; P_o(1,1) with p=4, m=2, rank_x=4 is (1+2)*1 = 3; A=2, sigma2=1
    const double score = pic_score(k.d, CoefficientMatrix(k.B), PicVariant::plug_in(1.0));
    CHECK(score == doctest::Approx(2.55 + 6.0).epsilon(1e-12));
    // doubling sigma2 doubles only the penalty part
    const double score2 = pic_score(k.d, CoefficientMatrix(k.B), PicVariant::plug_in(2.0));
    CHECK(score2 - score == doctest::Approx(6.0).epsilon(1e-10));
}

TEST_CASE("fractional criterion at a hand value and its elimination branch") {
    const KnownRss k = make_known_rss();
    // unhalved rss = 5.1; denominator = 60 - 3*(1+2)*1 - 2.5*(4-1)*ln 1 = 51
    const auto score = sf_pic_fractional(k.d, CoefficientMatrix(k.B));
    REQUIRE(score.has_value());
    CHECK(*score == doctest::Approx(0.1).epsilon(1e-12));

    // mn = 4 cannot pay for q = 2, r = 2: denominator goes nonpositive
    Mat Y2 = Mat::Identity(2, 2);
    Mat B2(2, 2);
    B2 << 0.5, 0.0, 0.0, 0.5;
    const Dataset d2(Y2, Mat::Identity(2, 2), LossKind::Quadratic);
    CHECK_FALSE(sf_pic_fractional(d2, CoefficientMatrix(B2)).has_value());
}

TEST_CASE("general scale-free criterion inflates the conjugate gap") {
    const KnownRss k = make_known_rss();
    // gap = rss/2 = 2.55; delta = A P_o / (mn) = 2*3/60 = 0.1, score = 2.55/0.9
    const auto score = sf_pic_general(k.d, CoefficientMatrix(k.B), PicVariant::general(2.0, 4.0));
    REQUIRE(score.has_value());
    CHECK(*score == doctest::Approx(2.55 / 0.9).epsilon(1e-12));

    Mat Y2 = Mat::Identity(2, 2);
    Mat B2(2, 2);
    B2 << 0.5, 0.0, 0.0, 0.5;
    const Dataset d2(Y2, Mat::Identity(2, 2), LossKind::Quadratic);
    // delta = 2 * P_o(2,2) / 4 = 2*8/4 = 4 >= 1
    CHECK_FALSE(sf_pic_general(d2, CoefficientMatrix(B2), PicVariant::general(2.0, 4.0)).has_value());
    CHECK_THROWS_AS(sf_pic_general(k.d, CoefficientMatrix(k.B), PicVariant::general(4.0, 2.0)), ConfigError);
}

TEST_CASE("log-form criterion hand value and sentinels") {
    // n ln(rss) + A1 p q + A2 (n - q) ln q with defaults A1 = 1.5, A2 = 1.1
    const double rss = std::exp(2.0);
    const double got = sf_pic_log(rss, 10, 4, 2);
    CHECK(got == doctest::Approx(20.0 + 12.0 + 8.8 * std::log(2.0)).epsilon(1e-12));
    CHECK(got == doctest::Approx(38.099695188927519).epsilon(1e-12));
    CHECK(sf_pic_log(0.0, 10, 4, 2) == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(sf_pic_log(-1.0, 10, 4, 2), DomainError);
    CHECK_THROWS_AS(sf_pic_log(1.0, 10, 4, 0), ConfigError);
}

TEST_CASE("noise variance plug-ins per loss family") {
    Rng rng(62);
    // quadratic: near zero on a noiseless low-rank model
    const int n = 60, p = 6, m = 4, r = 2;
    const Mat S = rng.normal_matrix(p, r);
    const Mat V = random_orthonormal(m, r, rng);
    const Mat X = rng.normal_matrix(n, p);
    const Dataset clean(X * (S * V.transpose()), X, LossKind::Quadratic);
    CHECK(estimate_sigma2(clean, r) < 1e-12);

    // known-variance noise recovered to first order
    const Mat E = rng.normal_matrix(n, m);
    const Dataset noisy(clean.Y + 0.5 * E, X, LossKind::Quadratic);
    const double s2 = estimate_sigma2(noisy, r);
    CHECK(s2 > 0.05);
    CHECK(s2 < 0.6);

    Mat Yb(4, 2);
    Yb << 0, 1, 1, 0, 1, 1, 0, 0;
    const Dataset db(Yb, rng.normal_matrix(4, 3), LossKind::Logistic);
    CHECK(estimate_sigma2(db, 1) == doctest::Approx(0.25));

    Mat Yp(5, 2);
    Yp << 1, 0, 2, 3, 0, 1, 4, 2, 1, 1;
    const Dataset dp(Yp, rng.normal_matrix(5, 3), LossKind::Poisson);
    const double disp = estimate_sigma2(dp, 1);
    CHECK(std::isfinite(disp));
    CHECK(disp > 0.0);
}

TEST_CASE("grid search recovers planted structure and is thread-invariant") {
    Rng rng(63);
    const int n = 80, p = 10, m = 6, q_star = 4, r_star = 2;
    const Mat mu = 4.0 * rng.normal_matrix(q_star, r_star);
    Mat S(p, r_star);
    for (int j = 0; j < p; ++j) S.row(j) = mu.row(j % q_star);
    const Mat V = random_orthonormal(m, r_star, rng);
    const Mat X = rng.normal_matrix(n, p) / std::sqrt(static_cast<double>(p));
    const Dataset d(X * (S * V.transpose()), X, LossKind::Quadratic);

    FitConfig base;
    base.fit_intercept = false;
    base.seed = 19;
    const std::vector<int> qs{2, 3, 4, 5, 6};
    const std::vector<int> rs{1, 2, 3};
    const PicVariant crit = PicVariant::plug_in(1.0);
    const SelectionReport rep = select_over_grid(d, qs, rs, base, crit, 1);
    CHECK(rep.q_best == q_star);
    CHECK(rep.r_best == r_star);
    // feasible row-wise pairs only: r <= q prunes (q=2, r=3)
    std::size_t feasible = 0;
    for (int qv : qs)
        for (int rv : rs)
            if (rv <= qv) ++feasible;
    CHECK(rep.candidates.size() == feasible);
    for (const auto& row : rep.candidates) {
        CHECK_FALSE(row.eliminated);
        CHECK(std::isfinite(row.score));
    }

    const SelectionReport rep4 = select_over_grid(d, qs, rs, base, crit, 4);
    REQUIRE(rep4.candidates.size() == rep.candidates.size());
    CHECK(rep4.q_best == rep.q_best);
    CHECK(rep4.r_best == rep.r_best);
    for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
        CHECK(rep4.candidates[i].q == rep.candidates[i].q);
        CHECK(rep4.candidates[i].r == rep.candidates[i].r);
        CHECK(rep4.candidates[i].score == rep.candidates[i].score);
    }
}

TEST_CASE("row-wise infeasible grid points are dropped, not fitted") {
    Rng rng(64);
    const Mat X = rng.normal_matrix(30, 5);
    const Mat Y = rng.normal_matrix(30, 4);
    const Dataset d(Y, X, LossKind::Quadratic);
    FitConfig base;
    base.fit_intercept = false;
    const SelectionReport rep =
        select_over_grid(d, {1, 2}, {1, 2}, base, PicVariant::fractional(), 1);
    // (q=1, r=2) violates r <= q under the row-wise constraint
    CHECK(rep.candidates.size() == 3);
    for (const auto& row : rep.candidates) CHECK(row.r <= row.q);
}

TEST_CASE("fractional grid search on noisy data returns a winner with statuses") {
    Rng rng(65);
    const int n = 120, p = 8, m = 5;
    const Mat mu = 3.0 * rng.normal_matrix(3, 2);
    Mat S(p, 2);
    for (int j = 0; j < p; ++j) S.row(j) = mu.row(j % 3);
    const Mat V = random_orthonormal(m, 2, rng);
    const Mat X = rng.normal_matrix(n, p) / std::sqrt(static_cast<double>(p));
    const Dataset d(X * (S * V.transpose()) + 0.1 * rng.normal_matrix(n, m), X,
                    LossKind::Quadratic);
    FitConfig base;
    base.fit_intercept = false;
    base.seed = 7;
    const SelectionReport rep =
        select_over_grid(d, {2, 3, 4}, {1, 2, 3}, base, PicVariant::fractional(), 2);
    CHECK(rep.q_best >= 2);
    bool winner_seen = false;
    for (const auto& row : rep.candidates)
        if (row.q == rep.q_best && row.r == rep.r_best) {
            winner_seen = true;
            CHECK_FALSE(row.eliminated);
        }
    CHECK(winner_seen);
}

TEST_CASE("non-quadratic losses reject quadratic-only criteria") {
    Rng rng(66);
    Mat Yb = Mat::Zero(20, 3);
    for (Eigen::Index i = 0; i < Yb.size(); ++i)
        Yb(i % 20, i / 20) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const Dataset d(Yb, rng.normal_matrix(20, 4), LossKind::Logistic);
    FitConfig base;
    CHECK_THROWS_AS(select_over_grid(d, {1, 2}, {1}, base, PicVariant::fractional(), 1),
                    ConfigError);
    CHECK_THROWS_AS(sf_pic_fractional(d, CoefficientMatrix(Mat::Zero(4, 3))), ConfigError);
}

TEST_CASE("criterion name round-trip") {
    for (PicKind k : {PicKind::PlugIn, PicKind::ScaleFreeFractional, PicKind::ScaleFreeGeneral,
                      PicKind::LogForm})
        CHECK(pic_kind_from_name(pic_kind_name(k)) == k);
    CHECK_THROWS_AS(pic_kind_from_name("aic"), ConfigError);
}

}  // TEST_SUITE
