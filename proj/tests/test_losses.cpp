#include <cmath>
#include <optional>

#include "doctest.h"

#include "crl/losses.hpp"
#include "crl/rng.hpp"

using namespace crl;

namespace {

// Elementwise scalar oracles, written against the formulas directly.
double quad_oracle(const Mat& Eta, const Mat& Y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
            const double d = Y(i, j) - Eta(i, j);
            s += 0.5 * d * d;
        }
    return s;
}

double logit_oracle(const Mat& Eta, const Mat& Y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
            const double eta = Eta(i, j);
            // log(1+e^eta) computed stably for the oracle too
            const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
            s += -Y(i, j) * eta + softplus;
        }
    return s;
}

double pois_oracle(const Mat& Eta, const Mat& Y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
            const double eta = std::min(Eta(i, j), 30.0);
            s += -Y(i, j) * Eta(i, j) + std::exp(eta);
        }
    return s;
}

Mat sample_y(LossKind kind, int n, int m, Rng& rng) {
    Mat Y(n, m);
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
            switch (kind) {
                case LossKind::Quadratic: Y(i, j) = rng.normal(); break;
                case LossKind::Logistic: Y(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0; break;
                case LossKind::Poisson: Y(i, j) = static_cast<double>(rng.below(6)); break;
            }
        }
    return Y;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("values match the scalar oracles") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat Eta = 3.0 * rng.normal_matrix(7, 4);
        for (LossKind kind : {LossKind::Quadratic, LossKind::Logistic, LossKind::Poisson}) {
            const Mat Y = sample_y(kind, 7, 4, rng);
            double expected = 0.0;
            switch (kind) {
                case LossKind::Quadratic: expected = quad_oracle(Eta, Y); break;
                case LossKind::Logistic: expected = logit_oracle(Eta, Y); break;
                case LossKind::Poisson: expected = pois_oracle(Eta, Y); break;
            }
            CHECK(loss_value(kind, Eta, Y) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("gradients agree with central finite differences") {
    Rng rng(22);
    const double h = 1e-6;
    for (LossKind kind : {LossKind::Quadratic, LossKind::Logistic, LossKind::Poisson}) {
        Mat Eta = rng.normal_matrix(5, 3);
        const Mat Y = sample_y(kind, 5, 3, rng);
        const Mat G = loss_gradient(kind, Eta, Y);
        for (Eigen::Index i = 0; i < Eta.rows(); ++i)
            for (Eigen::Index j = 0; j < Eta.cols(); ++j) {
                const double keep = Eta(i, j);
                Eta(i, j) = keep + h;
                const double up = loss_value(kind, Eta, Y);
                Eta(i, j) = keep - h;
                const double dn = loss_value(kind, Eta, Y);
                Eta(i, j) = keep;
                const double fd = (up - dn) / (2.0 * h);
                const double scale = std::max(1.0, std::abs(fd));
                CHECK(std::abs(G(i, j) - fd) / scale < 1e-6);
            }
    }
}

TEST_CASE("curvature bounds") {
    CHECK(lipschitz_bound(LossKind::Quadratic) == doctest::Approx(1.0));
    CHECK(lipschitz_bound(LossKind::Logistic) == doctest::Approx(0.25));
    CHECK_FALSE(lipschitz_bound(LossKind::Poisson).has_value());
}

TEST_CASE("conjugate gap is nonnegative and vanishes at the matched point") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        // Quadratic: gap equals half squared error exactly.
        const Mat Eta = rng.normal_matrix(6, 3);
        const Mat Yq = sample_y(LossKind::Quadratic, 6, 3, rng);
        CHECK(fenchel_gap(LossKind::Quadratic, Eta, Yq) ==
              doctest::Approx(0.5 * (Yq - Eta).squaredNorm()).epsilon(1e-12));
        CHECK(fenchel_gap(LossKind::Quadratic, Yq, Yq) == doctest::Approx(0.0));

        // Logistic: matched point eta = logit(mu).
        Mat Mu(4, 2);
        for (Eigen::Index i = 0; i < Mu.size(); ++i)
            Mu(i / 2, i % 2) = rng.uniform(0.05, 0.95);
        Mat EtaL = (Mu.array() / (1.0 - Mu.array())).log().matrix();
        CHECK(fenchel_gap(LossKind::Logistic, EtaL, Mu) == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(fenchel_gap(LossKind::Logistic, EtaL.array() + 0.3, Mu) > 0.0);

        // Poisson: matched point eta = log(mu) for positive counts.
        Mat Cnt(4, 2);
        for (Eigen::Index i = 0; i < Cnt.size(); ++i)
            Cnt(i / 2, i % 2) = 1.0 + static_cast<double>(rng.below(5));
        const Mat EtaP = Cnt.array().log().matrix();
        CHECK(fenchel_gap(LossKind::Poisson, EtaP, Cnt) == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(fenchel_gap(LossKind::Poisson, EtaP.array() - 0.5, Cnt) > 0.0);
    }
}

TEST_CASE("boundary responses keep the conjugate finite") {
    Mat Y01(2, 2);
    Y01 << 0.0, 1.0, 1.0, 0.0;
    CHECK(std::isfinite(conjugate_value(LossKind::Logistic, Y01)));
    Mat Yz = Mat::Zero(2, 2);
    CHECK(std::isfinite(conjugate_value(LossKind::Poisson, Yz)));
    CHECK(std::isfinite(fenchel_gap(LossKind::Logistic, Mat::Zero(2, 2), Y01)));
}

TEST_CASE("poisson clamp flag is observable and resettable") {
    reset_poisson_clamp();
    CHECK_FALSE(poisson_clamp_hit());
    const Mat Y = Mat::Ones(1, 1);
    Mat hot = Mat::Constant(1, 1, 100.0);
    loss_value(LossKind::Poisson, hot, Y);
    CHECK(poisson_clamp_hit());
    reset_poisson_clamp();
    CHECK_FALSE(poisson_clamp_hit());
}

}  // TEST_SUITE
