#include "crl/losses.hpp"

#include <atomic>
#include <cmath>

namespace crl {

namespace {

constexpr double kPoissonEtaCap = 30.0;
std::atomic<bool> g_poisson_clamped{false};

// log(1 + e^x) without overflow
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

void check_shapes(const Mat& Eta, const Mat& Y) {
    if (Eta.rows() != Y.rows() || Eta.cols() != Y.cols())
        throw StructuralError("Eta and Y shapes differ");
}

void check_domain(LossKind kind, const Mat& Y) {
    if (kind == LossKind::Logistic && ((Y.array() < 0.0).any() || (Y.array() > 1.0).any()))
        throw DomainError("logistic responses must lie in [0,1]");
    if (kind == LossKind::Poisson && (Y.array() < 0.0).any())
        throw DomainError("poisson responses must be nonnegative");
}

inline double capped_exp(double eta) {
    if (eta > kPoissonEtaCap) {
        g_poisson_clamped.store(true, std::memory_order_relaxed);
        eta = kPoissonEtaCap;
    }
    return std::exp(eta);
}

}  // namespace

double loss_value(LossKind kind, const Mat& Eta, const Mat& Y) {
    check_shapes(Eta, Y);
    check_domain(kind, Y);
    switch (kind) {
        case LossKind::Quadratic:
            return 0.5 * (Y - Eta).squaredNorm();
        case LossKind::Logistic: {
            double s = 0.0;
            for (Eigen::Index j = 0; j < Y.cols(); ++j)
                for (Eigen::Index i = 0; i < Y.rows(); ++i)
                    s += -Y(i, j) * Eta(i, j) + softplus(Eta(i, j));
            return s;
        }
        case LossKind::Poisson: {
            double s = 0.0;
            for (Eigen::Index j = 0; j < Y.cols(); ++j)
                for (Eigen::Index i = 0; i < Y.rows(); ++i)
                    s += -Y(i, j) * Eta(i, j) + capped_exp(Eta(i, j));
            return s;
        }
    }
    return 0.0;
}

Mat loss_gradient(LossKind kind, const Mat& Eta, const Mat& Y) {
    check_shapes(Eta, Y);
    check_domain(kind, Y);
    switch (kind) {
        case LossKind::Quadratic:
            return Eta - Y;
        case LossKind::Logistic:
            return Eta.unaryExpr([](double x) { return sigmoid(x); }) - Y;
        case LossKind::Poisson:
            return Eta.unaryExpr([](double x) { return capped_exp(x); }) - Y;
    }
    return Mat();
}

std::optional<double> lipschitz_bound(LossKind kind) {
    switch (kind) {
        case LossKind::Quadratic: return 1.0;
        case LossKind::Logistic: return 0.25;
        case LossKind::Poisson: return std::nullopt;
    }
    return std::nullopt;
}

double conjugate_value(LossKind kind, const Mat& Y) {
    check_domain(kind, Y);
    switch (kind) {
        case LossKind::Quadratic:
            return 0.5 * Y.squaredNorm();
        case LossKind::Logistic: {
            double s = 0.0;
            for (Eigen::Index j = 0; j < Y.cols(); ++j)
                for (Eigen::Index i = 0; i < Y.rows(); ++i)
                    s += xlogx(Y(i, j)) + xlogx(1.0 - Y(i, j));
            return s;
        }
        case LossKind::Poisson: {
            double s = 0.0;
            for (Eigen::Index j = 0; j < Y.cols(); ++j)
                for (Eigen::Index i = 0; i < Y.rows(); ++i)
                    s += xlogx(Y(i, j)) - Y(i, j);
            return s;
        }
    }
    return 0.0;
}

double fenchel_gap(LossKind kind, const Mat& Eta, const Mat& Y) {
    if (kind == LossKind::Quadratic) return 0.5 * (Y - Eta).squaredNorm();
    return loss_value(kind, Eta, Y) + conjugate_value(kind, Y);
}

bool poisson_clamp_hit() { return g_poisson_clamped.load(std::memory_order_relaxed); }

void reset_poisson_clamp() { g_poisson_clamped.store(false, std::memory_order_relaxed); }

}  // namespace crl
