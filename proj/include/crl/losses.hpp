#pragma once

#include <optional>

#include "crl/core.hpp"

namespace crl {

// Natural-parameter loss families. Eta is the linear predictor 1 alpha^T + X B.
//   Quadratic: 1/2 ||Y - Eta||_F^2
//   Logistic:  sum_ij [ -y eta + log(1 + e^eta) ]
//   Poisson:   sum_ij [ -y eta + e^eta ]
// Poisson linear predictors are clamped at +30 before exponentiation so that line
// search stays finite on wild iterates; poisson_clamp_hit() reports whether the
// clamp fired since the last reset (diagnostic only, never an error).
double loss_value(LossKind kind, const Mat& Eta, const Mat& Y);
Mat loss_gradient(LossKind kind, const Mat& Eta, const Mat& Y);

// Global Lipschitz constant of the gradient; nullopt means unbounded (Poisson),
// which forces the solver into line search.
std::optional<double> lipschitz_bound(LossKind kind);

// Fenchel conjugate b*(Y) of the cumulant, with 0*log(0) := 0 on the boundary.
double conjugate_value(LossKind kind, const Mat& Y);

// Fenchel-Young gap: natural-form loss plus conjugate, nonnegative, zero exactly at
// the matched point Eta = (grad b)^{-1}(Y). For the quadratic family this equals
// 1/2 ||Y - Eta||_F^2. Used by the scale-free information criterion numerator.
double fenchel_gap(LossKind kind, const Mat& Eta, const Mat& Y);

bool poisson_clamp_hit();
void reset_poisson_clamp();

}  // namespace crl
