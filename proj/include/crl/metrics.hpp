#pragma once

#include <optional>
#include <vector>

#include "crl/core.hpp"

namespace crl {

struct LabelPair {
    std::vector<int> truth;
    std::vector<int> predicted;

    LabelPair(std::vector<int> truth_, std::vector<int> predicted_);
};

// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres, O(n^3)).
// Returns the column matched to each row.
std::vector<int> hungarian_min_assignment(const Mat& cost);

// Fraction of points whose predicted label maps to the true one under the best
// label permutation (rectangular confusion matrices are zero-padded to square).
double clustering_accuracy(const LabelPair& lp);

double rand_index(const LabelPair& lp);

// Mutual information normalized by the geometric mean of the entropies, natural logs.
// Both partitions trivial -> 1; exactly one trivial and partitions differ -> 0.
double nmi(const LabelPair& lp);

// ||Y_star - B_hat||_F^2 / (m n)
double approx_mse(const Mat& Y_star, const Mat& B_hat);

struct PredictionError {
    double err_p = 0.0;               // ||Y - (1 alpha^T + X B)||_F^2 / n  [- m]
    std::optional<double> err_e;      // ||B_hat - B_star||_F^2 when B_star given
};

// subtract_m applies the unit-noise-variance centering -m to err_p (on by default,
// matching the benchmark convention; meaningless for other noise scales).
PredictionError prediction_error(const Dataset& test, const Mat& B_hat, const Vec& alpha,
                                 const Mat* B_star = nullptr, bool subtract_m = true);

}  // namespace crl
