#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "crl/core.hpp"

namespace crl {

struct GroundTruth {
    std::vector<int> labels;        // 1..q*
    std::optional<Mat> B_star;      // planted coefficient matrix, when meaningful
    std::optional<Mat> centers;     // planted centroid rows, when meaningful
};

// Clusters around q* random centers drawn uniformly in [0,side]^centroid_dim and
// zero-padded to the ambient dimension; iid N(0, sigma2) noise on every coordinate.
struct CentroidClustersSpec {
    int q_star = 10;
    int ambient_m = 50;
    int centroid_dim = 2;
    double side = 500.0;
    int per_cluster = 100;
    double sigma2 = 1.0;
    std::uint64_t seed = 0;
};

std::pair<Mat, GroundTruth> gen_centroid_clusters(const CentroidClustersSpec& spec);

// Multivariate regression with an equisparse low-rank truth: X rows ~ N(0, [tau^|i-j|]),
// B0 = B1 B2^T where B2 is standard Gaussian and each row of B1 is one of q* shared
// component rows (the zero row, or an N(k,1)^r draw for k = 1..q*-1, picked uniformly);
// B* = B0 + N(0, sigma_B^2) elementwise; Y = X B* + N(0,1).
struct RegressionSuiteSpec {
    int n = 100;
    int p = 50;
    int m = 25;
    int q_star = 10;
    int r_star = 5;
    double tau = 0.2;
    double sigma_B = 0.0;
    std::uint64_t seed = 0;
};

std::pair<Dataset, GroundTruth> gen_regression_suite(const RegressionSuiteSpec& spec);

// Fresh (X, Y) draw at an existing planted coefficient matrix (same design law and
// unit noise); used for validation-based tuning in the misspecification benchmark.
Dataset draw_regression_sample(const Mat& B_star, double tau, int n, std::uint64_t seed);

// Planted-partition graph: q* equal communities of size s = n/q*, edge probabilities
// p_in = z_in/(s-1) within and p_out = z_out/(n-s) across.
struct PlantedPartitionSpec {
    int n = 1000;
    int q_star = 20;
    double z_in = 15.0;
    double z_out = 30.0;
    std::uint64_t seed = 0;
};

std::pair<Mat, GroundTruth> gen_planted_partition(const PlantedPartitionSpec& spec);

// Trace-regression / model-segmentation instance: y_i ~ <x_i, b_i> with per-sample
// coefficient rows b_i that the equisparsity constraint groups into q sub-models.
struct TraceProblem {
    Mat X;  // n x p, row i is the only nonzero row of the i-th design matrix
    Vec y;  // length n

    TraceProblem(Mat X_, Vec y_);
};

TraceProblem build_trace_design(const Mat& X_rows, const Vec& y);

}  // namespace crl
