#pragma once

#include <cstdint>
#include <string>

#include "crl/core.hpp"

namespace crl {

enum class GraphKind { Gaussian, MutualKnn };

struct SimilarityGraph {
    Mat W;  // symmetric, nonnegative, zero diagonal
    GraphKind kind = GraphKind::Gaussian;

    SimilarityGraph(Mat W_, GraphKind kind_);
};

struct LaplacianSpec {
    Mat L;
    bool normalized = false;
};

// W[i,j] = exp(-||x_i - x_j||^2 / (2 bw^2)), zero diagonal
SimilarityGraph gaussian_similarity(const Mat& data, double bandwidth);

// Median pairwise distance over a subsample of at most `subsample` rows
// (deterministic given seed); the usual bandwidth default.
double median_pairwise_distance(const Mat& data, int subsample = 500, std::uint64_t seed = 0);

// W[i,j] = 1 iff i and j are each among the other's k nearest neighbors
SimilarityGraph mutual_knn_similarity(const Mat& data, int k);

// normalized: I - D^{-1/2} W D^{-1/2}; otherwise D - W, with D = diag(W 1)
LaplacianSpec graph_laplacian(const SimilarityGraph& g, bool normalized);

enum class KernelSource { Kernel, Laplacian };

// Spectral pseudo-response for kernel clustering. A Laplacian is first flipped to the
// kernel K = sigma_max(L) I - L; K is eigendecomposed and the top m_bar eigenvectors
// (descending eigenvalue, sign fixed so each vector's largest-|entry| is positive)
// become the response: U[:,1:m_bar] when whiten (default), else U D^{1/2} truncated.
Mat kernel_to_response(const Mat& K_or_L, KernelSource source, int m_bar, bool whiten = true);

// Edge-list file: whitespace-separated "i j [weight]" lines; symmetrized by max.
Mat read_edge_list(const std::string& path, bool one_based);

}  // namespace crl
