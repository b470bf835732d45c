#pragma once

#include <cstdint>

#include "crl/core.hpp"
#include "crl/rng.hpp"

namespace crl {

struct KmeansConfig {
    int q = 1;
    int n_starts = 10;
    int max_iter = 100;
    std::uint64_t seed = 0;
    double tol = 0.0;  // 0 = run Lloyd to exact assignment convergence
};

struct KmeansResult {
    ClusterStructure structure;
    double sse = 0.0;
    int iters = 0;
};

// ++-style seeding: q centroids, D^2-weighted, pairwise distinct as points whenever
// the data has at least q unique rows.
Mat seed_plus_plus(const Mat& L, int q, Rng& rng);

// Best of cfg.n_starts Lloyd runs (++-seeded, per-start seed = cfg.seed + start index,
// ties by lowest start). Every cluster is nonempty on return: a cluster that empties
// during Lloyd is refilled with the point farthest from its current centroid.
KmeansResult kmeans_fit(const Mat& L, const KmeansConfig& cfg);

// Single Lloyd run warm-started from the given centroids; used by the solver, which
// re-enters clustering with the previous centroid matrix. Never returns a worse
// objective than the assignment cost under mu0.
KmeansResult kmeans_fit_from(const Mat& L, const Mat& mu0, int max_iter = 100, double tol = 0.0);

// Independent 1-D quantization of each column into q_e levels (rank-wise constraint).
Mat kmeans_columnwise(const Mat& L, int q_e, const KmeansConfig& cfg);

// Warm-started column-wise pass: column i is seeded with the distinct values of
// S_prev's column i (at most q_e of them).
Mat kmeans_columnwise_from(const Mat& L, const Mat& S_prev, int q_e, int max_iter = 100);

}  // namespace crl
