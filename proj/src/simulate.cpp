#include "crl/simulate.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "crl/rng.hpp"

namespace crl {

std::pair<Mat, GroundTruth> gen_centroid_clusters(const CentroidClustersSpec& spec) {
    if (spec.q_star < 1 || spec.per_cluster < 1 || spec.ambient_m < 1)
        throw ConfigError("cluster scenario counts must be positive");
    if (spec.centroid_dim > spec.ambient_m)
        throw ConfigError("centroid_dim exceeds the ambient dimension");
    if (spec.sigma2 <= 0.0 || spec.side <= 0.0) throw ConfigError("sigma2 and side must be positive");
    Rng rng(spec.seed);
    Mat centers = Mat::Zero(spec.q_star, spec.ambient_m);
    for (int k = 0; k < spec.q_star; ++k)
        for (int j = 0; j < spec.centroid_dim; ++j) centers(k, j) = rng.uniform(0.0, spec.side);
    const int n = spec.q_star * spec.per_cluster;
    const double sd = std::sqrt(spec.sigma2);
    Mat data(n, spec.ambient_m);
    GroundTruth truth;
    truth.labels.resize(static_cast<size_t>(n));
    for (int k = 0; k < spec.q_star; ++k)
        for (int i = 0; i < spec.per_cluster; ++i) {
            const int row = k * spec.per_cluster + i;
            for (int j = 0; j < spec.ambient_m; ++j) data(row, j) = centers(k, j) + sd * rng.normal();
            truth.labels[static_cast<size_t>(row)] = k + 1;
        }
    truth.centers = std::move(centers);
    return {std::move(data), std::move(truth)};
}

std::pair<Dataset, GroundTruth> gen_regression_suite(const RegressionSuiteSpec& spec) {
    if (spec.q_star < 2) throw ConfigError("regression scenario needs q* >= 2");
    if (spec.r_star > std::min(spec.p, spec.m)) throw ConfigError("r* exceeds min(p,m)");
    if (spec.tau < 0.0 || spec.tau >= 1.0) throw ConfigError("tau must be in [0,1)");
    Rng rng(spec.seed);

    // AR-style design covariance [tau^|i-j|], sampled through its Cholesky factor
    Mat Sigma(spec.p, spec.p);
    for (int i = 0; i < spec.p; ++i)
        for (int j = 0; j < spec.p; ++j) Sigma(i, j) = std::pow(spec.tau, std::abs(i - j));
    const Mat chol = Eigen::LLT<Mat>(Sigma).matrixL();
    Mat X = rng.normal_matrix(spec.n, spec.p) * chol.transpose();

    const Mat B2 = rng.normal_matrix(spec.m, spec.r_star);

    // component rows shared across features: row 0 is zero, row k is an N(k,1)^r draw
    Mat comp;
    std::vector<int> labels(static_cast<size_t>(spec.p));
    Mat B1(spec.p, spec.r_star);
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 1000) throw NonconvergenceError("mixture draw kept missing components");
        comp = Mat::Zero(spec.q_star, spec.r_star);
        for (int k = 1; k < spec.q_star; ++k)
            for (int j = 0; j < spec.r_star; ++j) comp(k, j) = rng.normal(static_cast<double>(k), 1.0);
        std::vector<char> seen(static_cast<size_t>(spec.q_star), 0);
        for (int j = 0; j < spec.p; ++j) {
            const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.q_star)));
            labels[static_cast<size_t>(j)] = k + 1;
            B1.row(j) = comp.row(k);
            seen[static_cast<size_t>(k)] = 1;
        }
        bool all = true;
        for (char c : seen) all = all && c;
        if (!all) continue;
        // null-probability degeneracies: coincident components or a rank drop
        const Mat B0 = B1 * B2.transpose();
        if (distinct_row_count(B0, 0.0) != spec.q_star) continue;
        if (numerical_rank(B0) != spec.r_star) continue;
        break;
    }
    const Mat B0 = B1 * B2.transpose();

    Mat B_star = B0;
    if (spec.sigma_B > 0.0) B_star += spec.sigma_B * rng.normal_matrix(spec.p, spec.m);
    const Mat Y = X * B_star + rng.normal_matrix(spec.n, spec.m);

    GroundTruth truth;
    truth.labels = std::move(labels);
    truth.B_star = std::move(B_star);
    truth.centers = comp * B2.transpose();  // the q* distinct rows of B0
    return {Dataset(Y, std::move(X), LossKind::Quadratic), std::move(truth)};
}

Dataset draw_regression_sample(const Mat& B_star, double tau, int n, std::uint64_t seed) {
    if (n < 1 || B_star.size() == 0) throw ConfigError("sample draw needs n >= 1 and a nonempty B");
    if (tau < 0.0 || tau >= 1.0) throw ConfigError("tau must be in [0,1)");
    const int p = static_cast<int>(B_star.rows());
    Rng rng(seed);
    Mat Sigma(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) Sigma(i, j) = std::pow(tau, std::abs(i - j));
    const Mat chol = Eigen::LLT<Mat>(Sigma).matrixL();
    Mat X = rng.normal_matrix(n, p) * chol.transpose();
    Mat Y = X * B_star + rng.normal_matrix(n, static_cast<int>(B_star.cols()));
    return Dataset(std::move(Y), std::move(X), LossKind::Quadratic);
}

std::pair<Mat, GroundTruth> gen_planted_partition(const PlantedPartitionSpec& spec) {
    if (spec.q_star < 1 || spec.n < 2) throw ConfigError("partition scenario needs n >= 2, q* >= 1");
    if (spec.n % spec.q_star != 0) throw ConfigError("community size must divide n evenly");
    const int s = spec.n / spec.q_star;
    const double p_in = s > 1 ? spec.z_in / static_cast<double>(s - 1) : 0.0;
    const double p_out = spec.n > s ? spec.z_out / static_cast<double>(spec.n - s) : 0.0;
    if (p_in > 1.0 || p_out > 1.0)
        throw ConfigError("edge probability exceeds 1 (z_in/z_out too large for these sizes)");
    Rng rng(spec.seed);
    Mat A = Mat::Zero(spec.n, spec.n);
    GroundTruth truth;
    truth.labels.resize(static_cast<size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) truth.labels[static_cast<size_t>(i)] = i / s + 1;
    for (int i = 0; i < spec.n; ++i)
        for (int j = i + 1; j < spec.n; ++j) {
            const bool same = truth.labels[static_cast<size_t>(i)] == truth.labels[static_cast<size_t>(j)];
            if (rng.bernoulli(same ? p_in : p_out)) A(i, j) = A(j, i) = 1.0;
        }
    return {std::move(A), std::move(truth)};
}

TraceProblem::TraceProblem(Mat X_, Vec y_) : X(std::move(X_)), y(std::move(y_)) {
    if (X.rows() != y.size()) throw StructuralError("trace design rows must match response length");
    if (X.rows() < 1 || X.cols() < 1) throw StructuralError("empty trace design");
    if (!X.allFinite() || !y.allFinite()) throw StructuralError("trace design contains NaN/Inf");
}

TraceProblem build_trace_design(const Mat& X_rows, const Vec& y) { return TraceProblem(X_rows, y); }

}  // namespace crl
