#include "crl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "crl/rng.hpp"

namespace crl {

SimilarityGraph::SimilarityGraph(Mat W_, GraphKind kind_) : W(std::move(W_)), kind(kind_) {
    if (W.rows() != W.cols() || W.rows() < 1) throw StructuralError("similarity matrix must be square");
    if ((W.array() < 0.0).any()) throw StructuralError("similarity entries must be nonnegative");
    if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw StructuralError("similarity matrix must be symmetric");
}

SimilarityGraph gaussian_similarity(const Mat& data, double bandwidth) {
    if (bandwidth <= 0.0) throw ConfigError("bandwidth must be positive");
    const Eigen::Index n = data.rows();
    Mat W(n, n);
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    for (Eigen::Index i = 0; i < n; ++i) {
        W(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d2 = (data.row(i) - data.row(j)).squaredNorm();
            W(i, j) = W(j, i) = std::exp(-d2 * inv);
        }
    }
    return SimilarityGraph(std::move(W), GraphKind::Gaussian);
}

double median_pairwise_distance(const Mat& data, int subsample, std::uint64_t seed) {
    const Eigen::Index n = data.rows();
    std::vector<Eigen::Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (n > subsample) {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < subsample; ++i) {
            const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        }
        idx.resize(static_cast<size_t>(subsample));
    }
    std::vector<double> dists;
    dists.reserve(idx.size() * (idx.size() - 1) / 2);
    for (size_t a = 0; a < idx.size(); ++a)
        for (size_t b = a + 1; b < idx.size(); ++b)
            dists.push_back((data.row(idx[a]) - data.row(idx[b])).norm());
    if (dists.empty()) throw ConfigError("need at least two rows for a bandwidth estimate");
    std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2), dists.end());
    return dists[dists.size() / 2];
}

SimilarityGraph mutual_knn_similarity(const Mat& data, int k) {
    const Eigen::Index n = data.rows();
    if (k < 1) throw ConfigError("k must be positive");
    if (k >= n) throw ConfigError("mutual kNN needs k < n");
    // rank[i] holds i's neighbors sorted by distance (ties by index)
    Mat D2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        D2(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = (data.row(i) - data.row(j)).squaredNorm();
            D2(i, j) = D2(j, i) = d;
        }
    }
    std::vector<std::vector<char>> near(static_cast<size_t>(n), std::vector<char>(static_cast<size_t>(n), 0));
    std::vector<Eigen::Index> order(static_cast<size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index t = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) order[static_cast<size_t>(t++)] = j;
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return D2(i, a) != D2(i, b) ? D2(i, a) < D2(i, b) : a < b;
        });
        for (int t2 = 0; t2 < k; ++t2) near[static_cast<size_t>(i)][static_cast<size_t>(order[static_cast<size_t>(t2)])] = 1;
    }
    Mat W = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (near[static_cast<size_t>(i)][static_cast<size_t>(j)] && near[static_cast<size_t>(j)][static_cast<size_t>(i)])
                W(i, j) = W(j, i) = 1.0;
    return SimilarityGraph(std::move(W), GraphKind::MutualKnn);
}

LaplacianSpec graph_laplacian(const SimilarityGraph& g, bool normalized) {
    const Eigen::Index n = g.W.rows();
    const Vec deg = g.W.rowwise().sum();
    LaplacianSpec spec;
    spec.normalized = normalized;
    if (normalized) {
        for (Eigen::Index i = 0; i < n; ++i)
            if (deg(i) <= 0.0)
                throw DomainError("vertex " + std::to_string(i) + " is isolated; normalized Laplacian undefined");
        const Vec dinv = deg.array().rsqrt();
        spec.L = Mat::Identity(n, n) - dinv.asDiagonal() * g.W * dinv.asDiagonal();
    } else {
        spec.L = Mat(deg.asDiagonal()) - g.W;
    }
    // clean up asymmetry from the diagonal scaling
    spec.L = 0.5 * (spec.L + spec.L.transpose()).eval();
    return spec;
}

Mat kernel_to_response(const Mat& K_or_L, KernelSource source, int m_bar, bool whiten) {
    const Eigen::Index n = K_or_L.rows();
    if (K_or_L.cols() != n || n < 1) throw StructuralError("kernel matrix must be square");
    if (m_bar < 1 || m_bar > n) throw ConfigError("m_bar must be in 1..n");
    if ((K_or_L - K_or_L.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw StructuralError("kernel matrix must be symmetric");

    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (K_or_L + K_or_L.transpose()));
    Vec d = eig.eigenvalues();   // ascending
    Mat U = eig.eigenvectors();
    if (source == KernelSource::Laplacian) {
        // K = sigma_max(L) I - L shares eigenvectors with L, spectrum flipped
        const double rho = d(n - 1);
        d = (rho - d.array()).matrix();
        // ascending order of L's spectrum is descending for K; no reorder needed below
        // because we pick by descending eigenvalue of K explicitly
    } else {
        const double top = std::max(d.maxCoeff(), 0.0);
        if (d.minCoeff() < -1e-8 * std::max(top, 1.0))
            throw DomainError("kernel matrix is not positive semidefinite");
    }

    // descending eigenvalue order, ties by ascending original index
    std::vector<Eigen::Index> ord(static_cast<size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](Eigen::Index a, Eigen::Index b) { return d(a) > d(b); });

    Mat R(n, m_bar);
    for (int c = 0; c < m_bar; ++c) {
        Vec v = U.col(ord[static_cast<size_t>(c)]);
        // sign convention: largest-|entry| coordinate is positive (first such on ties)
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        if (!whiten) v *= std::sqrt(std::max(d(ord[static_cast<size_t>(c)]), 0.0));
        R.col(c) = v;
    }
    return R;
}

Mat read_edge_list(const std::string& path, bool one_based) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path + "' for reading");
    struct Edge {
        long i, j;
        double w;
    };
    std::vector<Edge> edges;
    long max_id = -1;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        long i, j;
        if (!(ss >> i >> j)) {
            // blank or comment-ish line: skip if nothing parsed at all
            std::istringstream probe(line);
            std::string tok;
            if (probe >> tok) throw DomainError(path + ":" + std::to_string(lineno) + ": bad edge line");
            continue;
        }
        double w = 1.0;
        ss >> w;
        if (one_based) {
            --i;
            --j;
        }
        if (i < 0 || j < 0) throw DomainError(path + ":" + std::to_string(lineno) + ": negative vertex id");
        if (w < 0.0) throw DomainError(path + ":" + std::to_string(lineno) + ": negative weight");
        edges.push_back({i, j, w});
        max_id = std::max({max_id, i, j});
    }
    if (max_id < 0) throw DomainError(path + ": no edges");
    Mat W = Mat::Zero(max_id + 1, max_id + 1);
    for (const auto& e : edges) {
        if (e.i == e.j) continue;  // no self-loops
        W(e.i, e.j) = std::max(W(e.i, e.j), e.w);
        W(e.j, e.i) = std::max(W(e.j, e.i), e.w);
    }
    return W;
}

}  // namespace crl
