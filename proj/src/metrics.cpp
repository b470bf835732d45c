#include "crl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace crl {

namespace {

// compress arbitrary positive labels to 0..K-1, preserving value order
std::vector<int> compress(const std::vector<int>& labels, int& k_out) {
    std::map<int, int> ids;
    for (int v : labels) ids.emplace(v, 0);
    int next = 0;
    for (auto& [v, id] : ids) id = next++;
    std::vector<int> out(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
    k_out = next;
    return out;
}

Mat contingency(const LabelPair& lp, int& kt, int& kp) {
    const auto t = compress(lp.truth, kt);
    const auto p = compress(lp.predicted, kp);
    Mat C = Mat::Zero(kt, kp);
    for (size_t i = 0; i < t.size(); ++i) C(t[i], p[i]) += 1.0;
    return C;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

LabelPair::LabelPair(std::vector<int> truth_, std::vector<int> predicted_)
    : truth(std::move(truth_)), predicted(std::move(predicted_)) {
    if (truth.size() != predicted.size()) throw StructuralError("label vectors differ in length");
    if (truth.empty()) throw StructuralError("empty label vectors");
    for (int v : truth)
        if (v < 1) throw StructuralError("labels must be positive");
    for (int v : predicted)
        if (v < 1) throw StructuralError("labels must be positive");
}

std::vector<int> hungarian_min_assignment(const Mat& cost) {
    if (cost.rows() != cost.cols() || cost.rows() < 1)
        throw StructuralError("assignment needs a nonempty square cost matrix");
    const int n = static_cast<int>(cost.rows());
    const double INF = std::numeric_limits<double>::infinity();
    // potentials u, v and column matching p (1-based with a virtual row/col 0)
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, INF);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = INF;
            for (int j = 1; j <= n; ++j)
                if (!used[j]) {
                    const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) match[static_cast<size_t>(p[j] - 1)] = j - 1;
    return match;
}

double clustering_accuracy(const LabelPair& lp) {
    int kt = 0, kp = 0;
    const Mat C = contingency(lp, kt, kp);
    const int k = std::max(kt, kp);
    Mat sq = Mat::Zero(k, k);
    sq.topLeftCorner(kt, kp) = C;
    // maximize matches == minimize (max - C)
    const double top = sq.maxCoeff();
    const auto match = hungarian_min_assignment(Mat::Constant(k, k, top) - sq);
    double hits = 0.0;
    for (int i = 0; i < k; ++i) hits += sq(i, match[static_cast<size_t>(i)]);
    return hits / static_cast<double>(lp.truth.size());
}

double rand_index(const LabelPair& lp) {
    const double n = static_cast<double>(lp.truth.size());
    if (n < 2) throw StructuralError("rand index needs n >= 2");
    int kt = 0, kp = 0;
    const Mat C = contingency(lp, kt, kp);
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < kt; ++i) sum_a += choose2(C.row(i).sum());
    for (int j = 0; j < kp; ++j) sum_b += choose2(C.col(j).sum());
    for (int i = 0; i < kt; ++i)
        for (int j = 0; j < kp; ++j) sum_ij += choose2(C(i, j));
    const double pairs = choose2(n);
    return (pairs + 2.0 * sum_ij - sum_a - sum_b) / pairs;
}

double nmi(const LabelPair& lp) {
    const double n = static_cast<double>(lp.truth.size());
    int kt = 0, kp = 0;
    const Mat C = contingency(lp, kt, kp);
    double ht = 0.0, hp = 0.0, mi = 0.0;
    for (int i = 0; i < kt; ++i) {
        const double pi = C.row(i).sum() / n;
        if (pi > 0.0) ht -= pi * std::log(pi);
    }
    for (int j = 0; j < kp; ++j) {
        const double pj = C.col(j).sum() / n;
        if (pj > 0.0) hp -= pj * std::log(pj);
    }
    const bool t_trivial = ht <= 0.0, p_trivial = hp <= 0.0;
    if (t_trivial && p_trivial) return 1.0;
    if (t_trivial || p_trivial) return 0.0;
    for (int i = 0; i < kt; ++i)
        for (int j = 0; j < kp; ++j) {
            const double pij = C(i, j) / n;
            if (pij > 0.0)
                mi += pij * std::log(pij / ((C.row(i).sum() / n) * (C.col(j).sum() / n)));
        }
    return std::clamp(mi / std::sqrt(ht * hp), 0.0, 1.0);
}

double approx_mse(const Mat& Y_star, const Mat& B_hat) {
    if (Y_star.rows() != B_hat.rows() || Y_star.cols() != B_hat.cols())
        throw StructuralError("approx_mse shape mismatch");
    return (Y_star - B_hat).squaredNorm() / static_cast<double>(Y_star.size());
}

PredictionError prediction_error(const Dataset& test, const Mat& B_hat, const Vec& alpha,
                                 const Mat* B_star, bool subtract_m) {
    if (B_hat.rows() != test.p() || B_hat.cols() != test.m())
        throw StructuralError("prediction_error: B_hat shape mismatch");
    if (alpha.size() != test.m()) throw StructuralError("prediction_error: alpha length mismatch");
    PredictionError out;
    const Mat fitted = (test.X * B_hat).rowwise() + alpha.transpose();
    out.err_p = (test.Y - fitted).squaredNorm() / static_cast<double>(test.n());
    if (subtract_m) out.err_p -= static_cast<double>(test.m());
    if (B_star) {
        if (B_star->rows() != B_hat.rows() || B_star->cols() != B_hat.cols())
            throw StructuralError("prediction_error: B_star shape mismatch");
        out.err_e = (B_hat - *B_star).squaredNorm();
    }
    return out;
}

}  // namespace crl
