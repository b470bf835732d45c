#include "crl/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace crl {

namespace {

// squared distances from every row of L to every row of mu: p x q
Mat sq_distances(const Mat& L, const Mat& mu) {
    Mat D(L.rows(), mu.rows());
    for (Eigen::Index k = 0; k < mu.rows(); ++k)
        D.col(k) = (L.rowwise() - mu.row(k)).rowwise().squaredNorm();
    return D;
}

struct LloydState {
    std::vector<int> assign;  // 0-based during iteration
    Mat mu;
    double sse = 0.0;
    int iters = 0;
};

// nearest-centroid assignment, ties to the lowest cluster index
bool assign_step(const Mat& L, LloydState& st) {
    const Mat D = sq_distances(L, st.mu);
    bool changed = false;
    st.sse = 0.0;
    for (Eigen::Index j = 0; j < L.rows(); ++j) {
        int best = 0;
        double bestd = D(j, 0);
        for (Eigen::Index k = 1; k < D.cols(); ++k)
            if (D(j, k) < bestd) {
                bestd = D(j, k);
                best = static_cast<int>(k);
            }
        if (st.assign[static_cast<size_t>(j)] != best) {
            st.assign[static_cast<size_t>(j)] = best;
            changed = true;
        }
        st.sse += bestd;
    }
    return changed;
}

// refill empty clusters with the point farthest from its current centroid
// (only points whose cluster keeps at least one member are eligible)
bool repair_empties(const Mat& L, LloydState& st) {
    const int q = static_cast<int>(st.mu.rows());
    std::vector<int> count(static_cast<size_t>(q), 0);
    for (int a : st.assign) ++count[static_cast<size_t>(a)];
    bool repaired = false;
    for (int k = 0; k < q; ++k) {
        if (count[static_cast<size_t>(k)] > 0) continue;
        Eigen::Index far = -1;
        double fard = -1.0;
        for (Eigen::Index j = 0; j < L.rows(); ++j) {
            const int a = st.assign[static_cast<size_t>(j)];
            if (count[static_cast<size_t>(a)] < 2) continue;
            const double d = (L.row(j) - st.mu.row(a)).squaredNorm();
            if (d > fard) {
                fard = d;
                far = j;
            }
        }
        if (far < 0) continue;  // fewer points than clusters; cannot refill
        --count[static_cast<size_t>(st.assign[static_cast<size_t>(far)])];
        st.assign[static_cast<size_t>(far)] = k;
        ++count[static_cast<size_t>(k)];
        repaired = true;
    }
    return repaired;
}

void update_centroids(const Mat& L, LloydState& st) {
    const int q = static_cast<int>(st.mu.rows());
    st.mu.setZero();
    std::vector<int> count(static_cast<size_t>(q), 0);
    for (Eigen::Index j = 0; j < L.rows(); ++j) {
        st.mu.row(st.assign[static_cast<size_t>(j)]) += L.row(j);
        ++count[static_cast<size_t>(st.assign[static_cast<size_t>(j)])];
    }
    for (int k = 0; k < q; ++k)
        if (count[static_cast<size_t>(k)] > 0) st.mu.row(k) /= count[static_cast<size_t>(k)];
}

double current_sse(const Mat& L, const LloydState& st) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < L.rows(); ++j)
        s += (L.row(j) - st.mu.row(st.assign[static_cast<size_t>(j)])).squaredNorm();
    return s;
}

LloydState lloyd(const Mat& L, Mat mu0, int max_iter, double tol) {
    LloydState st;
    st.mu = std::move(mu0);
    st.assign.assign(static_cast<size_t>(L.rows()), -1);
    double prev_sse = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        st.iters = it + 1;
        const bool changed = assign_step(L, st);
        const bool repaired = repair_empties(L, st);
        update_centroids(L, st);
        if (!changed && !repaired) break;
        const double sse = current_sse(L, st);
        if (tol > 0.0 && prev_sse - sse <= tol * std::max(1.0, prev_sse)) break;
        prev_sse = sse;
    }
    st.sse = current_sse(L, st);
    return st;
}

KmeansResult package(LloydState st) {
    std::vector<int> assign1(st.assign.size());
    for (size_t j = 0; j < st.assign.size(); ++j) assign1[j] = st.assign[j] + 1;
    KmeansResult res{ClusterStructure(std::move(assign1), std::move(st.mu)), st.sse, st.iters};
    return res;
}

}  // namespace

Mat seed_plus_plus(const Mat& L, int q, Rng& rng) {
    const Eigen::Index p = L.rows();
    if (q < 1 || q > p) throw ConfigError("seed_plus_plus: q must be in 1..p");
    Mat mu(q, L.cols());
    std::vector<char> chosen(static_cast<size_t>(p), 0);
    const Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p)));
    mu.row(0) = L.row(first);
    chosen[static_cast<size_t>(first)] = 1;
    Vec d2 = (L.rowwise() - mu.row(0)).rowwise().squaredNorm();
    for (int t = 1; t < q; ++t) {
        const double total = d2.sum();
        Eigen::Index pick = -1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Eigen::Index j = 0; j < p; ++j) {
                target -= d2(j);
                if (target <= 0.0) {
                    pick = j;
                    break;
                }
            }
            if (pick < 0) {  // fp underflow at the tail
                for (Eigen::Index j = p - 1; j >= 0; --j)
                    if (d2(j) > 0.0) {
                        pick = j;
                        break;
                    }
            }
        } else {
            // all remaining points coincide with chosen centroids; take the first unchosen
            for (Eigen::Index j = 0; j < p; ++j)
                if (!chosen[static_cast<size_t>(j)]) {
                    pick = j;
                    break;
                }
        }
        mu.row(t) = L.row(pick);
        chosen[static_cast<size_t>(pick)] = 1;
        d2 = d2.cwiseMin((L.rowwise() - mu.row(t)).rowwise().squaredNorm());
    }
    return mu;
}

KmeansResult kmeans_fit(const Mat& L, const KmeansConfig& cfg) {
    if (cfg.q < 1 || cfg.q > L.rows()) throw ConfigError("kmeans: q must be in 1..p");
    if (cfg.n_starts < 1 || cfg.max_iter < 1) throw ConfigError("kmeans: n_starts and max_iter must be positive");
    LloydState best;
    best.sse = std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.n_starts; ++s) {
        Rng rng(cfg.seed + static_cast<std::uint64_t>(s));
        LloydState st = lloyd(L, seed_plus_plus(L, cfg.q, rng), cfg.max_iter, cfg.tol);
        if (st.sse < best.sse) best = std::move(st);  // ties keep the earliest start
    }
    return package(std::move(best));
}

KmeansResult kmeans_fit_from(const Mat& L, const Mat& mu0, int max_iter, double tol) {
    if (mu0.rows() < 1 || mu0.rows() > L.rows()) throw ConfigError("kmeans: centroid count must be in 1..p");
    if (mu0.cols() != L.cols()) throw StructuralError("kmeans: centroid dimension mismatch");
    return package(lloyd(L, mu0, max_iter, tol));
}

Mat kmeans_columnwise(const Mat& L, int q_e, const KmeansConfig& cfg) {
    if (q_e < 1 || q_e > L.rows()) throw ConfigError("kmeans: q_e must be in 1..p");
    Mat S(L.rows(), L.cols());
    KmeansConfig col_cfg = cfg;
    col_cfg.q = q_e;
    for (Eigen::Index i = 0; i < L.cols(); ++i) {
        col_cfg.seed = cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
        const KmeansResult res = kmeans_fit(L.col(i), col_cfg);
        S.col(i) = res.structure.expand();
    }
    return S;
}

Mat kmeans_columnwise_from(const Mat& L, const Mat& S_prev, int q_e, int max_iter) {
    if (S_prev.rows() != L.rows() || S_prev.cols() != L.cols())
        throw StructuralError("kmeans: warm-start shape mismatch");
    Mat S(L.rows(), L.cols());
    for (Eigen::Index i = 0; i < L.cols(); ++i) {
        std::set<double> levels(S_prev.col(i).data(), S_prev.col(i).data() + S_prev.rows());
        Mat mu0(static_cast<Eigen::Index>(std::min<size_t>(levels.size(), static_cast<size_t>(q_e))), 1);
        Eigen::Index k = 0;
        for (double v : levels) {
            if (k >= mu0.rows()) break;
            mu0(k++, 0) = v;
        }
        const KmeansResult res = kmeans_fit_from(L.col(i), mu0, max_iter);
        S.col(i) = res.structure.expand();
    }
    return S;
}

}  // namespace crl
