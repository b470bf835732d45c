#include "crl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "crl/losses.hpp"

namespace crl {

namespace {

// Identity designs (row clustering, kernel responses) are common enough that the
// n x n multiply is worth skipping.
struct DesignOps {
    const Mat& X;
    bool ident;

    explicit DesignOps(const Mat& X_) : X(X_), ident(X_.rows() == X_.cols() && X_.isIdentity(0.0)) {}

    Mat mul(const Mat& M) const { return ident ? M : Mat(X * M); }
    Mat tmul(const Mat& M) const { return ident ? M : Mat(X.transpose() * M); }
};

Mat predictor(const DesignOps& ops, const Mat& S, const Mat& V, const Vec& alpha) {
    Mat Eta = ops.mul(S * V.transpose());
    Eta.rowwise() += alpha.transpose();
    return Eta;
}

// sigma_max(X): exact on small sides, sqrt(||X||_1 ||X||_inf) upper bound beyond
// (keeps the conservative stepsize on the safe side of the curvature).
double spectral_norm(const Mat& X) {
    if (X.size() == 0) return 0.0;
    if (X.rows() == X.cols() && X.isIdentity(0.0)) return 1.0;
    if (std::min(X.rows(), X.cols()) <= 1500) {
        Mat G = (X.rows() <= X.cols()) ? Mat(X * X.transpose()) : Mat(X.transpose() * X);
        Eigen::SelfAdjointEigenSolver<Mat> es(G);
        if (es.info() != Eigen::Success) throw StructuralError("eigendecomposition failed for the design Gram matrix");
        return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    }
    const double c1 = X.cwiseAbs().colwise().sum().maxCoeff();
    const double ci = X.cwiseAbs().rowwise().sum().maxCoeff();
    return std::sqrt(c1 * ci);
}

// Group exactly tied rows by first appearance; labels 1..#groups.
ClusterStructure derive_row_structure(const Mat& S) {
    const Eigen::Index p = S.rows();
    std::map<std::vector<double>, int> seen;
    std::vector<int> assign(static_cast<std::size_t>(p));
    std::vector<Eigen::Index> reps;
    for (Eigen::Index i = 0; i < p; ++i) {
        std::vector<double> key(S.row(i).begin(), S.row(i).end());
        auto it = seen.find(key);
        if (it == seen.end()) {
            const int label = static_cast<int>(seen.size()) + 1;
            seen.emplace(std::move(key), label);
            reps.push_back(i);
            assign[static_cast<std::size_t>(i)] = label;
        } else {
            assign[static_cast<std::size_t>(i)] = it->second;
        }
    }
    Mat mu(static_cast<Eigen::Index>(reps.size()), S.cols());
    for (Eigen::Index k = 0; k < mu.rows(); ++k) mu.row(k) = S.row(reps[static_cast<std::size_t>(k)]);
    return ClusterStructure(std::move(assign), std::move(mu));
}

// Warm-start centroids must have exactly q rows; surplus duplicates of row 0 empty
// out during assignment and are refilled by the empty-cluster repair.
Mat pad_centroids(const Mat& mu, int q) {
    if (mu.rows() > q) throw ConfigError("initializer has more distinct coefficient rows than q");
    if (mu.rows() == q) return mu;
    Mat out(q, mu.cols());
    out.topRows(mu.rows()) = mu;
    for (Eigen::Index i = mu.rows(); i < q; ++i) out.row(i) = mu.row(0);
    return out;
}

void check_orth_decomposition(const Mat& Ytil, const Mat& S, const Mat& V) {
    const double lhs = (Ytil - S * V.transpose()).squaredNorm();
    double rhs = (Ytil * V - S).squaredNorm();
    const Eigen::Index m = V.rows(), r = V.cols();
    if (m > r) {
        Eigen::HouseholderQR<Mat> qr(V);
        Mat Q = qr.householderQ() * Mat::Identity(m, m);
        rhs += (Ytil * Q.rightCols(m - r)).squaredNorm();
    }
    if (std::abs(lhs - rhs) > 1e-9 * std::max(1.0, lhs))
        throw StructuralError("orthogonal decomposition identity violated during inner descent");
}

struct InnerOut {
    Mat S;
    Mat V;
    Mat mu;
    std::vector<int> assign;
    double half_ss = 0.0;
};

// Alternate the rotation and the clustering on 1/2||Ytil - S V^T||_F^2. Each half
// step is non-increasing: the rotation is the Procrustes optimum for fixed S, and
// the warm-started clustering starts from an assignment no worse than keeping S.
InnerOut inner_descent(const Mat& Ytil, Mat S, Mat V, Mat mu_ws, const FitConfig& cfg) {
    double prev = 0.5 * (Ytil - S * V.transpose()).squaredNorm();
    std::vector<int> assign;
    for (int t = 0; t < cfg.max_inner; ++t) {
        Mat W = Ytil.transpose() * S;
        if (W.norm() > 0.0) V = procrustes_rotation(W);  // S = 0 leaves the objective V-free
        Mat L = Ytil * V;
        if (cfg.variant == Variant::RowWise) {
            KmeansResult km = kmeans_fit_from(L, mu_ws, cfg.kmeans.max_iter, cfg.kmeans.tol);
            mu_ws = km.structure.mu;
            assign = km.structure.assign;
            S = km.structure.expand();
        } else {
            S = kmeans_columnwise_from(L, S, cfg.q, cfg.kmeans.max_iter);
        }
        if (cfg.debug_checks) check_orth_decomposition(Ytil, S, V);
        const double cur = 0.5 * (Ytil - S * V.transpose()).squaredNorm();
        const bool done = std::abs(prev - cur) <= cfg.inner_tol * (prev + 1e-12);
        prev = cur;
        if (done) break;
    }
    return InnerOut{std::move(S), std::move(V), std::move(mu_ws), std::move(assign), prev};
}

void validate_config(const Dataset& d, const FitConfig& cfg) {
    if (cfg.q < 1) throw ConfigError("cluster count q must be at least 1");
    if (cfg.q > d.p()) throw ConfigError("cluster count q cannot exceed the number of coefficient rows");
    if (cfg.r < 1) throw ConfigError("rank r must be at least 1");
    if (cfg.r > std::min(d.m(), d.p())) throw ConfigError("rank r cannot exceed min(m, p)");
    if (cfg.variant == Variant::RowWise && cfg.q < cfg.r) throw ConfigError("row-wise fits need q >= r");
    if (!(cfg.grow > 1.0)) throw ConfigError("line search growth factor must exceed 1");
    if (!(cfg.shrink > 0.0 && cfg.shrink <= 1.0)) throw ConfigError("stepsize relaxation must lie in (0, 1]");
    if (!(cfg.eps > 0.0)) throw ConfigError("outer tolerance must be positive");
    if (!(cfg.inner_tol > 0.0)) throw ConfigError("inner tolerance must be positive");
    if (cfg.max_outer < 1) throw ConfigError("max_outer must be at least 1");
    if (cfg.max_inner < 1) throw ConfigError("max_inner must be at least 1");
    if (cfg.rho_init < 0.0) throw ConfigError("rho_init must be nonnegative (0 = automatic)");
    if (cfg.kmeans.n_starts < 1 || cfg.kmeans.max_iter < 1)
        throw ConfigError("clustering needs at least one start and one iteration");
    if (cfg.rho_policy == RhoPolicy::Conservative && !lipschitz_bound(d.loss))
        throw ConfigError("conservative stepsize needs a finite curvature bound; use line search for this loss");
}

void check_dims(const Dataset& d, const Factorization& f) {
    if (f.p() != d.p() || f.m() != d.m()) throw ConfigError("factorization dimensions do not match the data");
}

}  // namespace

double objective_value(const Dataset& d, const Factorization& f) {
    check_dims(d, f);
    DesignOps ops(d.X);
    return loss_value(d.loss, predictor(ops, f.S, f.V, f.alpha), d.Y);
}

Mat pseudo_response(const Dataset& d, const Factorization& f, double rho) {
    check_dims(d, f);
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    DesignOps ops(d.X);
    Mat G = loss_gradient(d.loss, predictor(ops, f.S, f.V, f.alpha), d.Y);
    return f.S * f.V.transpose() - ops.tmul(G) / rho;
}

Vec intercept_step(const Dataset& d, const Factorization& f, double rho) {
    check_dims(d, f);
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    DesignOps ops(d.X);
    Mat G = loss_gradient(d.loss, predictor(ops, f.S, f.V, f.alpha), d.Y);
    return f.alpha - G.colwise().sum().transpose() / rho;
}

Mat procrustes_rotation(const Mat& W) {
    if (W.size() == 0) throw ConfigError("empty matrix passed to the rotation step");
    if (W.rows() < W.cols()) throw ConfigError("rotation factor needs at least as many rows as columns");
    Eigen::JacobiSVD<Mat> svd(W, Eigen::ComputeThinU | Eigen::ComputeFullV);
    Mat V = svd.matrixU() * svd.matrixV().transpose();
    const Eigen::Index r = V.cols();
    if ((V.transpose() * V - Mat::Identity(r, r)).cwiseAbs().maxCoeff() > 1e-8) {
        // degenerate factor: complete deterministically via QR with a sign-fixed diagonal
        Eigen::HouseholderQR<Mat> qr(V);
        Mat Q = qr.householderQ() * Mat::Identity(V.rows(), r);
        Mat R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < r; ++j)
            if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
        return Q;
    }
    return V;
}

std::pair<Factorization, ClusterStructure> inner_sv_descent(const Mat& Ytil, const Factorization& f0,
                                                            const FitConfig& cfg) {
    if (Ytil.rows() != f0.p() || Ytil.cols() != f0.m())
        throw ConfigError("pseudo-response dimensions do not match the factorization");
    if (cfg.q < 1 || cfg.q > f0.p()) throw ConfigError("cluster count q must lie in [1, p]");
    Mat mu_ws;
    if (cfg.variant == Variant::RowWise) mu_ws = pad_centroids(derive_row_structure(f0.S).mu, cfg.q);
    InnerOut io = inner_descent(Ytil, f0.S, f0.V, std::move(mu_ws), cfg);
    ClusterStructure st = (cfg.variant == Variant::RowWise) ? ClusterStructure(io.assign, io.mu)
                                                            : derive_row_structure(io.S);
    return {Factorization(std::move(io.S), std::move(io.V), f0.alpha), std::move(st)};
}

std::pair<double, StepCandidate> line_search_rho(const Dataset& d, const Factorization& f_old,
                                                 const StepBuilder& build, double rho0,
                                                 const FitConfig& cfg) {
    check_dims(d, f_old);
    if (!(rho0 > 0.0)) throw ConfigError("line search must start from a positive rho");
    DesignOps ops(d.X);
    const Mat Eta_old = predictor(ops, f_old.S, f_old.V, f_old.alpha);
    const double f_o = loss_value(d.loss, Eta_old, d.Y);
    const Mat G = loss_gradient(d.loss, Eta_old, d.Y);
    const Vec gsum = G.colwise().sum().transpose();
    const Mat B_old = f_old.S * f_old.V.transpose();
    const double slack = 1e-12 * (1.0 + std::abs(f_o));
    double rho = rho0;
    for (int k = 0; k <= 60; ++k, rho *= cfg.grow) {
        StepCandidate c = build(rho);
        const Mat dB = c.S * c.V.transpose() - B_old;
        double lin = (ops.mul(dB).array() * G.array()).sum();
        double quad = 0.5 * rho * dB.squaredNorm();
        if (cfg.fit_intercept) {
            const Vec da = c.alpha - f_old.alpha;
            lin += gsum.dot(da);
            quad += 0.5 * rho * da.squaredNorm();
        }
        if (c.objective <= f_o + lin + quad + slack) return {rho, std::move(c)};
    }
    throw NonconvergenceError("line search exhausted 60 stepsize increases without majorizing the loss");
}

RrrParts rrr_components(const Dataset& d, int r) {
    if (r < 1 || r > d.m()) throw ConfigError("reduced rank must lie in [1, m]");
    DesignOps ops(d.X);
    Mat B_ols;
    Mat F;
    if (ops.ident) {
        B_ols = d.Y;
        F = d.Y;
    } else {
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(d.X);
        B_ols = cod.solve(d.Y);
        F = d.X * B_ols;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(F.transpose() * F);
    if (es.info() != Eigen::Success) throw StructuralError("eigendecomposition failed in the reduced-rank initializer");
    Mat V_r(d.m(), r);
    for (int j = 0; j < r; ++j) V_r.col(j) = es.eigenvectors().col(d.m() - 1 - j);
    Mat B_rrr = B_ols * V_r * V_r.transpose();
    return RrrParts{std::move(B_ols), std::move(V_r), std::move(B_rrr)};
}

Factorization init_rrr(const Dataset& d, int r, const KmeansConfig& km) {
    if (km.q < 1 || km.q > d.p()) throw ConfigError("cluster count q must lie in [1, p]");
    if (r > std::min(d.m(), d.p())) throw ConfigError("rank r cannot exceed min(m, p)");
    RrrParts parts = rrr_components(d, r);
    KmeansResult kr = kmeans_fit(parts.B_ols * parts.V_r, km);
    return Factorization(kr.structure.expand(), std::move(parts.V_r), Vec::Zero(d.m()));
}

FitResult fit(const Dataset& d, const FitConfig& cfg, const std::optional<Factorization>& init) {
    validate_config(d, cfg);

    // Quadratic loss with intercept: center once, fit without the intercept block,
    // and read the optimal intercept off the column means afterwards.
    if (d.loss == LossKind::Quadratic && cfg.fit_intercept) {
        const Vec xbar = d.X.colwise().mean().transpose();
        const Vec ybar = d.Y.colwise().mean().transpose();
        Dataset dc(d.Y.rowwise() - ybar.transpose(), d.X.rowwise() - xbar.transpose(), LossKind::Quadratic,
                   true, d.standardized);
        FitConfig sub = cfg;
        sub.fit_intercept = false;
        std::optional<Factorization> sub_init = init;
        if (sub_init) sub_init->alpha.setZero();
        FitResult res = fit(dc, sub, sub_init);
        const Mat B = res.factorization.S * res.factorization.V.transpose();
        res.factorization.alpha = ybar - B.transpose() * xbar;
        return res;
    }

    const Eigen::Index m = d.m(), p = d.p();
    DesignOps ops(d.X);

    std::optional<Factorization> fopt;
    std::vector<int> assign_cur;
    Mat mu_cur;
    if (init) {
        if (init->p() != p || init->m() != m) throw ConfigError("initializer dimensions do not match the data");
        if (init->r != cfg.r) throw ConfigError("initializer rank does not match the configured r");
        fopt = *init;
        ClusterStructure st = derive_row_structure(fopt->S);
        assign_cur = st.assign;
        mu_cur = st.mu;
    } else {
        RrrParts parts = rrr_components(d, cfg.r);
        KmeansConfig km = cfg.kmeans;
        km.q = cfg.q;
        km.seed = cfg.seed;
        const Mat L0 = parts.B_ols * parts.V_r;
        if (cfg.variant == Variant::RowWise) {
            KmeansResult kr = kmeans_fit(L0, km);
            assign_cur = kr.structure.assign;
            mu_cur = kr.structure.mu;
            fopt.emplace(kr.structure.expand(), std::move(parts.V_r), Vec::Zero(m));
        } else {
            Mat S0 = kmeans_columnwise(L0, cfg.q, km);
            ClusterStructure st = derive_row_structure(S0);
            assign_cur = st.assign;
            mu_cur = st.mu;
            fopt.emplace(std::move(S0), std::move(parts.V_r), Vec::Zero(m));
        }
    }
    Factorization& f = *fopt;
    Mat mu_ws = (cfg.variant == Variant::RowWise) ? pad_centroids(mu_cur, cfg.q) : Mat();

    std::vector<double> trace{objective_value(d, f)};

    double rho_bar = 0.0;
    if (cfg.rho_policy == RhoPolicy::Conservative) {
        double s = 0.0;
        if (cfg.fit_intercept) {
            Mat Xa(d.n(), p + 1);
            Xa.leftCols(p) = d.X;
            Xa.col(p).setOnes();
            s = spectral_norm(Xa);
        } else {
            s = spectral_norm(d.X);
        }
        rho_bar = std::max(*lipschitz_bound(d.loss) * s * s, 1e-12);
    }
    double rho0_next = 0.0;
    if (cfg.rho_policy == RhoPolicy::LineSearch) {
        if (cfg.rho_init > 0.0) {
            rho0_next = cfg.rho_init;
        } else {
            const double s = spectral_norm(d.X);
            const double lhat = lipschitz_bound(d.loss).value_or(1.0);
            rho0_next = std::max(1e-4, 0.05 * lhat * s * s);
        }
    }

    double rho_final = (cfg.rho_policy == RhoPolicy::Conservative) ? rho_bar : 0.0;
    bool converged = false;
    int outer = 0;
    for (int k = 1; k <= cfg.max_outer; ++k) {
        const double f_old = trace.back();
        const Mat B_old = f.S * f.V.transpose();
        const Mat Eta = predictor(ops, f.S, f.V, f.alpha);
        const Mat G = loss_gradient(d.loss, Eta, d.Y);
        const Mat XtG = ops.tmul(G);
        const Vec gsum = G.colwise().sum().transpose();

        StepBuilder build = [&](double rho) -> StepCandidate {
            Mat Ytil = B_old - XtG / rho;
            InnerOut io = inner_descent(Ytil, f.S, f.V, mu_ws, cfg);
            Vec a_new = f.alpha;
            if (cfg.fit_intercept) a_new -= gsum / rho;
            const double obj = loss_value(d.loss, predictor(ops, io.S, io.V, a_new), d.Y);
            return StepCandidate{std::move(io.S), std::move(io.V), std::move(io.mu),
                                 std::move(io.assign), std::move(a_new), obj};
        };

        double rho_used = rho_bar;
        std::optional<StepCandidate> cand;
        if (cfg.rho_policy == RhoPolicy::Conservative) {
            cand = build(rho_bar);
        } else {
            auto got = line_search_rho(d, f, build, rho0_next, cfg);
            rho_used = got.first;
            cand = std::move(got.second);
        }

        if (cand->objective > f_old) {
            // numerical floor: the majorizer admits the step but it no longer descends
            converged = true;
            break;
        }
        const Mat B_new = cand->S * cand->V.transpose();
        const double rel = (B_new - B_old).norm() / (B_old.norm() + 1e-12);
        f.S = std::move(cand->S);
        f.V = std::move(cand->V);
        f.alpha = std::move(cand->alpha);
        if (cfg.variant == Variant::RowWise) {
            mu_cur = cand->mu;
            mu_ws = mu_cur;
            assign_cur = std::move(cand->assign);
        }
        trace.push_back(cand->objective);
        outer = k;
        rho_final = rho_used;
        if (cfg.rho_policy == RhoPolicy::LineSearch) rho0_next = std::max(1e-4, cfg.shrink * rho_used);
        if (cfg.verbose)
            std::cerr << "outer " << k << "  objective " << trace.back() << "  rho " << rho_used
                      << "  relB " << rel << "\n";
        if (rel < cfg.eps) {
            converged = true;
            break;
        }
    }

    ClusterStructure clusters = (cfg.variant == Variant::RowWise)
                                    ? ClusterStructure(std::move(assign_cur), std::move(mu_cur))
                                    : derive_row_structure(f.S);
    const int q_eff = distinct_row_count(f.S, 0.0);
    const int r_eff = numerical_rank(clusters.mu);
    return FitResult{std::move(f), std::move(clusters), std::move(trace),
                     rho_final, outer, converged, d.loss, q_eff, r_eff};
}

WeightedFitResult fit_weighted(const Dataset& d, const Mat& Gamma, const FitConfig& cfg) {
    if (d.loss != LossKind::Quadratic) throw ConfigError("weighted fitting is defined for the quadratic loss");
    if (Gamma.rows() != d.m() || Gamma.cols() != d.m()) throw ConfigError("weight matrix must be m x m");
    if (!Gamma.allFinite()) throw DomainError("weight matrix has non-finite entries");
    const double scale = std::max(1.0, Gamma.cwiseAbs().maxCoeff());
    if ((Gamma - Gamma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw DomainError("weight matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (Gamma + Gamma.transpose())));
    if (es.info() != Eigen::Success) throw StructuralError("eigendecomposition of the weight matrix failed");
    const Vec ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.maxCoeff()))
        throw DomainError("weight matrix must be positive semidefinite");
    const Mat half = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();

    Dataset dw(d.Y * half, d.X, LossKind::Quadratic);
    FitResult fr = fit(dw, cfg);
    Mat B_w = fr.factorization.S * fr.factorization.V.transpose();
    Mat B_orig = B_w * half;
    return WeightedFitResult{std::move(fr), std::move(B_w), std::move(B_orig)};
}

FitResult fit_unsupervised(const Mat& Ydata, const FitConfig& cfg) {
    Dataset d(Ydata, Mat::Identity(Ydata.rows(), Ydata.rows()), LossKind::Quadratic);
    FitConfig sub = cfg;
    sub.fit_intercept = false;
    return fit(d, sub);
}

TraceFitResult fit_trace(const TraceProblem& prob, int q, const FitConfig& cfg) {
    const Eigen::Index n = prob.X.rows(), p = prob.X.cols();
    if (q < 1 || q > n) throw ConfigError("segment count must lie in [1, n]");
    if (!(cfg.grow > 1.0)) throw ConfigError("line search growth factor must exceed 1");
    if (!(cfg.shrink > 0.0 && cfg.shrink <= 1.0)) throw ConfigError("stepsize relaxation must lie in (0, 1]");
    if (!(cfg.eps > 0.0) || !(cfg.inner_tol > 0.0)) throw ConfigError("tolerances must be positive");
    if (cfg.max_outer < 1 || cfg.max_inner < 1) throw ConfigError("iteration caps must be at least 1");
    if (cfg.rho_init < 0.0) throw ConfigError("rho_init must be nonnegative (0 = automatic)");

    const int r = static_cast<int>(std::min<Eigen::Index>(q, p));
    FitConfig icfg = cfg;
    icfg.variant = Variant::RowWise;
    icfg.q = q;
    icfg.r = r;

    const auto predict = [&](const Mat& B) { return Vec((prob.X.array() * B.array()).rowwise().sum()); };
    const auto objective = [&](const Mat& B) { return 0.5 * (prob.y - predict(B)).squaredNorm(); };

    const double row_curv = std::max(prob.X.rowwise().squaredNorm().maxCoeff(), 1e-12);
    const double rho_seed = (cfg.rho_init > 0.0) ? cfg.rho_init : std::max(1e-4, 0.05 * row_curv);

    struct State {
        Mat S, V, mu;
        std::vector<int> assign;
        std::vector<double> trace;
        double rho0 = 0.0;
        bool converged = false;
        int outer = 0;
    };

    // exact factorization of a stack of group coefficient rows (q x p, rank <= r)
    const auto from_groups = [&](const Mat& Bq, std::vector<int> lab) {
        State st;
        Eigen::BDCSVD<Mat> svd(Bq, Eigen::ComputeThinV);
        st.V = svd.matrixV().leftCols(r);
        st.mu = Bq * st.V;
        st.S.resize(n, r);
        for (Eigen::Index i = 0; i < n; ++i) st.S.row(i) = st.mu.row(lab[static_cast<std::size_t>(i)] - 1);
        st.assign = std::move(lab);
        st.trace.push_back(objective(st.S * st.V.transpose()));
        st.rho0 = rho_seed;
        return st;
    };

    // least-squares coefficients per labeled group; empty groups keep the fallback row
    const auto group_refit = [&](const std::vector<int>& lab, const Mat& fallback) {
        Mat Bq = fallback;
        for (int g = 1; g <= q; ++g) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index i = 0; i < n; ++i)
                if (lab[static_cast<std::size_t>(i)] == g) idx.push_back(i);
            if (idx.empty()) continue;
            Mat Xg(static_cast<Eigen::Index>(idx.size()), p);
            Vec yg(static_cast<Eigen::Index>(idx.size()));
            for (std::size_t t = 0; t < idx.size(); ++t) {
                Xg.row(static_cast<Eigen::Index>(t)) = prob.X.row(idx[t]);
                yg(static_cast<Eigen::Index>(t)) = prob.y(idx[t]);
            }
            Bq.row(g - 1) = Eigen::ColPivHouseholderQR<Mat>(Xg).solve(yg).transpose();
        }
        return Bq;
    };

    // proximal descent for at most `iters` outer steps, appending to the state's trace
    const auto advance = [&](State& st, int iters) {
        for (int k = 1; k <= iters; ++k) {
            const double f_old = st.trace.back();
            const Mat B_old = st.S * st.V.transpose();
            const Vec resid = predict(B_old) - prob.y;
            const Mat G = resid.asDiagonal() * prob.X;
            const double slack = 1e-12 * (1.0 + std::abs(f_old));

            double rho = (cfg.rho_policy == RhoPolicy::Conservative) ? row_curv : st.rho0;
            std::optional<InnerOut> step;
            double f_new = 0.0;
            for (int t = 0; t <= 60; ++t, rho *= cfg.grow) {
                InnerOut io = inner_descent(B_old - G / rho, st.S, st.V, st.mu, icfg);
                const Mat dB = io.S * io.V.transpose() - B_old;
                f_new = objective(B_old + dB);
                const double bound = f_old + (G.array() * dB.array()).sum() + 0.5 * rho * dB.squaredNorm();
                if (f_new <= bound + slack) {
                    step = std::move(io);
                    break;
                }
                if (cfg.rho_policy == RhoPolicy::Conservative)
                    throw StructuralError("conservative stepsize failed to majorize the segmentation loss");
            }
            if (!step) throw NonconvergenceError("line search exhausted 60 stepsize increases during segmentation");
            if (f_new > f_old) {
                st.converged = true;
                return;
            }
            const double rel = (step->S * step->V.transpose() - B_old).norm() / (B_old.norm() + 1e-12);
            st.S = std::move(step->S);
            st.V = std::move(step->V);
            st.mu = std::move(step->mu);
            st.assign = std::move(step->assign);
            st.trace.push_back(f_new);
            st.outer += 1;
            if (cfg.rho_policy == RhoPolicy::LineSearch) st.rho0 = std::max(1e-4, cfg.shrink * rho);
            if (rel < cfg.eps) {
                st.converged = true;
                return;
            }
        }
    };

    // Alternation: exact per-group least squares, then nearest-model relabeling.
    // Each half-step lowers the same residual objective, so any appended trace
    // values stay monotone. Since q distinct rows already cap rank(B) at q, the
    // rank constraint is vacuous here and this is exact block descent.
    struct Alt {
        std::vector<int> lab;
        Mat Bq;
        double f = std::numeric_limits<double>::infinity();
        bool stable = false;
    };
    const auto alternate = [&](std::vector<int> lab0, Mat Bq0, double f_start, int rounds,
                               std::vector<double>* tr) {
        Alt out;
        out.lab = std::move(lab0);
        out.Bq = std::move(Bq0);
        out.f = f_start;
        for (int round = 0; round < rounds; ++round) {
            const Mat Bq_new = group_refit(out.lab, out.Bq);
            const Mat P = prob.X * Bq_new.transpose();  // n x q, per-group predictions
            std::vector<int> lab_new = out.lab;
            bool changed = false;
            double f_new = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                int gbest = lab_new[static_cast<std::size_t>(i)];
                double ebest = std::abs(prob.y(i) - P(i, gbest - 1));
                for (int g = 1; g <= q; ++g) {
                    const double e = std::abs(prob.y(i) - P(i, g - 1));
                    if (e < ebest) {
                        ebest = e;
                        gbest = g;
                    }
                }
                changed = changed || (gbest != lab_new[static_cast<std::size_t>(i)]);
                lab_new[static_cast<std::size_t>(i)] = gbest;
                f_new += 0.5 * ebest * ebest;
            }
            if (f_new > out.f + 1e-12 * (1.0 + std::abs(out.f))) break;
            out.Bq = Bq_new;
            out.lab = std::move(lab_new);
            if (tr && f_new < tr->back()) tr->push_back(f_new);
            out.f = f_new;
            if (!changed) {
                out.stable = true;
                break;
            }
        }
        return out;
    };
    const double inf = std::numeric_limits<double>::infinity();

    // Multi-start: one deterministic seed (cluster the per-sample least-norm
    // coefficient rows) plus seeded random labelings, each concentrated by the
    // alternation; the segmentation surface has many local optima, so restarts
    // do the heavy lifting before the proximal loop drives the winner home.
    Alt best;
    {
        Mat B0 = Mat::Zero(n, p);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s2 = prob.X.row(i).squaredNorm();
            if (s2 > 0.0) B0.row(i) = (prob.y(i) / s2) * prob.X.row(i);
        }
        Eigen::BDCSVD<Mat> svd(B0, Eigen::ComputeThinV);
        KmeansConfig km = cfg.kmeans;
        km.q = q;
        km.seed = cfg.seed;
        KmeansResult kr = kmeans_fit(B0 * svd.matrixV().leftCols(r), km);
        best = alternate(kr.structure.assign, Mat::Zero(q, p), inf, 60, nullptr);
    }
    const int n_restarts = (q > 1) ? 19 : 0;
    for (int s = 0; s < n_restarts; ++s) {
        Rng rng(cfg.seed + 0x5e21u + static_cast<std::uint64_t>(s) * 0x9e3779b97f4a7c15ull);
        std::vector<int> lab(static_cast<std::size_t>(n));
        for (auto& g : lab) g = static_cast<int>(rng.below(static_cast<std::uint64_t>(q))) + 1;
        Alt a = alternate(std::move(lab), Mat::Zero(q, p), inf, 60, nullptr);
        if (a.f < best.f) best = a;
    }

    State st = from_groups(best.Bq, std::move(best.lab));
    advance(st, cfg.max_outer);
    Alt fin = alternate(std::move(st.assign), st.mu * st.V.transpose(), st.trace.back(), 100,
                        &st.trace);
    const bool converged = st.converged || fin.stable;

    return TraceFitResult{std::move(fin.lab), std::move(fin.Bq), 2.0 * st.trace.back(),
                          std::move(st.trace), converged, st.outer};
}

}  // namespace crl
