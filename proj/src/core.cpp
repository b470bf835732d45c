#include "crl/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

namespace crl {

const char* loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::Quadratic: return "quadratic";
        case LossKind::Logistic: return "logistic";
        case LossKind::Poisson: return "poisson";
    }
    return "?";
}

LossKind loss_from_name(const std::string& name) {
    if (name == "quadratic") return LossKind::Quadratic;
    if (name == "logistic") return LossKind::Logistic;
    if (name == "poisson") return LossKind::Poisson;
    throw ConfigError("unknown loss '" + name + "' (expected quadratic|logistic|poisson)");
}

namespace {

void require_finite(const Mat& M, const char* what) {
    if (!M.allFinite()) throw StructuralError(std::string(what) + " contains NaN/Inf");
}

}  // namespace

Dataset::Dataset(Mat Y_, Mat X_, LossKind loss_, bool centered_, bool standardized_)
    : Y(std::move(Y_)), X(std::move(X_)), loss(loss_), centered(centered_), standardized(standardized_) {
    if (Y.rows() != X.rows())
        throw StructuralError("Y and X row counts differ (" + std::to_string(Y.rows()) + " vs " +
                              std::to_string(X.rows()) + ")");
    if (Y.rows() < 1) throw StructuralError("dataset needs at least one row");
    if (Y.cols() < 1 || X.cols() < 1) throw StructuralError("empty Y or X (m=0 or p=0)");
    require_finite(Y, "Y");
    require_finite(X, "X");
    if (loss == LossKind::Logistic && ((Y.array() < 0.0).any() || (Y.array() > 1.0).any()))
        throw DomainError("logistic responses must lie in [0,1]");
    if (loss == LossKind::Poisson && (Y.array() < 0.0).any())
        throw DomainError("poisson responses must be nonnegative");
    if (centered) {
        const double n = static_cast<double>(Y.rows());
        auto check = [&](const Mat& M, const char* what) {
            for (Eigen::Index j = 0; j < M.cols(); ++j) {
                const double scale = 1.0 + M.col(j).cwiseAbs().maxCoeff();
                if (std::abs(M.col(j).sum()) > 1e-8 * n * scale)
                    throw StructuralError(std::string(what) + " flagged centered but column " +
                                          std::to_string(j) + " is not");
            }
        };
        check(Y, "Y");
        check(X, "X");
    }
}

Factorization::Factorization(Mat S_, Mat V_, Vec alpha_)
    : S(std::move(S_)), V(std::move(V_)), alpha(std::move(alpha_)), r(static_cast<int>(S.cols())) {
    if (S.cols() != V.cols()) throw StructuralError("S and V must share the column count r");
    if (alpha.size() != V.rows()) throw StructuralError("alpha length must equal m = rows(V)");
    if (r < 1) throw StructuralError("r must be positive");
    if (r > std::min(V.rows(), S.rows()))
        throw StructuralError("r exceeds min(m, p) = " + std::to_string(std::min(V.rows(), S.rows())));
    require_finite(S, "S");
    require_finite(V, "V");
    const Mat gram = V.transpose() * V - Mat::Identity(r, r);
    if (gram.cwiseAbs().maxCoeff() > 1e-10)
        throw StructuralError("V is not orthonormal (max |V^T V - I| = " +
                              std::to_string(gram.cwiseAbs().maxCoeff()) + ")");
}

ClusterStructure::ClusterStructure(std::vector<int> assign_, Mat mu_)
    : assign(std::move(assign_)), mu(std::move(mu_)), q(static_cast<int>(mu.rows())) {
    if (q < 1) throw StructuralError("centroid matrix is empty");
    if (assign.empty()) throw StructuralError("assignment vector is empty");
    require_finite(mu, "mu");
    std::vector<char> seen(static_cast<size_t>(q), 0);
    for (int a : assign) {
        if (a < 1 || a > q) throw StructuralError("cluster label " + std::to_string(a) + " outside 1.." + std::to_string(q));
        seen[static_cast<size_t>(a - 1)] = 1;
    }
    for (int k = 0; k < q; ++k)
        if (!seen[static_cast<size_t>(k)])
            throw StructuralError("cluster " + std::to_string(k + 1) + " is empty");
}

Mat ClusterStructure::expand() const {
    Mat S(static_cast<Eigen::Index>(assign.size()), mu.cols());
    for (Eigen::Index j = 0; j < S.rows(); ++j) S.row(j) = mu.row(assign[static_cast<size_t>(j)] - 1);
    return S;
}

CoefficientMatrix::CoefficientMatrix(Mat B_) : B(std::move(B_)) {
    if (B.rows() < 1 || B.cols() < 1) throw StructuralError("coefficient matrix is empty");
    require_finite(B, "B");
}

CoefficientMatrix compose_coefficients(const Factorization& f) {
    return CoefficientMatrix(f.S * f.V.transpose());
}

int distinct_row_count(const Mat& B, double tol) {
    const Eigen::Index p = B.rows();
    if (p < 1) throw StructuralError("distinct_row_count on empty matrix");
    if (tol == 0.0) {
        // exact equality: order rows lexicographically
        auto cmp = [&](Eigen::Index a, Eigen::Index b) {
            for (Eigen::Index j = 0; j < B.cols(); ++j) {
                if (B(a, j) < B(b, j)) return true;
                if (B(a, j) > B(b, j)) return false;
            }
            return false;
        };
        std::map<Eigen::Index, int, decltype(cmp)> classes(cmp);
        for (Eigen::Index i = 0; i < p; ++i) classes.emplace(i, 0);
        return static_cast<int>(classes.size());
    }
    // tolerance comparisons are not transitive; count classes of the transitive closure
    std::vector<Eigen::Index> parent(static_cast<size_t>(p));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    };
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) {
            if ((B.row(i) - B.row(j)).cwiseAbs().maxCoeff() <= tol) {
                const Eigen::Index a = find(i), b = find(j);
                if (a != b) parent[static_cast<size_t>(a)] = b;
            }
        }
    int count = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        if (find(i) == i) ++count;
    return count;
}

int distinct_row_count(const Mat& B) {
    const double scale = B.size() > 0 ? B.cwiseAbs().maxCoeff() : 0.0;
    return distinct_row_count(B, 1e-12 * scale);
}

int numerical_rank(const Mat& B, double rel_tol) {
    if (rel_tol <= 0.0 || rel_tol >= 1.0) throw ConfigError("numerical_rank rel_tol must be in (0,1)");
    if (B.size() == 0) return 0;
    Eigen::BDCSVD<Mat> svd(B);
    const Vec& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double cut = rel_tol * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    return rank;
}

Dataset standardize_columns(const Dataset& d, bool center_y, bool scale_x) {
    if (scale_x && d.n() < 2) throw ConfigError("column scaling needs at least 2 rows");
    const double n = static_cast<double>(d.n());
    Mat X = d.X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) X.col(j).array() -= X.col(j).mean();
    if (scale_x) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const double sd = std::sqrt(X.col(j).squaredNorm() / (n - 1.0));
            if (sd > 0.0) X.col(j) /= sd;
        }
    }
    Mat Y = d.Y;
    if (center_y)
        for (Eigen::Index j = 0; j < Y.cols(); ++j) Y.col(j).array() -= Y.col(j).mean();
    return Dataset(std::move(Y), std::move(X), d.loss, /*centered=*/center_y, /*standardized=*/scale_x);
}

}  // namespace crl
