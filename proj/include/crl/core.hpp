#pragma once

#include <vector>

#include <Eigen/Core>

#include "crl/errors.hpp"

namespace crl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class LossKind { Quadratic, Logistic, Poisson };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

// Problem instance: responses Y (n x m), design X (n x p), and the loss family.
// Immutable after construction; all invariants checked eagerly.
struct Dataset {
    Mat Y;
    Mat X;
    LossKind loss = LossKind::Quadratic;
    bool centered = false;
    bool standardized = false;

    Dataset(Mat Y_, Mat X_, LossKind loss_, bool centered_ = false, bool standardized_ = false);

    Eigen::Index n() const { return Y.rows(); }
    Eigen::Index m() const { return Y.cols(); }
    Eigen::Index p() const { return X.cols(); }
};

// Factorization B = S V^T with orthonormal V (m x r), clustering vectors S (p x r),
// and intercept alpha (length m).
struct Factorization {
    Mat S;
    Mat V;
    Vec alpha;
    int r = 0;

    Factorization(Mat S_, Mat V_, Vec alpha_);

    Eigen::Index p() const { return S.rows(); }
    Eigen::Index m() const { return V.rows(); }
};

// Cluster assignment (labels 1..q, every label occupied) plus centroid matrix mu (q x r).
// S is reconstructed by copying centroid rows, so solver-produced S has exact row ties.
struct ClusterStructure {
    std::vector<int> assign;
    Mat mu;
    int q = 0;

    ClusterStructure(std::vector<int> assign_, Mat mu_);

    // S[j,:] = mu[assign[j]-1,:], exact copies
    Mat expand() const;
};

struct CoefficientMatrix {
    Mat B;

    explicit CoefficientMatrix(Mat B_);
};

CoefficientMatrix compose_coefficients(const Factorization& f);

// Number of row-equivalence classes under max-abs difference <= tol (transitive closure).
// tol = 0 is exact equality; the all-equal matrix (including B = 0) counts as 1.
int distinct_row_count(const Mat& B, double tol);
// User-facing default tolerance for externally supplied matrices: 1e-12 * max|B|.
int distinct_row_count(const Mat& B);

// Count of singular values > rel_tol * sigma_max; 0 for the zero matrix.
int numerical_rank(const Mat& B, double rel_tol = 1e-10);

// Center the columns of X (and of Y when center_y); scale X columns to unit sample
// standard deviation when scale_x. Constant columns are left at zero.
Dataset standardize_columns(const Dataset& d, bool center_y, bool scale_x);

}  // namespace crl
