#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "crl/core.hpp"
#include "crl/kmeans.hpp"
#include "crl/simulate.hpp"

namespace crl {

enum class Variant { RowWise, RankWise };
enum class RhoPolicy { Conservative, LineSearch };

struct FitConfig {
    int q = 1;
    int r = 1;
    Variant variant = Variant::RowWise;
    RhoPolicy rho_policy = RhoPolicy::LineSearch;
    double rho_init = 0.0;   // LineSearch first-iteration ladder start; <= 0 picks a scale-aware default
    double grow = 2.0;       // ladder multiplier
    double shrink = 0.9;     // relaxation of rho at the start of each outer iteration
    double eps = 1e-6;       // outer stop: relative Frobenius change of B
    int max_outer = 500;
    int max_inner = 50;
    double inner_tol = 1e-8;  // inner stop: relative change of 1/2||Ytil - S V^T||^2
    KmeansConfig kmeans;      // n_starts/max_iter/tol for the initial clustering; q is taken from cfg.q
    bool fit_intercept = true;
    bool debug_checks = false;  // verify the orthogonal-decomposition identity on every inner step
    bool verbose = false;       // per-iteration objective on stderr
    std::uint64_t seed = 0;
};

struct FitResult {
    Factorization factorization;
    ClusterStructure clusters;
    std::vector<double> objective_trace;  // objective at the initializer, then after each outer step
    double rho_final = 0.0;
    int outer_iters = 0;
    bool converged = false;
    LossKind loss_kind = LossKind::Quadratic;
    int q_eff = 0;  // realized cluster count: distinct rows of S (exact ties)
    int r_eff = 0;  // realized rank: numerical rank of the centroid matrix
};

double objective_value(const Dataset& d, const Factorization& f);

// Ytil = B - X^T grad l0(1 alpha^T + X B) / rho, the linearized target (p x m)
Mat pseudo_response(const Dataset& d, const Factorization& f, double rho);

// alpha - [grad l0]^T 1 / rho
Vec intercept_step(const Dataset& d, const Factorization& f, double rho);

// argmax_{V^T V = I} <W, V> via SVD of W; deterministic orthonormal completion
// when W is column-rank-deficient.
Mat procrustes_rotation(const Mat& W);

// Block-coordinate descent on 1/2||Ytil - S V^T||_F^2: Procrustes update of V, then
// clustering of Ytil V (warm-started from the distinct rows of S). Never returns a
// worse inner objective than f0's.
std::pair<Factorization, ClusterStructure> inner_sv_descent(const Mat& Ytil, const Factorization& f0,
                                                            const FitConfig& cfg);

// One candidate step of the outer iteration at inverse stepsize rho.
struct StepCandidate {
    Mat S;
    Mat V;
    Mat mu;
    std::vector<int> assign;
    Vec alpha;
    double objective = 0.0;  // full loss at the candidate point
};
using StepBuilder = std::function<StepCandidate(double rho)>;

// Geometric ladder rho0 * grow^k, accepting the first candidate with
// f(new) <= G_rho(new; old); Conservative policy bypasses the search.
std::pair<double, StepCandidate> line_search_rho(const Dataset& d, const Factorization& f_old,
                                                 const StepBuilder& build, double rho0,
                                                 const FitConfig& cfg);

FitResult fit(const Dataset& d, const FitConfig& cfg,
              const std::optional<Factorization>& init = std::nullopt);

// Reduced-rank-regression pieces used for initialization and variance plug-ins:
// B_ols = (X^T X)^+ X^T Y, V_r = leading r eigenvectors of Y^T P_X Y, B_rrr = B_ols V_r V_r^T.
struct RrrParts {
    Mat B_ols;
    Mat V_r;
    Mat B_rrr;
};
RrrParts rrr_components(const Dataset& d, int r);

Factorization init_rrr(const Dataset& d, int r, const KmeansConfig& km);

struct WeightedFitResult {
    FitResult fit;
    Mat B_whitened;  // S V^T on the whitened response scale
    Mat B_original;  // S V^T Gamma^{1/2}
};
WeightedFitResult fit_weighted(const Dataset& d, const Mat& Gamma, const FitConfig& cfg);

// X = I_n: clusters the rows of Ydata itself.
FitResult fit_unsupervised(const Mat& Ydata, const FitConfig& cfg);

// Trace-regression segmentation: per-sample coefficient rows constrained to q groups
// (rank r = q). Returns per-sample labels and the q per-group coefficient vectors.
struct TraceFitResult {
    std::vector<int> labels;  // length n, values 1..q
    Mat group_coefs;          // q x p
    double residual_ss = 0.0;
    std::vector<double> objective_trace;
    bool converged = false;
    int outer_iters = 0;
};
TraceFitResult fit_trace(const TraceProblem& prob, int q, const FitConfig& cfg);

}  // namespace crl
