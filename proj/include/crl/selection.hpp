#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crl/core.hpp"
#include "crl/solver.hpp"

namespace crl {

enum class PicKind { PlugIn, ScaleFreeFractional, ScaleFreeGeneral, LogForm };

const char* pic_kind_name(PicKind kind);
PicKind pic_kind_from_name(const std::string& name);

// Criterion family. Constants are interpreted per kind:
//   PlugIn              score = l0(XB; Y) + A * sigma2 * P_o     (sigma2 <= 0 requests a per-loss estimate)
//   ScaleFreeFractional score = ||Y - XB||^2 / (mn - A1(q^rank_x + m)r - A2(p - q)ln q), quadratic only
//   ScaleFreeGeneral    score = (l0 + b*(Y)) / (1 - delta), delta = A P_o / (mn / kappa)
//   LogForm             score = n ln(RSS) + A1 p_eff q + A2 (n - q) ln q   (segmentation, r = q)
struct PicVariant {
    PicKind kind = PicKind::ScaleFreeFractional;
    double sigma2 = 0.0;
    double A = 2.0;
    double A0 = 0.0;    // ScaleFreeGeneral theory constant, must exceed A
    double kappa = 1.0; // curvature ratio; 1 for the quadratic loss, user-supplied otherwise
    double A1 = 3.0;
    double A2 = 2.5;

    static PicVariant plug_in(double sigma2, double A = 2.0);
    static PicVariant fractional(double A1 = 3.0, double A2 = 2.5);
    static PicVariant general(double A, double A0, double kappa = 1.0);
    static PicVariant log_form(double A1 = 1.5, double A2 = 1.1);
};

// P_o(q, r) = (min(q, rank_x) + m) r + (p - q) ln q, natural log.
double penalty_po(int qv, int rv, int p, int m, int rank_x);

// Plug-in criterion at a composed coefficient matrix; q and r are read off B itself.
double pic_score(const Dataset& d, const CoefficientMatrix& B, const PicVariant& variant);

// Scale-free criteria; nullopt means the candidate is eliminated (nonpositive
// denominator, or delta >= 1).
std::optional<double> sf_pic_fractional(const Dataset& d, const CoefficientMatrix& B,
                                        double A1 = 3.0, double A2 = 2.5);
std::optional<double> sf_pic_general(const Dataset& d, const CoefficientMatrix& B,
                                     const PicVariant& variant);

// Segmentation criterion; residual_ss = 0 returns -inf (degenerate perfect fit).
double sf_pic_log(double residual_ss, int n, int p_eff, int qv, double A1 = 1.5, double A2 = 1.1);

// Preliminary noise scale for the plug-in criterion: quadratic = mean squared
// residual of the rank-r_init reduced-rank fit, logistic = 1/4, Poisson =
// Pearson-style dispersion around the reduced-rank fitted means.
double estimate_sigma2(const Dataset& d, int r_init);

struct CandidateRow {
    int q = 0;
    int r = 0;
    int q_eff = 0;   // occupied clusters of the fitted structure
    int r_eff = 0;   // numerical rank of the fitted centroids
    double score = 0.0;
    double loss = 0.0;
    double penalty = 0.0;
    std::string status;  // "ok", "eliminated: ...", "degenerate: ..."
    bool eliminated = false;
    bool converged = false;
};

struct SelectionReport {
    PicKind kind = PicKind::ScaleFreeFractional;
    double sigma2_used = 0.0;  // plug-in only
    std::vector<CandidateRow> candidates;
    int q_best = 0;
    int r_best = 0;
};

// Fit and score every feasible grid point (candidates run on `jobs` worker
// threads; the report is assembled in deterministic grid order). Ties break
// toward smaller q, then smaller r. Throws when every candidate is eliminated.
SelectionReport select_over_grid(const Dataset& d, const std::vector<int>& q_grid,
                                 const std::vector<int>& r_grid, const FitConfig& cfg_base,
                                 const PicVariant& variant, int jobs = 1);

}  // namespace crl
