#include "crl/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>

#include "crl/losses.hpp"

namespace crl {

namespace {

void validate_variant(const PicVariant& v) {
    switch (v.kind) {
        case PicKind::PlugIn:
            if (!(v.A > 0.0)) throw ConfigError("plug-in criterion needs A > 0");
            break;
        case PicKind::ScaleFreeFractional:
            if (!(v.A1 > 0.0 && v.A2 > 0.0)) throw ConfigError("fractional criterion constants must be positive");
            break;
        case PicKind::ScaleFreeGeneral:
            if (!(v.A > 0.0)) throw ConfigError("scale-free criterion needs A > 0");
            if (v.A0 != 0.0 && !(v.A0 > v.A)) throw ConfigError("scale-free criterion needs A0 > A");
            break;
        case PicKind::LogForm:
            if (!(v.A1 > 0.0 && v.A2 > 0.0)) throw ConfigError("log-form criterion constants must be positive");
            break;
    }
}

double fractional_denominator(int q, int r, int p, int m, int rank_x, Eigen::Index n,
                              double A1, double A2) {
    const double mn = static_cast<double>(m) * static_cast<double>(n);
    return mn - A1 * (std::min(q, rank_x) + m) * r - A2 * (p - q) * std::log(static_cast<double>(q));
}

double resolve_kappa(const Dataset& d, const PicVariant& v) {
    if (d.loss == LossKind::Quadratic) return v.kappa > 0.0 ? v.kappa : 1.0;
    if (!(v.kappa > 0.0))
        throw ConfigError("scale-free criterion needs a user-supplied curvature ratio for this loss");
    return v.kappa;
}

struct Scored {
    std::optional<double> score;
    std::string status = "ok";
};

}  // namespace

const char* pic_kind_name(PicKind kind) {
    switch (kind) {
        case PicKind::PlugIn: return "plugin";
        case PicKind::ScaleFreeFractional: return "sf";
        case PicKind::ScaleFreeGeneral: return "sf-general";
        case PicKind::LogForm: return "log";
    }
    throw ConfigError("unknown criterion kind");
}

PicKind pic_kind_from_name(const std::string& name) {
    if (name == "plugin") return PicKind::PlugIn;
    if (name == "sf") return PicKind::ScaleFreeFractional;
    if (name == "sf-general") return PicKind::ScaleFreeGeneral;
    if (name == "log") return PicKind::LogForm;
    throw ConfigError("unknown criterion '" + name + "' (expected plugin, sf, sf-general, or log)");
}

PicVariant PicVariant::plug_in(double sigma2, double A) {
    PicVariant v;
    v.kind = PicKind::PlugIn;
    v.sigma2 = sigma2;
    v.A = A;
    return v;
}

PicVariant PicVariant::fractional(double A1, double A2) {
    PicVariant v;
    v.kind = PicKind::ScaleFreeFractional;
    v.A1 = A1;
    v.A2 = A2;
    return v;
}

PicVariant PicVariant::general(double A, double A0, double kappa) {
    PicVariant v;
    v.kind = PicKind::ScaleFreeGeneral;
    v.A = A;
    v.A0 = A0;
    v.kappa = kappa;
    return v;
}

PicVariant PicVariant::log_form(double A1, double A2) {
    PicVariant v;
    v.kind = PicKind::LogForm;
    v.A1 = A1;
    v.A2 = A2;
    return v;
}

double penalty_po(int qv, int rv, int p, int m, int rank_x) {
    if (p < 1 || m < 1) throw ConfigError("penalty needs p >= 1 and m >= 1");
    if (qv < 1 || qv > p) throw ConfigError("penalty needs 1 <= q <= p");
    if (rv < 0 || rv > std::min(qv, m)) throw ConfigError("penalty needs 0 <= r <= min(q, m)");
    if (rank_x < 0) throw ConfigError("penalty needs rank_x >= 0");
    return (std::min(qv, rank_x) + m) * static_cast<double>(rv) +
           (p - qv) * std::log(static_cast<double>(qv));
}

double pic_score(const Dataset& d, const CoefficientMatrix& B, const PicVariant& variant) {
    if (variant.kind != PicKind::PlugIn) throw ConfigError("pic_score expects the plug-in criterion");
    validate_variant(variant);
    if (B.B.rows() != d.p() || B.B.cols() != d.m()) throw ConfigError("coefficient matrix does not match the data");
    const int q = distinct_row_count(B.B);
    const int r = numerical_rank(B.B);
    const int rank_x = numerical_rank(d.X);
    const double sigma2 = variant.sigma2 > 0.0
                              ? variant.sigma2
                              : estimate_sigma2(d, std::max(1, std::min<int>(static_cast<int>(d.m()), rank_x)));
    const double l0 = loss_value(d.loss, d.X * B.B, d.Y);
    return l0 + variant.A * sigma2 *
                    penalty_po(q, r, static_cast<int>(d.p()), static_cast<int>(d.m()), rank_x);
}

std::optional<double> sf_pic_fractional(const Dataset& d, const CoefficientMatrix& B,
                                        double A1, double A2) {
    if (d.loss != LossKind::Quadratic)
        throw ConfigError("the fractional criterion is defined for the quadratic loss");
    if (!(A1 > 0.0 && A2 > 0.0)) throw ConfigError("fractional criterion constants must be positive");
    if (B.B.rows() != d.p() || B.B.cols() != d.m()) throw ConfigError("coefficient matrix does not match the data");
    const int q = distinct_row_count(B.B);
    const int r = numerical_rank(B.B);
    const int rank_x = numerical_rank(d.X);
    const double rss = (d.Y - d.X * B.B).squaredNorm();
    const double denom = fractional_denominator(q, r, static_cast<int>(d.p()), static_cast<int>(d.m()),
                                                rank_x, d.n(), A1, A2);
    if (denom <= 0.0) return std::nullopt;
    return rss / denom;
}

std::optional<double> sf_pic_general(const Dataset& d, const CoefficientMatrix& B,
                                     const PicVariant& variant) {
    if (variant.kind != PicKind::ScaleFreeGeneral)
        throw ConfigError("sf_pic_general expects the scale-free general criterion");
    validate_variant(variant);
    if (B.B.rows() != d.p() || B.B.cols() != d.m()) throw ConfigError("coefficient matrix does not match the data");
    const double kappa = resolve_kappa(d, variant);
    const int q = distinct_row_count(B.B);
    const int r = numerical_rank(B.B);
    const int rank_x = numerical_rank(d.X);
    const double po = penalty_po(q, r, static_cast<int>(d.p()), static_cast<int>(d.m()), rank_x);
    const double mn = static_cast<double>(d.m()) * static_cast<double>(d.n());
    const double delta = variant.A * po / (mn / kappa);
    if (delta >= 1.0) return std::nullopt;
    const double gap = fenchel_gap(d.loss, d.X * B.B, d.Y);
    return gap / (1.0 - delta);
}

double sf_pic_log(double residual_ss, int n, int p_eff, int qv, double A1, double A2) {
    if (residual_ss < 0.0) throw DomainError("residual sum of squares cannot be negative");
    if (n < 1 || p_eff < 1) throw ConfigError("log-form criterion needs n >= 1 and p_eff >= 1");
    if (qv < 1 || qv > n) throw ConfigError("log-form criterion needs 1 <= q <= n");
    if (!(A1 > 0.0 && A2 > 0.0)) throw ConfigError("log-form criterion constants must be positive");
    if (residual_ss == 0.0) return -std::numeric_limits<double>::infinity();
    return n * std::log(residual_ss) + A1 * p_eff * qv +
           A2 * (n - qv) * std::log(static_cast<double>(qv));
}

double estimate_sigma2(const Dataset& d, int r_init) {
    const int r = std::max(1, std::min<int>(r_init, static_cast<int>(d.m())));
    switch (d.loss) {
        case LossKind::Quadratic: {
            const RrrParts parts = rrr_components(d, r);
            return (d.Y - d.X * parts.B_rrr).squaredNorm() /
                   (static_cast<double>(d.n()) * static_cast<double>(d.m()));
        }
        case LossKind::Logistic:
            return 0.25;
        case LossKind::Poisson: {
            const RrrParts parts = rrr_components(d, r);
            const Mat Mu = (d.X * parts.B_rrr).cwiseMax(0.1);
            return ((d.Y - Mu).array().square() / Mu.array()).mean();
        }
    }
    throw ConfigError("unknown loss kind");
}

SelectionReport select_over_grid(const Dataset& d, const std::vector<int>& q_grid,
                                 const std::vector<int>& r_grid, const FitConfig& cfg_base,
                                 const PicVariant& variant, int jobs) {
    if (q_grid.empty() || r_grid.empty()) throw ConfigError("selection grids must be nonempty");
    validate_variant(variant);
    if ((variant.kind == PicKind::ScaleFreeFractional || variant.kind == PicKind::LogForm) &&
        d.loss != LossKind::Quadratic)
        throw ConfigError("this criterion is defined for the quadratic loss");
    if (variant.kind == PicKind::ScaleFreeGeneral) resolve_kappa(d, variant);

    std::vector<int> qs = q_grid, rs = r_grid;
    std::sort(qs.begin(), qs.end());
    qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    std::sort(rs.begin(), rs.end());
    rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
    if (qs.front() < 1 || rs.front() < 1) throw ConfigError("grid values must be at least 1");

    const int p = static_cast<int>(d.p()), m = static_cast<int>(d.m());
    std::vector<std::pair<int, int>> grid;
    for (int q : qs) {
        if (q > p) continue;
        for (int r : rs) {
            if (r > std::min(m, p)) continue;
            if (cfg_base.variant == Variant::RowWise && r > q) continue;
            grid.emplace_back(q, r);
        }
    }
    if (grid.empty()) throw ConfigError("no feasible (q, r) grid point");

    double sigma2 = variant.sigma2;
    if (variant.kind == PicKind::PlugIn && !(sigma2 > 0.0)) {
        int r_max = 1;
        for (const auto& c : grid) r_max = std::max(r_max, c.second);
        sigma2 = estimate_sigma2(d, r_max);
    }
    const int rank_x = numerical_rank(d.X);
    const double mn = static_cast<double>(m) * static_cast<double>(d.n());

    std::vector<CandidateRow> rows(grid.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            try {
                FitConfig cfg = cfg_base;
                cfg.q = grid[i].first;
                cfg.r = grid[i].second;
                const FitResult fr = fit(d, cfg);
                const Mat B = fr.factorization.S * fr.factorization.V.transpose();
                Mat Eta = d.X * B;
                if (cfg.fit_intercept) Eta.rowwise() += fr.factorization.alpha.transpose();
                const double l0 = loss_value(d.loss, Eta, d.Y);
                const int q_s = fr.clusters.q;
                const int r_s = fr.r_eff;
                const double po = penalty_po(q_s, std::min(q_s, r_s), p, m, rank_x);

                CandidateRow row;
                row.q = cfg.q;
                row.r = cfg.r;
                row.q_eff = q_s;
                row.r_eff = r_s;
                row.loss = l0;
                row.penalty = po;
                row.converged = fr.converged;
                Scored sc;
                switch (variant.kind) {
                    case PicKind::PlugIn:
                        sc.score = l0 + variant.A * sigma2 * po;
                        break;
                    case PicKind::ScaleFreeFractional: {
                        const double rss = (d.Y - Eta).squaredNorm();
                        const double denom = fractional_denominator(q_s, std::min(q_s, r_s), p, m,
                                                                    rank_x, d.n(), variant.A1, variant.A2);
                        if (denom <= 0.0)
                            sc.status = "eliminated: nonpositive denominator";
                        else
                            sc.score = rss / denom;
                        break;
                    }
                    case PicKind::ScaleFreeGeneral: {
                        const double kappa = resolve_kappa(d, variant);
                        const double delta = variant.A * po / (mn / kappa);
                        if (delta >= 1.0) {
                            sc.status = "eliminated: delta >= 1";
                        } else {
                            const double gap = fenchel_gap(d.loss, Eta, d.Y);
                            sc.score = gap / (1.0 - delta);
                        }
                        break;
                    }
                    case PicKind::LogForm: {
                        const double rss = (d.Y - Eta).squaredNorm();
                        const double s = sf_pic_log(rss, static_cast<int>(d.n()), p, q_s,
                                                    variant.A1, variant.A2);
                        sc.score = s;
                        if (std::isinf(s)) sc.status = "degenerate: zero residual";
                        break;
                    }
                }
                if (sc.score) {
                    row.score = *sc.score;
                    row.status = sc.status;
                } else {
                    row.score = std::numeric_limits<double>::quiet_NaN();
                    row.status = sc.status;
                    row.eliminated = true;
                }
                rows[i] = std::move(row);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int nworkers = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
    if (nworkers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nworkers));
        for (int t = 0; t < nworkers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    SelectionReport report;
    report.kind = variant.kind;
    report.sigma2_used = (variant.kind == PicKind::PlugIn) ? sigma2 : 0.0;
    report.candidates = std::move(rows);
    bool have_winner = false;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : report.candidates) {
        if (row.eliminated) continue;
        if (!have_winner || row.score < best) {
            have_winner = true;
            best = row.score;
            report.q_best = row.q;
            report.r_best = row.r;
        }
    }
    if (!have_winner) throw StructuralError("every candidate on the grid was eliminated by the criterion");
    return report;
}

}  // namespace crl
