#include "crl/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace crl {

namespace {

using nlohmann::json;

const char* variant_name(Variant v) {
    return v == Variant::RowWise ? "rowwise" : "rankwise";
}

Variant variant_from_name(const std::string& s) {
    if (s == "rowwise") return Variant::RowWise;
    if (s == "rankwise") return Variant::RankWise;
    throw DomainError("unknown constraint variant '" + s + "'");
}

const char* policy_name(RhoPolicy p) {
    return p == RhoPolicy::Conservative ? "conservative" : "linesearch";
}

RhoPolicy policy_from_name(const std::string& s) {
    if (s == "conservative") return RhoPolicy::Conservative;
    if (s == "linesearch") return RhoPolicy::LineSearch;
    throw DomainError("unknown stepsize policy '" + s + "'");
}

std::vector<double> flatten_row_major(const Mat& M) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(M.size()));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) out.push_back(M(i, j));
    return out;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string model_to_json(const FitResult& fit, const FitConfig& cfg) {
    json j;
    j["loss"] = loss_name(fit.loss_kind);
    j["q"] = cfg.q;
    j["r"] = cfg.r;
    j["seed"] = cfg.seed;
    j["alpha"] = std::vector<double>(fit.factorization.alpha.data(),
                                     fit.factorization.alpha.data() + fit.factorization.alpha.size());
    j["V"] = flatten_row_major(fit.factorization.V);
    json cent = json::array();
    for (Eigen::Index i = 0; i < fit.clusters.mu.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < fit.clusters.mu.cols(); ++k) row.push_back(fit.clusters.mu(i, k));
        cent.push_back(std::move(row));
    }
    j["centroids"] = std::move(cent);
    j["assign"] = fit.clusters.assign;
    j["objective_trace"] = fit.objective_trace;
    j["config"] = {{"variant", variant_name(cfg.variant)},
                   {"rho_policy", policy_name(cfg.rho_policy)},
                   {"rho_init", cfg.rho_init},
                   {"grow", cfg.grow},
                   {"shrink", cfg.shrink},
                   {"eps", cfg.eps},
                   {"max_outer", cfg.max_outer},
                   {"max_inner", cfg.max_inner},
                   {"inner_tol", cfg.inner_tol},
                   {"fit_intercept", cfg.fit_intercept},
                   {"debug_checks", cfg.debug_checks},
                   {"verbose", cfg.verbose},
                   {"kmeans", {{"n_starts", cfg.kmeans.n_starts},
                               {"max_iter", cfg.kmeans.max_iter},
                               {"tol", cfg.kmeans.tol}}}};
    j["stats"] = {{"rho_final", fit.rho_final},
                  {"outer_iters", fit.outer_iters},
                  {"converged", fit.converged},
                  {"q_eff", fit.q_eff},
                  {"r_eff", fit.r_eff}};
    return j.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);

        FitConfig cfg;
        cfg.q = j.at("q").get<int>();
        cfg.r = j.at("r").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        const json& jc = j.at("config");
        cfg.variant = variant_from_name(jc.at("variant").get<std::string>());
        cfg.rho_policy = policy_from_name(jc.at("rho_policy").get<std::string>());
        cfg.rho_init = jc.at("rho_init").get<double>();
        cfg.grow = jc.at("grow").get<double>();
        cfg.shrink = jc.at("shrink").get<double>();
        cfg.eps = jc.at("eps").get<double>();
        cfg.max_outer = jc.at("max_outer").get<int>();
        cfg.max_inner = jc.at("max_inner").get<int>();
        cfg.inner_tol = jc.at("inner_tol").get<double>();
        cfg.fit_intercept = jc.at("fit_intercept").get<bool>();
        cfg.debug_checks = jc.at("debug_checks").get<bool>();
        cfg.verbose = jc.at("verbose").get<bool>();
        const json& jk = jc.at("kmeans");
        cfg.kmeans.q = cfg.q;
        cfg.kmeans.n_starts = jk.at("n_starts").get<int>();
        cfg.kmeans.max_iter = jk.at("max_iter").get<int>();
        cfg.kmeans.tol = jk.at("tol").get<double>();
        cfg.kmeans.seed = cfg.seed;

        const LossKind loss = loss_from_name(j.at("loss").get<std::string>());
        const std::vector<double> alpha_v = j.at("alpha").get<std::vector<double>>();
        const Eigen::Index m = static_cast<Eigen::Index>(alpha_v.size());
        Vec alpha(m);
        for (Eigen::Index i = 0; i < m; ++i) alpha(i) = alpha_v[static_cast<std::size_t>(i)];

        const std::vector<double> v_flat = j.at("V").get<std::vector<double>>();
        const int r = cfg.r;
        if (m <= 0 || r <= 0 || v_flat.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(r))
            throw DomainError("model file: V has the wrong number of entries");
        Mat V(m, r);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index k = 0; k < r; ++k)
                V(i, k) = v_flat[static_cast<std::size_t>(i) * static_cast<std::size_t>(r) +
                                 static_cast<std::size_t>(k)];

        const json& jcent = j.at("centroids");
        Mat mu(static_cast<Eigen::Index>(jcent.size()), r);
        for (Eigen::Index i = 0; i < mu.rows(); ++i) {
            const auto row = jcent.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
            if (row.size() != static_cast<std::size_t>(r))
                throw DomainError("model file: centroid row has the wrong width");
            for (Eigen::Index k = 0; k < r; ++k) mu(i, k) = row[static_cast<std::size_t>(k)];
        }
        std::vector<int> assign = j.at("assign").get<std::vector<int>>();
        ClusterStructure clusters(std::move(assign), std::move(mu));
        Factorization fac(clusters.expand(), std::move(V), std::move(alpha));

        std::vector<double> trace = j.at("objective_trace").get<std::vector<double>>();
        const json& js = j.at("stats");
        FitResult res{std::move(fac),
                      std::move(clusters),
                      std::move(trace),
                      js.at("rho_final").get<double>(),
                      js.at("outer_iters").get<int>(),
                      js.at("converged").get<bool>(),
                      loss,
                      js.at("q_eff").get<int>(),
                      js.at("r_eff").get<int>()};
        return ModelFile{std::move(cfg), std::move(res)};
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("model file: ") + e.what());
    }
}

std::string report_to_json(const SelectionReport& rep) {
    json j;
    j["criterion"] = pic_kind_name(rep.kind);
    if (rep.kind == PicKind::PlugIn) j["sigma2"] = rep.sigma2_used;
    j["winner"] = {{"q", rep.q_best}, {"r", rep.r_best}};
    json rows = json::array();
    for (const auto& c : rep.candidates) {
        json row;
        row["q"] = c.q;
        row["r"] = c.r;
        row["q_eff"] = c.q_eff;
        row["r_eff"] = c.r_eff;
        if (c.eliminated || !std::isfinite(c.score))
            row["score"] = nullptr;
        else
            row["score"] = c.score;
        row["loss"] = c.loss;
        row["penalty"] = c.penalty;
        row["status"] = c.status.empty() ? "ok" : c.status;
        row["converged"] = c.converged;
        rows.push_back(std::move(row));
    }
    j["candidates"] = std::move(rows);
    return j.dump(2) + "\n";
}

std::string report_to_csv(const SelectionReport& rep) {
    std::ostringstream out;
    out << "q,r,score,loss,penalty,status\n";
    for (const auto& c : rep.candidates) {
        out << c.q << ',' << c.r << ',';
        if (!c.eliminated && std::isfinite(c.score)) out << fmt_double(c.score);
        out << ',' << fmt_double(c.loss) << ',' << fmt_double(c.penalty) << ','
            << (c.status.empty() ? "ok" : c.status) << '\n';
    }
    return out.str();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw DomainError("failed while reading '" + path + "'");
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw DomainError("failed while writing '" + path + "'");
}

}  // namespace crl
