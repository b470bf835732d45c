#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <exception>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crl/csv.hpp"
#include "crl/graph.hpp"
#include "crl/losses.hpp"
#include "crl/metrics.hpp"
#include "crl/selection.hpp"
#include "crl/serialize.hpp"
#include "crl/simulate.hpp"
#include "crl/solver.hpp"

namespace {

using namespace crl;

void print_error(const char* type, const std::string& msg) {
    nlohmann::json j;
    j["error"] = {{"type", type}, {"message", msg}};
    std::cerr << j.dump() << "\n";
}

std::vector<int> parse_grid(const std::string& s) {
    const auto bad = [&]() -> ConfigError {
        return ConfigError("bad grid '" + s + "' (expected A or A:B with A <= B)");
    };
    int a = 0, b = 0;
    const auto pos = s.find(':');
    try {
        if (pos == std::string::npos) {
            std::size_t used = 0;
            a = std::stoi(s, &used);
            if (used != s.size()) throw bad();
            b = a;
        } else {
            std::size_t used = 0;
            a = std::stoi(s.substr(0, pos), &used);
            if (used != pos) throw bad();
            const std::string tail = s.substr(pos + 1);
            b = std::stoi(tail, &used);
            if (used != tail.size()) throw bad();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw bad();
    }
    if (a < 1 || a > b) throw bad();
    std::vector<int> out;
    for (int v = a; v <= b; ++v) out.push_back(v);
    return out;
}

int resolve_jobs(int flag_jobs) {
    if (const char* env = std::getenv("CRL_JOBS"); env && *env) {
        try {
            std::size_t used = 0;
            const std::string s(env);
            flag_jobs = std::stoi(s, &used);
            if (used != s.size()) throw ConfigError("");
        } catch (...) {
            throw ConfigError("CRL_JOBS must be an integer");
        }
    }
    if (flag_jobs <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        flag_jobs = hw > 0 ? static_cast<int>(hw) : 1;
    }
    return flag_jobs;
}

double median_of(std::vector<double> v) {
    if (v.empty()) throw ConfigError("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return (v.size() % 2 == 1) ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Index-sharded worker pool; rethrows the first worker exception.
void run_pool(std::size_t count, int jobs, const std::function<void(std::size_t)>& work) {
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    const auto loop = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                work(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    const int nworkers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
    if (nworkers == 1) {
        loop();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nworkers));
        for (int t = 0; t < nworkers; ++t) pool.emplace_back(loop);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json matrix_rows_json(const Mat& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

struct FitOpts {
    std::string x_path, y_path, loss = "quadratic", weighted_path, out = "model.json";
    int q = 1, r = 1;
    bool rankwise = false, no_intercept = false, verbose = false;
    std::uint64_t seed = 0;
};

struct TuneOpts {
    std::string x_path, y_path, loss = "quadratic", q_grid, r_grid, pic = "sf";
    std::string out_prefix = "selection";
    double sigma2 = 0.0;
    bool rankwise = false, no_intercept = false, verbose = false;
    std::uint64_t seed = 0;
    int jobs = 0;
};

struct ClusterOpts {
    std::string data_path, edges_path, graph, out = "labels.csv";
    double bandwidth = 0.0;
    int k = 10, q = 1, r = 0, mbar = 0;
    bool unnormalized = false, no_whiten = false, one_based = false, verbose = false;
    std::uint64_t seed = 0;
};

struct SimOpts {
    std::string scenario, out_prefix = "sim";
    std::uint64_t seed = 0;
    int qstar = 0, m = 0, dim = 0, per_cluster = 0, n = 0, p = 0, rstar = 0;
    double side = 500.0, sigma2 = 1.0, tau = 0.2, sigma_b = 0.0, z_in = 15.0, z_out = 30.0;
};

struct BenchOpts {
    std::string suite, out;
    int reps = 10, jobs = 0;
    std::uint64_t seed = 0;
};

struct SegmentOpts {
    std::string x_path, y_path, q_grid, out_prefix = "segment";
    bool verbose = false;
    std::uint64_t seed = 0;
};

FitConfig base_config(int q, int r, bool rankwise, bool no_intercept, bool verbose,
                      std::uint64_t seed) {
    FitConfig cfg;
    cfg.q = q;
    cfg.r = r;
    cfg.variant = rankwise ? Variant::RankWise : Variant::RowWise;
    cfg.fit_intercept = !no_intercept;
    cfg.verbose = verbose;
    cfg.seed = seed;
    return cfg;
}

void run_fit(const FitOpts& o) {
    const Mat X = read_matrix_csv(o.x_path);
    const Mat Y = read_matrix_csv(o.y_path);
    const Dataset d(Y, X, loss_from_name(o.loss));
    const FitConfig cfg = base_config(o.q, o.r, o.rankwise, o.no_intercept, o.verbose, o.seed);
    reset_poisson_clamp();
    std::optional<FitResult> result;
    if (!o.weighted_path.empty()) {
        const Mat Gamma = read_matrix_csv(o.weighted_path);
        WeightedFitResult wr = fit_weighted(d, Gamma, cfg);
        write_matrix_csv(o.out + ".weighted.csv", wr.B_original);
        result = std::move(wr.fit);
    } else {
        result = fit(d, cfg);
    }
    if (d.loss == LossKind::Poisson && poisson_clamp_hit())
        std::cerr << "note: count-loss linear predictors were clamped during optimization\n";
    write_text_file(o.out, model_to_json(*result, cfg));
    std::cout << "fit: objective=" << fmt(result->objective_trace.back())
              << " outer_iters=" << result->outer_iters << " converged=" << (result->converged ? 1 : 0)
              << " q_eff=" << result->q_eff << " r_eff=" << result->r_eff << " out=" << o.out << "\n";
}

void run_tune(const TuneOpts& o) {
    const Mat X = read_matrix_csv(o.x_path);
    const Mat Y = read_matrix_csv(o.y_path);
    const Dataset d(Y, X, loss_from_name(o.loss));
    const std::vector<int> qs = parse_grid(o.q_grid);
    const std::vector<int> rs = parse_grid(o.r_grid);
    FitConfig cfg = base_config(1, 1, o.rankwise, o.no_intercept, false, o.seed);
    PicVariant variant;
    switch (pic_kind_from_name(o.pic)) {
        case PicKind::PlugIn: variant = PicVariant::plug_in(o.sigma2); break;
        case PicKind::ScaleFreeFractional: variant = PicVariant::fractional(); break;
        case PicKind::LogForm: variant = PicVariant::log_form(); break;
        case PicKind::ScaleFreeGeneral: variant = PicVariant::general(2.0, 4.0); break;
    }
    const SelectionReport rep = select_over_grid(d, qs, rs, cfg, variant, resolve_jobs(o.jobs));
    write_text_file(o.out_prefix + ".json", report_to_json(rep));
    write_text_file(o.out_prefix + ".csv", report_to_csv(rep));
    std::cout << "tune: selected q=" << rep.q_best << " r=" << rep.r_best << " out=" << o.out_prefix
              << ".{json,csv}\n";
}

void run_cluster(const ClusterOpts& o) {
    if (o.data_path.empty() == o.edges_path.empty())
        throw ConfigError("cluster needs exactly one of --data or --edges");
    Mat resp;
    if (!o.data_path.empty()) {
        const Mat D = read_matrix_csv(o.data_path);
        if (o.graph.empty()) {
            resp = D;
        } else {
            SimilarityGraph g = [&]() {
                if (o.graph == "gaussian") {
                    const double bw = o.bandwidth > 0.0 ? o.bandwidth : median_pairwise_distance(D);
                    return gaussian_similarity(D, bw);
                }
                if (o.graph == "mknn") return mutual_knn_similarity(D, o.k);
                throw ConfigError("unknown graph kind '" + o.graph + "' (expected gaussian or mknn)");
            }();
            const LaplacianSpec lap = graph_laplacian(g, !o.unnormalized);
            int mb = o.mbar > 0 ? o.mbar : 2 * o.q;
            mb = std::min<int>(mb, static_cast<int>(lap.L.rows()));
            resp = kernel_to_response(lap.L, KernelSource::Laplacian, mb, !o.no_whiten);
        }
    } else {
        const Mat W = read_edge_list(o.edges_path, o.one_based);
        const SimilarityGraph g(W, GraphKind::MutualKnn);
        const LaplacianSpec lap = graph_laplacian(g, !o.unnormalized);
        int mb = o.mbar > 0 ? o.mbar : 2 * o.q;
        mb = std::min<int>(mb, static_cast<int>(lap.L.rows()));
        resp = kernel_to_response(lap.L, KernelSource::Laplacian, mb, !o.no_whiten);
    }
    int r = o.r > 0 ? o.r : o.q;
    r = std::min<int>(r, static_cast<int>(std::min(resp.rows(), resp.cols())));
    r = std::min(r, o.q);
    FitConfig cfg = base_config(o.q, r, false, true, o.verbose, o.seed);
    const FitResult fr = fit_unsupervised(resp, cfg);
    write_labels_csv(o.out, fr.clusters.assign);
    std::cout << "cluster: q_eff=" << fr.q_eff << " r_eff=" << fr.r_eff
              << " objective=" << fmt(fr.objective_trace.back()) << " out=" << o.out << "\n";
}

void write_truth_json(const std::string& path, const GroundTruth& truth) {
    nlohmann::json t;
    t["labels"] = truth.labels;
    if (truth.centers) t["centers"] = matrix_rows_json(*truth.centers);
    if (truth.B_star) t["B_star"] = matrix_rows_json(*truth.B_star);
    write_text_file(path, t.dump(2) + "\n");
}

void run_simulate(const SimOpts& o) {
    std::vector<std::string> files;
    if (o.scenario == "setting1" || o.scenario == "setting2") {
        CentroidClustersSpec spec;
        spec.seed = o.seed;
        if (o.scenario == "setting2") {
            spec.q_star = 20;
            spec.centroid_dim = 50;
            spec.per_cluster = 50;
        }
        if (o.qstar > 0) spec.q_star = o.qstar;
        if (o.m > 0) spec.ambient_m = o.m;
        if (o.dim > 0) spec.centroid_dim = o.dim;
        if (o.per_cluster > 0) spec.per_cluster = o.per_cluster;
        spec.side = o.side;
        spec.sigma2 = o.sigma2;
        auto [data, truth] = gen_centroid_clusters(spec);
        write_matrix_csv(o.out_prefix + "_Y.csv", data);
        write_labels_csv(o.out_prefix + "_labels.csv", truth.labels);
        write_truth_json(o.out_prefix + "_truth.json", truth);
        files = {o.out_prefix + "_Y.csv", o.out_prefix + "_labels.csv", o.out_prefix + "_truth.json"};
    } else if (o.scenario == "regression") {
        RegressionSuiteSpec spec;
        spec.seed = o.seed;
        if (o.n > 0) spec.n = o.n;
        if (o.p > 0) spec.p = o.p;
        if (o.m > 0) spec.m = o.m;
        if (o.qstar > 0) spec.q_star = o.qstar;
        if (o.rstar > 0) spec.r_star = o.rstar;
        spec.tau = o.tau;
        spec.sigma_B = o.sigma_b;
        auto [d, truth] = gen_regression_suite(spec);
        write_matrix_csv(o.out_prefix + "_X.csv", d.X);
        write_matrix_csv(o.out_prefix + "_Y.csv", d.Y);
        write_labels_csv(o.out_prefix + "_labels.csv", truth.labels);
        write_matrix_csv(o.out_prefix + "_Bstar.csv", *truth.B_star);
        write_truth_json(o.out_prefix + "_truth.json", truth);
        files = {o.out_prefix + "_X.csv", o.out_prefix + "_Y.csv", o.out_prefix + "_labels.csv",
                 o.out_prefix + "_Bstar.csv", o.out_prefix + "_truth.json"};
    } else if (o.scenario == "planted") {
        PlantedPartitionSpec spec;
        spec.seed = o.seed;
        if (o.n > 0) spec.n = o.n;
        if (o.qstar > 0) spec.q_star = o.qstar;
        spec.z_in = o.z_in;
        spec.z_out = o.z_out;
        auto [W, truth] = gen_planted_partition(spec);
        write_matrix_csv(o.out_prefix + "_W.csv", W);
        write_labels_csv(o.out_prefix + "_labels.csv", truth.labels);
        write_truth_json(o.out_prefix + "_truth.json", truth);
        files = {o.out_prefix + "_W.csv", o.out_prefix + "_labels.csv", o.out_prefix + "_truth.json"};
    } else {
        throw ConfigError("unknown scenario '" + o.scenario +
                          "' (expected setting1, setting2, regression, or planted)");
    }
    std::cout << "simulate: wrote";
    for (const auto& f : files) std::cout << ' ' << f;
    std::cout << "\n";
}

void emit_csv(const std::string& out, const std::string& text) {
    if (out.empty())
        std::cout << text;
    else {
        write_text_file(out, text);
        std::cout << "bench: wrote " << out << "\n";
    }
}

void bench_b2(const BenchOpts& o, int jobs) {
    const int reps = o.reps;
    std::vector<double> ca_full(reps), mse_full(reps), ca_half(reps), mse_half(reps);
    std::vector<double> ca_s2(reps), mse_s2(reps);
    run_pool(static_cast<std::size_t>(reps), jobs, [&](std::size_t i) {
        const std::uint64_t seed = o.seed + i;
        {
            CentroidClustersSpec spec;
            spec.seed = seed;
            auto [data, truth] = gen_centroid_clusters(spec);
            Mat Ystar(data.rows(), data.cols());
            for (Eigen::Index row = 0; row < data.rows(); ++row)
                Ystar.row(row) = truth.centers->row(truth.labels[static_cast<std::size_t>(row)] - 1);
            for (int rv : {10, 5}) {
                FitConfig cfg = base_config(10, rv, false, true, false, seed);
                const FitResult fr = fit_unsupervised(data, cfg);
                const Mat B = fr.factorization.S * fr.factorization.V.transpose();
                const double ca = clustering_accuracy(LabelPair(truth.labels, fr.clusters.assign));
                const double mse = approx_mse(Ystar, B);
                if (rv == 10) {
                    ca_full[i] = ca;
                    mse_full[i] = mse;
                } else {
                    ca_half[i] = ca;
                    mse_half[i] = mse;
                }
            }
        }
        {
            CentroidClustersSpec spec;
            spec.q_star = 20;
            spec.centroid_dim = 50;
            spec.per_cluster = 50;
            spec.seed = seed + 0x100000;
            auto [data, truth] = gen_centroid_clusters(spec);
            Mat Ystar(data.rows(), data.cols());
            for (Eigen::Index row = 0; row < data.rows(); ++row)
                Ystar.row(row) = truth.centers->row(truth.labels[static_cast<std::size_t>(row)] - 1);
            FitConfig cfg = base_config(20, 20, false, true, false, seed);
            const FitResult fr = fit_unsupervised(data, cfg);
            const Mat B = fr.factorization.S * fr.factorization.V.transpose();
            ca_s2[i] = clustering_accuracy(LabelPair(truth.labels, fr.clusters.assign));
            mse_s2[i] = approx_mse(Ystar, B);
        }
    });
    std::ostringstream csv;
    csv << "setting,method,median_ca,median_mse\n";
    csv << "setting1,crl_r_eq_q," << fmt(median_of(ca_full)) << ',' << fmt(median_of(mse_full)) << '\n';
    csv << "setting1,crl_r_half_q," << fmt(median_of(ca_half)) << ',' << fmt(median_of(mse_half)) << '\n';
    csv << "setting2,crl_r_eq_q," << fmt(median_of(ca_s2)) << ',' << fmt(median_of(mse_s2)) << '\n';
    emit_csv(o.out, csv.str());
}

// Grid fit on the training draw, winner chosen on a large fresh validation draw.
struct MisspecResult {
    double crl_err = 0.0;
    double rrr_err = 0.0;
};

MisspecResult misspec_replicate(double sigma_b, std::uint64_t seed) {
    RegressionSuiteSpec spec;
    spec.sigma_B = sigma_b;
    spec.seed = seed;
    auto [train, truth] = gen_regression_suite(spec);
    const Dataset val = draw_regression_sample(*truth.B_star, spec.tau, 10000, seed + 0x9e3779b9ULL);
    const Vec zero_alpha = Vec::Zero(train.m());

    double best_val = std::numeric_limits<double>::infinity();
    double crl_err = 0.0;
    for (int q : {8, 10, 12})
        for (int r : {4, 5, 6}) {
            FitConfig cfg = base_config(q, r, false, true, false, seed);
            const FitResult fr = fit(train, cfg);
            const Mat B = fr.factorization.S * fr.factorization.V.transpose();
            const PredictionError pe = prediction_error(val, B, zero_alpha, &*truth.B_star);
            if (pe.err_p < best_val) {
                best_val = pe.err_p;
                crl_err = *pe.err_e;
            }
        }

    best_val = std::numeric_limits<double>::infinity();
    double rrr_err = 0.0;
    for (int r = 1; r <= 10; ++r) {
        const RrrParts parts = rrr_components(train, r);
        const PredictionError pe = prediction_error(val, parts.B_rrr, zero_alpha, &*truth.B_star);
        if (pe.err_p < best_val) {
            best_val = pe.err_p;
            rrr_err = *pe.err_e;
        }
    }
    return MisspecResult{crl_err, rrr_err};
}

void bench_b4(const BenchOpts& o, int jobs) {
    const std::vector<double> sigmas{0.0, 0.04, 0.08};
    const int reps = o.reps;
    std::vector<MisspecResult> results(sigmas.size() * static_cast<std::size_t>(reps));
    run_pool(results.size(), jobs, [&](std::size_t i) {
        const std::size_t si = i / static_cast<std::size_t>(reps);
        const std::size_t ri = i % static_cast<std::size_t>(reps);
        results[i] = misspec_replicate(sigmas[si], o.seed + 1000 * si + ri);
    });
    std::ostringstream csv;
    csv << "sigma_b,crl_err_e,rrr_err_e,crl_wins,reps\n";
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        std::vector<double> crl(static_cast<std::size_t>(reps)), rrr(static_cast<std::size_t>(reps));
        int wins = 0;
        for (int ri = 0; ri < reps; ++ri) {
            const auto& res = results[si * static_cast<std::size_t>(reps) + static_cast<std::size_t>(ri)];
            crl[static_cast<std::size_t>(ri)] = res.crl_err;
            rrr[static_cast<std::size_t>(ri)] = res.rrr_err;
            if (res.crl_err < res.rrr_err) ++wins;
        }
        csv << fmt(sigmas[si]) << ',' << fmt(median_of(crl)) << ',' << fmt(median_of(rrr)) << ','
            << wins << ',' << reps << '\n';
    }
    emit_csv(o.out, csv.str());
}

void bench_gn(const BenchOpts& o, int jobs) {
    const int reps = o.reps;
    std::vector<double> cas(static_cast<std::size_t>(reps)), ris(cas.size()), nmis(cas.size());
    run_pool(cas.size(), jobs, [&](std::size_t i) {
        PlantedPartitionSpec spec;
        spec.seed = o.seed + i;
        auto [W, truth] = gen_planted_partition(spec);
        const SimilarityGraph g(std::move(W), GraphKind::MutualKnn);
        const LaplacianSpec lap = graph_laplacian(g, true);
        const Mat resp = kernel_to_response(lap.L, KernelSource::Laplacian, 2 * spec.q_star, true);
        FitConfig cfg = base_config(spec.q_star, spec.q_star, false, true, false, spec.seed);
        const FitResult fr = fit_unsupervised(resp, cfg);
        const LabelPair lp(truth.labels, fr.clusters.assign);
        cas[i] = clustering_accuracy(lp);
        ris[i] = rand_index(lp);
        nmis[i] = nmi(lp);
    });
    std::ostringstream csv;
    csv << "method,median_ca,median_ri,median_nmi\n";
    csv << "crl_kernel," << fmt(median_of(cas)) << ',' << fmt(median_of(ris)) << ','
        << fmt(median_of(nmis)) << '\n';
    emit_csv(o.out, csv.str());
}

void run_bench(const BenchOpts& o) {
    if (o.reps < 1) throw ConfigError("bench needs at least one replicate");
    const int jobs = resolve_jobs(o.jobs);
    if (o.suite == "b2")
        bench_b2(o, jobs);
    else if (o.suite == "b4")
        bench_b4(o, jobs);
    else if (o.suite == "gn")
        bench_gn(o, jobs);
    else
        throw ConfigError("unknown suite '" + o.suite + "' (expected b2, b4, or gn)");
}

void run_segment(const SegmentOpts& o) {
    const Mat X = read_matrix_csv(o.x_path);
    const Mat ycol = read_matrix_csv(o.y_path);
    if (ycol.cols() != 1) throw DomainError("segment response must be a single-column CSV");
    const TraceProblem prob = build_trace_design(X, ycol.col(0));
    const std::vector<int> qs = parse_grid(o.q_grid);

    nlohmann::json scores = nlohmann::json::array();
    std::optional<TraceFitResult> best;
    int q_best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int q : qs) {
        if (q > prob.X.rows()) continue;
        FitConfig cfg;
        cfg.seed = o.seed;
        cfg.verbose = o.verbose;
        TraceFitResult res = fit_trace(prob, q, cfg);
        const double score = sf_pic_log(res.residual_ss, static_cast<int>(prob.X.rows()),
                                        static_cast<int>(prob.X.cols()), q);
        nlohmann::json row;
        row["q"] = q;
        row["score"] = std::isfinite(score) ? nlohmann::json(score) : nlohmann::json(nullptr);
        row["residual_ss"] = res.residual_ss;
        row["converged"] = res.converged;
        row["status"] = std::isfinite(score) ? "ok" : "degenerate: zero residual";
        scores.push_back(std::move(row));
        if (score < best_score) {
            best_score = score;
            best = std::move(res);
            q_best = q;
        }
    }
    if (!best) throw ConfigError("no feasible segment count in the grid");

    write_labels_csv(o.out_prefix + "_labels.csv", best->labels);
    write_matrix_csv(o.out_prefix + "_coefs.csv", best->group_coefs);
    nlohmann::json rep;
    rep["winner_q"] = q_best;
    rep["scores"] = std::move(scores);
    write_text_file(o.out_prefix + "_report.json", rep.dump(2) + "\n");
    std::cout << "segment: selected q=" << q_best << " out=" << o.out_prefix
              << "_{labels.csv,coefs.csv,report.json}\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clustered reduced-rank multivariate regression toolkit"};
    app.require_subcommand(1);

    FitOpts fo;
    auto* fit_cmd = app.add_subcommand("fit", "fit a clustered low-rank coefficient model");
    fit_cmd->add_option("--x", fo.x_path, "design matrix CSV")->required();
    fit_cmd->add_option("--y", fo.y_path, "response matrix CSV")->required();
    fit_cmd->add_option("--loss", fo.loss, "quadratic|logistic|poisson");
    fit_cmd->add_option("--q", fo.q, "row cluster budget")->required();
    fit_cmd->add_option("--r", fo.r, "rank budget")->required();
    fit_cmd->add_flag("--rankwise", fo.rankwise, "quantize each column of S instead of clustering rows");
    fit_cmd->add_option("--weighted", fo.weighted_path, "m x m response weight matrix CSV");
    fit_cmd->add_option("--seed", fo.seed, "RNG seed");
    fit_cmd->add_option("--out", fo.out, "model JSON path");
    fit_cmd->add_flag("--no-intercept", fo.no_intercept, "fit without the intercept row");
    fit_cmd->add_flag("--verbose", fo.verbose, "per-iteration objective on stderr");

    TuneOpts to;
    auto* tune_cmd = app.add_subcommand("tune", "grid search (q, r) under an information criterion");
    tune_cmd->add_option("--x", to.x_path, "design matrix CSV")->required();
    tune_cmd->add_option("--y", to.y_path, "response matrix CSV")->required();
    tune_cmd->add_option("--loss", to.loss, "quadratic|logistic|poisson");
    tune_cmd->add_option("--q-grid", to.q_grid, "cluster grid A:B")->required();
    tune_cmd->add_option("--r-grid", to.r_grid, "rank grid A:B")->required();
    tune_cmd->add_option("--pic", to.pic, "plugin|sf|log");
    tune_cmd->add_option("--sigma2", to.sigma2, "noise variance for the plug-in criterion");
    tune_cmd->add_flag("--rankwise", to.rankwise, "rank-wise constraint variant");
    tune_cmd->add_flag("--no-intercept", to.no_intercept, "fit without the intercept row");
    tune_cmd->add_option("--seed", to.seed, "RNG seed");
    tune_cmd->add_option("--jobs", to.jobs, "worker threads (0 = all cores; env CRL_JOBS overrides)");
    tune_cmd->add_option("--out-prefix", to.out_prefix, "report path prefix");

    ClusterOpts co;
    auto* cluster_cmd = app.add_subcommand("cluster", "cluster rows of a data matrix or graph vertices");
    cluster_cmd->add_option("--data", co.data_path, "data matrix CSV");
    cluster_cmd->add_option("--edges", co.edges_path, "edge list file: i j [weight]");
    cluster_cmd->add_option("--graph", co.graph, "gaussian|mknn (build a graph from --data)");
    cluster_cmd->add_option("--bandwidth", co.bandwidth, "Gaussian bandwidth (0 = median heuristic)");
    cluster_cmd->add_option("--k", co.k, "mutual k-NN neighborhood size");
    cluster_cmd->add_option("--q", co.q, "number of clusters")->required();
    cluster_cmd->add_option("--r", co.r, "projection rank (0 = q)");
    cluster_cmd->add_option("--mbar", co.mbar, "spectral response width (0 = 2q)");
    cluster_cmd->add_flag("--unnormalized", co.unnormalized, "use D - W instead of the normalized Laplacian");
    cluster_cmd->add_flag("--no-whiten", co.no_whiten, "scale eigenvectors by sqrt(eigenvalue)");
    cluster_cmd->add_flag("--one-based", co.one_based, "edge list vertex ids start at 1");
    cluster_cmd->add_option("--seed", co.seed, "RNG seed");
    cluster_cmd->add_option("--out", co.out, "labels CSV path");
    cluster_cmd->add_flag("--verbose", co.verbose, "per-iteration objective on stderr");

    SimOpts so;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic benchmark dataset");
    sim_cmd->add_option("--scenario", so.scenario, "setting1|setting2|regression|planted")->required();
    sim_cmd->add_option("--seed", so.seed, "RNG seed");
    sim_cmd->add_option("--out-prefix", so.out_prefix, "output file prefix");
    sim_cmd->add_option("--qstar", so.qstar, "true cluster count");
    sim_cmd->add_option("--m", so.m, "response dimension");
    sim_cmd->add_option("--dim", so.dim, "centroid dimension before zero padding");
    sim_cmd->add_option("--per-cluster", so.per_cluster, "observations per cluster");
    sim_cmd->add_option("--side", so.side, "centroid box side length");
    sim_cmd->add_option("--sigma2", so.sigma2, "noise variance");
    sim_cmd->add_option("--n", so.n, "sample size / vertex count");
    sim_cmd->add_option("--p", so.p, "design dimension");
    sim_cmd->add_option("--rstar", so.rstar, "true rank");
    sim_cmd->add_option("--tau", so.tau, "design AR correlation");
    sim_cmd->add_option("--sigma-b", so.sigma_b, "equisparsity misspecification scale");
    sim_cmd->add_option("--z-in", so.z_in, "expected within-community degree");
    sim_cmd->add_option("--z-out", so.z_out, "expected cross-community degree");

    BenchOpts bo;
    auto* bench_cmd = app.add_subcommand("bench", "replicate the synthetic benchmark tables");
    bench_cmd->add_option("--suite", bo.suite, "b2|b4|gn")->required();
    bench_cmd->add_option("--reps", bo.reps, "number of replicates");
    bench_cmd->add_option("--seed", bo.seed, "base RNG seed (replicate i uses seed+i)");
    bench_cmd->add_option("--jobs", bo.jobs, "worker threads (0 = all cores; env CRL_JOBS overrides)");
    bench_cmd->add_option("--out", bo.out, "metrics CSV path (default: stdout)");

    SegmentOpts go;
    auto* seg_cmd = app.add_subcommand("segment", "trace-regression model segmentation");
    seg_cmd->add_option("--x", go.x_path, "per-sample design rows CSV")->required();
    seg_cmd->add_option("--y", go.y_path, "single-column response CSV")->required();
    seg_cmd->add_option("--q-grid", go.q_grid, "segment count grid A:B")->required();
    seg_cmd->add_option("--seed", go.seed, "RNG seed");
    seg_cmd->add_option("--out-prefix", go.out_prefix, "output file prefix");
    seg_cmd->add_flag("--verbose", go.verbose, "per-iteration objective on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (fit_cmd->parsed()) run_fit(fo);
        else if (tune_cmd->parsed()) run_tune(to);
        else if (cluster_cmd->parsed()) run_cluster(co);
        else if (sim_cmd->parsed()) run_simulate(so);
        else if (bench_cmd->parsed()) run_bench(bo);
        else if (seg_cmd->parsed()) run_segment(go);
    } catch (const ConfigError& e) {
        print_error("config", e.what());
        return 2;
    } catch (const NonconvergenceError& e) {
        print_error("nonconvergence", e.what());
        return 4;
    } catch (const DomainError& e) {
        print_error("data", e.what());
        return 3;
    } catch (const StructuralError& e) {
        print_error("structure", e.what());
        return 3;
    } catch (const Error& e) {
        print_error("error", e.what());
        return 3;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
