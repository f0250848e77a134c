// Command-line front end: fit / eval / recommend / sweep / verify.
//
// Exit codes: 0 success, 2 input or I/O error, 3 validation or dimension
// error, 4 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "gfcf/gfcf.hpp"

namespace {

using gfcf::Index;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CommonOptions {
    std::uint64_t seed = 0;
    int workers = 0;
    Index dense_cap = gfcf::kDefaultDenseCap;
    bool no_timing = false;  // zero timing fields for golden-file comparison
};

void apply_workers(const CommonOptions& common) {
#ifdef _OPENMP
    if (common.workers > 0) omp_set_num_threads(common.workers);
#else
    (void)common;
#endif
}

struct MethodOptions {
    std::string method = "gfcf";
    double alpha = 0.3;
    double mu = 1.0;
    std::string beta = "1,1";
    Index dim = 256;
    bool normalized_input = false;
    int gpm_iterations = 1000;
    double gpm_tolerance = 1e-10;
};

gfcf::RecommenderParams make_params(const MethodOptions& method) {
    gfcf::RecommenderParams params;
    params.alpha = method.alpha;
    params.mu = method.mu;
    params.beta = gfcf::parse_coefficient_list(method.beta);
    params.dim = method.dim;
    params.normalized_input = method.normalized_input;
    return params;
}

gfcf::RecommenderModel fit_from_train(const MethodOptions& method, const CommonOptions& common,
                                      std::shared_ptr<const gfcf::InteractionMatrix> train) {
    gfcf::FitOptions options;
    options.gpm.seed = common.seed;
    options.gpm.max_iterations = method.gpm_iterations;
    options.gpm.tolerance = method.gpm_tolerance;
    options.dense_cap = common.dense_cap;
    auto normalized = std::make_shared<const gfcf::NormalizedMatrix>(gfcf::normalize(train));
    return gfcf::fit_model(gfcf::kind_from_name(method.method), normalized, make_params(method),
                           options);
}

std::shared_ptr<const gfcf::InteractionMatrix> load_train_only(const std::string& train_path,
                                                               const std::string& test_path) {
    auto train_file = gfcf::read_adjacency_file(train_path);
    Index n_users = train_file.max_user + 1;
    Index n_items = train_file.max_item + 1;
    if (!test_path.empty()) {
        auto test_file = gfcf::read_adjacency_file(test_path);
        n_users = std::max(n_users, test_file.max_user + 1);
        n_items = std::max(n_items, test_file.max_item + 1);
    }
    return std::make_shared<const gfcf::InteractionMatrix>(
        gfcf::build_interactions(train_file.pairs, n_users, n_items));
}

int run_fit(const std::string& train_path, const std::string& test_path,
            const std::string& out_path, const MethodOptions& method,
            const CommonOptions& common) {
    apply_workers(common);
    const auto t0 = std::chrono::steady_clock::now();
    auto train = load_train_only(train_path, test_path);
    gfcf::RecommenderModel model = fit_from_train(method, common, train);
    const double fit_seconds = seconds_since(t0);
    gfcf::save_model(model, out_path, train_path);
    std::printf("fit method=%s users=%lld items=%lld nnz=%lld seconds=%.3f -> %s\n",
                gfcf::kind_name(model.kind).c_str(), static_cast<long long>(model.n_users()),
                static_cast<long long>(model.n_items()),
                static_cast<long long>(model.normalized->base->nnz()),
                common.no_timing ? 0.0 : fit_seconds, out_path.c_str());
    return 0;
}

int run_eval(const std::string& model_path, const std::string& test_path,
             const std::string& train_override, Index k, const std::string& out_csv,
             const std::string& out_json, const std::string& dataset_name,
             const CommonOptions& common) {
    apply_workers(common);
    const auto t0 = std::chrono::steady_clock::now();
    gfcf::RecommenderModel model = gfcf::load_model(model_path, train_override);
    const double load_seconds = seconds_since(t0);

    // Reuse the model's training matrix; only the held-out file is new.
    auto test_file = gfcf::read_adjacency_file(test_path);
    if (test_file.max_user + 1 > model.n_users() || test_file.max_item + 1 > model.n_items())
        throw gfcf::validation_error("eval: test ids exceed model dimensions (" +
                                     std::to_string(model.n_users()) + "x" +
                                     std::to_string(model.n_items()) +
                                     "); refit with --test to size the model");
    gfcf::SplitDataset data;
    data.train = model.normalized->base;
    data.test.assign(static_cast<std::size_t>(model.n_users()), {});
    for (const auto& [u, i] : test_file.pairs) {
        if (data.train->has(u, i))
            throw gfcf::validation_error("train/test overlap: user " + std::to_string(u) +
                                         " holds item " + std::to_string(i) + " in both splits");
        data.test[static_cast<std::size_t>(u)].push_back(i);
    }
    for (auto& items : data.test) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
    }
    data.stats.n_users = model.n_users();
    data.stats.n_items = model.n_items();
    data.stats.train_nnz = data.train->nnz();

    gfcf::EvalOptions options;
    options.dataset = dataset_name;
    options.fit_seconds = load_seconds;
    gfcf::EvalReport report = gfcf::evaluate(model, data, k, options);
    if (common.no_timing) {
        report.wall_time_fit = 0.0;
        report.wall_time_eval = 0.0;
    }
    std::printf("eval method=%s k=%lld recall=%.6f ndcg=%.6f evaluated=%lld skipped=%lld "
                "eval_seconds=%.3f\n",
                report.method.c_str(), static_cast<long long>(report.k), report.recall,
                report.ndcg, static_cast<long long>(report.users_evaluated),
                static_cast<long long>(report.users_skipped), report.wall_time_eval);
    if (!out_csv.empty()) gfcf::write_report_csv(report, out_csv);
    if (!out_json.empty()) gfcf::write_report_json(report, out_json);
    return 0;
}

int run_recommend(const std::string& model_path, const std::string& train_override, Index user,
                  Index topn, const CommonOptions& common) {
    apply_workers(common);
    gfcf::RecommenderModel model = gfcf::load_model(model_path, train_override);
    Eigen::VectorXd scores = gfcf::score_user(model, user);
    gfcf::ScoredSlate slate =
        gfcf::top_n(user, scores, model.normalized->base->items_of(user), topn);
    std::printf("user %lld top-%lld%s\n", static_cast<long long>(user),
                static_cast<long long>(topn), slate.truncated ? " (truncated)" : "");
    for (std::size_t p = 0; p < slate.item_ids.size(); ++p)
        std::printf("%lld %.10g\n", static_cast<long long>(slate.item_ids[p]), slate.scores[p]);
    return 0;
}

int run_sweep(const std::string& train_path, const std::string& grid_text, double holdout,
              Index k, const MethodOptions& method, const CommonOptions& common,
              const std::string& out_csv) {
    apply_workers(common);
    std::vector<double> grid = gfcf::parse_coefficient_list(grid_text);

    auto train = load_train_only(train_path, "");
    gfcf::SplitDataset split = gfcf::make_validation_split(*train, holdout, common.seed);

    MethodOptions fit_method = method;
    gfcf::RecommenderModel model = fit_from_train(fit_method, common, split.train);

    std::string table = "alpha,recall,ndcg\n";
    double best_alpha = grid.front();
    double best_recall = -1.0;
    gfcf::EvalReport best_report;
    for (double alpha : grid) {
        model.params.alpha = alpha;
        gfcf::EvalOptions options;
        options.method = gfcf::kind_name(model.kind);
        gfcf::EvalReport report = gfcf::evaluate(model, split, k, options);
        char line[128];
        std::snprintf(line, sizeof(line), "%.6g,%.6f,%.6f\n", alpha, report.recall, report.ndcg);
        table += line;
        std::printf("alpha=%.6g recall@%lld=%.6f ndcg@%lld=%.6f\n", alpha,
                    static_cast<long long>(k), report.recall, static_cast<long long>(k),
                    report.ndcg);
        if (report.recall > best_recall) {
            best_recall = report.recall;
            best_alpha = alpha;
            best_report = report;
        }
    }
    std::printf("best alpha=%.6g recall@%lld=%.6f ndcg@%lld=%.6f\n", best_alpha,
                static_cast<long long>(k), best_report.recall, static_cast<long long>(k),
                best_report.ndcg);
    if (!out_csv.empty()) {
        std::ofstream os(out_csv);
        if (!os) throw gfcf::io_error("sweep: cannot open " + out_csv);
        os << table;
    }
    return 0;
}

std::string csv_field(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

int run_verify(const std::string& experiment, Index items, Index users, int seeds,
               const std::string& dims_text, Index d, int trials, const std::string& out_csv,
               const CommonOptions& common) {
    apply_workers(common);
    std::string csv = "experiment,d,seed,coherence,bound,success_rate,correlation\n";

    if (experiment == "spectrum") {
        int failures = 0;
        for (int s = 0; s < seeds; ++s) {
            std::mt19937_64 rng(common.seed + static_cast<std::uint64_t>(s));
            std::uniform_int_distribution<Index> pick_items(8, std::max<Index>(items, 8));
            std::uniform_real_distribution<double> pick_density(0.02, 0.2);
            const Index ni = pick_items(rng);
            const Index nu = users > 0 ? users : std::max<Index>(ni / 2, 4);
            auto pairs = gfcf::make_random_bipartite(nu, ni, pick_density(rng), rng);
            auto nm = gfcf::normalize(gfcf::build_interactions(pairs, nu, ni));
            gfcf::SpectrumReport report = gfcf::verify_spectrum(nm, common.dense_cap);
            if (!report.bounds_hold) ++failures;
            csv += "spectrum,0," + std::to_string(common.seed + s) + "," +
                   csv_field(report.item_graph_values.size() ? report.item_graph_values[0] : 0.0) +
                   ",1," + std::string(report.bounds_hold ? "1" : "0") + "," +
                   csv_field(report.bipartite_values.size() ? report.bipartite_values[0] : 0.0) +
                   "\n";
        }
        std::printf("spectrum: %d/%d graphs within bounds\n", seeds - failures, seeds);
        if (!out_csv.empty()) {
            std::ofstream os(out_csv);
            if (!os) throw gfcf::io_error("verify: cannot open " + out_csv);
            os << csv;
        }
        return failures == 0 ? 0 : 4;
    }

    // t1 / t2 share the seeded graph.
    std::mt19937_64 rng(common.seed);
    const Index nu = users > 0 ? users : 30;
    const Index ni = items > 0 ? items : 40;
    auto pairs = gfcf::make_random_bipartite(nu, ni, 0.15, rng);
    auto nm = gfcf::normalize(gfcf::build_interactions(pairs, nu, ni));

    if (experiment == "t1") {
        gfcf::TheoryReport report = gfcf::verify_ordering_event(nm, d, trials, common.seed);
        for (const auto& trial : report.trials)
            csv += "t1," + std::to_string(d) + "," + std::to_string(trial.seed) + "," +
                   csv_field(trial.coherence) + "," + csv_field(report.coherence_bound) + "," +
                   (trial.event_holds ? "1" : "0") + ",\n";
        std::printf("t1: d=%lld success_rate=%.3f mean_coherence=%.4f bound=%.4f (N_min=%lld "
                    "N_max=%lld)\n",
                    static_cast<long long>(d), report.ordering_success_rate, report.coherence,
                    report.coherence_bound, static_cast<long long>(report.n_min),
                    static_cast<long long>(report.n_max));
    } else if (experiment == "t2") {
        std::vector<Index> dims;
        for (double v : gfcf::parse_coefficient_list(dims_text))
            dims.push_back(static_cast<Index>(v));
        auto reports = gfcf::verify_limit_convergence(nm, dims, common.seed, trials);
        for (const auto& report : reports) {
            csv += "t2," + std::to_string(report.d) + "," + std::to_string(common.seed) +
                   ",,,," + csv_field(report.score_correlation) + "\n";
            std::printf("t2: d=%lld spearman=%.4f frobenius_rel=%.4f\n",
                        static_cast<long long>(report.d), report.score_correlation,
                        report.frobenius_rel_error);
        }
    } else {
        throw CLI::ValidationError("--experiment", "unknown experiment '" + experiment +
                                                       "' (expected spectrum, t1, or t2)");
    }

    if (!out_csv.empty()) {
        std::ofstream os(out_csv);
        if (!os) throw gfcf::io_error("verify: cannot open " + out_csv);
        os << csv;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-filter collaborative filtering toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_config("--config", "",
                   "key=value overlay ([fit]/[eval]/... sections); flags take precedence");

    CommonOptions common;
    app.add_option("--seed", common.seed, "random seed");
    app.add_option("--workers", common.workers, "worker threads (0: hardware default)");
    app.add_option("--dense-cap", common.dense_cap, "max items for dense paths");
    app.add_flag("--no-timing", common.no_timing, "zero timing fields in outputs");

    MethodOptions method;
    std::string train_path, test_path, model_path, out_path, out_csv, out_json, dataset_name;
    Index k_eval = 20, topn = 20, user = 0;
    double holdout = 0.1;
    std::string grid = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::string experiment = "spectrum", dims = "64,512,4096";
    Index items = 200, users_opt = 0, d_dim = 8192;
    int seeds = 100, trials = 20;

    auto add_method_options = [&method](CLI::App* cmd) {
        cmd->add_option("--method", method.method,
                        "gfcf | lgcn-ide | neighborhood | ideal-lowpass | autoencoder");
        cmd->add_option("--alpha", method.alpha, "blend weight of the ideal low-pass term");
        cmd->add_option("--mu", method.mu, "autoencoder ridge weight");
        cmd->add_option("--beta", method.beta, "comma-separated polynomial weights");
        cmd->add_option("--dim", method.dim, "spectral dimension");
        cmd->add_flag("--normalized-input", method.normalized_input,
                      "feed the normalized row into the blend equation");
        cmd->add_option("--gpm-iters", method.gpm_iterations, "basis solver iteration cap");
        cmd->add_option("--gpm-tol", method.gpm_tolerance, "basis solver plateau tolerance");
    };

    CLI::App* fit = app.add_subcommand("fit", "fit a model and persist it");
    fit->add_option("--train", train_path, "training adjacency file")->required();
    fit->add_option("--test", test_path, "held-out file (sizes the id space only)");
    fit->add_option("--out", out_path, "model manifest path")->required();
    add_method_options(fit);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a persisted model");
    eval->add_option("--model", model_path, "model manifest")->required();
    eval->add_option("--test", test_path, "held-out adjacency file")->required();
    eval->add_option("--train", train_path, "override the recorded training file");
    eval->add_option("--k", k_eval, "metric cutoff");
    eval->add_option("--out-csv", out_csv, "report CSV path");
    eval->add_option("--out-json", out_json, "report JSON path");
    eval->add_option("--dataset", dataset_name, "dataset label for reports");

    CLI::App* recommend = app.add_subcommand("recommend", "top-N items for one user");
    recommend->add_option("--model", model_path, "model manifest")->required();
    recommend->add_option("--train", train_path, "override the recorded training file");
    recommend->add_option("--user", user, "user id")->required();
    recommend->add_option("--topn", topn, "slate size");

    CLI::App* sweep = app.add_subcommand("sweep", "grid-search alpha on a seeded holdout");
    sweep->add_option("--train", train_path, "training adjacency file")->required();
    sweep->add_option("--alpha-grid", grid, "comma-separated alpha values");
    sweep->add_option("--holdout", holdout, "per-user holdout fraction");
    sweep->add_option("--k", k_eval, "metric cutoff");
    sweep->add_option("--out-csv", out_csv, "per-alpha table path");
    add_method_options(sweep);

    CLI::App* verify = app.add_subcommand("verify", "spectral / ordering / convergence checks");
    verify->add_option("--experiment", experiment, "spectrum | t1 | t2")->required();
    verify->add_option("--items", items, "item count (or cap for random sizes)");
    verify->add_option("--users", users_opt, "user count (0: derived)");
    verify->add_option("--seeds", seeds, "number of random graphs (spectrum)");
    verify->add_option("--dims", dims, "comma-separated dimensions (t2)");
    verify->add_option("--d", d_dim, "embedding dimension (t1)");
    verify->add_option("--trials", trials, "trial count (t1/t2)");
    verify->add_option("--out", out_csv, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fit->parsed()) return run_fit(train_path, test_path, out_path, method, common);
        if (eval->parsed())
            return run_eval(model_path, test_path, train_path, k_eval, out_csv, out_json,
                            dataset_name, common);
        if (recommend->parsed()) return run_recommend(model_path, train_path, user, topn, common);
        if (sweep->parsed())
            return run_sweep(train_path, grid, holdout, k_eval, method, common, out_csv);
        if (verify->parsed())
            return run_verify(experiment, items, users_opt, seeds, dims, d_dim, trials, out_csv,
                              common);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const gfcf::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const gfcf::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const gfcf::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
