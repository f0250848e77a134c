#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfcf/dataset.hpp"
#include "gfcf/errors.hpp"
#include "gfcf/metrics.hpp"
#include "gfcf/recommend.hpp"

namespace gfcf {

struct EvalReport {
    std::string dataset;
    std::string method;
    Index k = 20;
    double recall = 0.0;
    double ndcg = 0.0;
    Index users_evaluated = 0;
    Index users_skipped = 0;      // users with empty test sets
    double wall_time_fit = 0.0;   // seconds
    double wall_time_eval = 0.0;  // seconds
};

struct EvalOptions {
    Index block_size = 0;            // 0: derive from memory budget
    double memory_budget_mb = 512;   // bound on the block x n_items buffers
    std::string dataset;
    std::string method;
    double fit_seconds = 0.0;
};

namespace detail {

inline Index pick_block_size(const EvalOptions& options, Index n_items) {
    if (options.block_size > 0) return options.block_size;
    const double bytes = options.memory_budget_mb * 1024.0 * 1024.0;
    const double per_row = static_cast<double>(n_items) * 8.0 * 3.0;  // score + two work buffers
    return std::clamp<Index>(static_cast<Index>(bytes / per_row), 16, 4096);
}

} // namespace detail

/// Core harness over an arbitrary block scorer; per-user recall/ndcg averaged
/// over users with non-empty test sets, summed in user-id order so worker
/// count never changes the aggregate.
inline EvalReport evaluate_with(
    const std::function<Eigen::MatrixXd(std::span<const Index>)>& score_block_fn,
    const InteractionMatrix& train, const std::vector<std::vector<Index>>& test, Index k,
    const EvalOptions& options = {}) {
    if (k < 1) throw validation_error("evaluate: k must be >= 1");
    if (static_cast<Index>(test.size()) != train.n_users)
        throw validation_error("evaluate: test set indexed by a different user count");

    std::vector<Index> active;
    for (Index u = 0; u < train.n_users; ++u)
        if (!test[static_cast<std::size_t>(u)].empty()) active.push_back(u);

    EvalReport report;
    report.dataset = options.dataset;
    report.method = options.method;
    report.k = k;
    report.users_skipped = train.n_users - static_cast<Index>(active.size());
    report.wall_time_fit = options.fit_seconds;

    const auto t0 = std::chrono::steady_clock::now();
    const Index block = detail::pick_block_size(options, train.n_items);
    double recall_sum = 0.0;
    double ndcg_sum = 0.0;
    for (std::size_t start = 0; start < active.size(); start += static_cast<std::size_t>(block)) {
        const std::size_t stop = std::min(active.size(), start + static_cast<std::size_t>(block));
        std::span<const Index> users(active.data() + start, stop - start);
        Eigen::MatrixXd scores = score_block_fn(users);
        if (scores.rows() != static_cast<Index>(users.size()) || scores.cols() != train.n_items)
            throw validation_error("evaluate: scorer returned wrong-shaped block");
        std::vector<double> block_recall(users.size());
        std::vector<double> block_ndcg(users.size());
#pragma omp parallel for schedule(dynamic, 16)
        for (Index r = 0; r < static_cast<Index>(users.size()); ++r) {
            const Index u = users[static_cast<std::size_t>(r)];
            ScoredSlate slate = top_n(u, scores.row(r).transpose(), train.items_of(u), k);
            const auto& truth = test[static_cast<std::size_t>(u)];
            block_recall[static_cast<std::size_t>(r)] = recall_at_k(slate, truth, k);
            block_ndcg[static_cast<std::size_t>(r)] = ndcg_at_k(slate, truth, k);
        }
        for (double v : block_recall) recall_sum += v;
        for (double v : block_ndcg) ndcg_sum += v;
    }
    report.users_evaluated = static_cast<Index>(active.size());
    if (!active.empty()) {
        recall_sum /= static_cast<double>(active.size());
        ndcg_sum /= static_cast<double>(active.size());
    }
    report.recall = recall_sum;
    report.ndcg = ndcg_sum;
    report.wall_time_eval =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline EvalReport evaluate(const RecommenderModel& model, const SplitDataset& data, Index k,
                           EvalOptions options = {}) {
    validate_model(model);
    if (model.n_users() != data.stats.n_users || model.n_items() != data.stats.n_items)
        throw validation_error("evaluate: model fitted on " + std::to_string(model.n_users()) +
                               "x" + std::to_string(model.n_items()) + " but dataset is " +
                               std::to_string(data.stats.n_users) + "x" +
                               std::to_string(data.stats.n_items));
    if (options.method.empty()) options.method = kind_name(model.kind);
    return evaluate_with([&model](std::span<const Index> users) { return score_block(model, users); },
                         *data.train, data.test, k, options);
}

// --- report emission ----------------------------------------------------------

inline std::string report_csv(const EvalReport& report) {
    char line[512];
    std::snprintf(line, sizeof(line), "%s,%s,%lld,%.6f,%.6f,%.3f,%.3f\n",
                  report.dataset.c_str(), report.method.c_str(),
                  static_cast<long long>(report.k), report.recall, report.ndcg,
                  report.wall_time_fit, report.wall_time_eval);
    return std::string("dataset,method,k,recall,ndcg,fit_seconds,eval_seconds\n") + line;
}

inline nlohmann::json report_json(const EvalReport& report) {
    return nlohmann::json{{"dataset", report.dataset},
                          {"method", report.method},
                          {"k", report.k},
                          {"recall", report.recall},
                          {"ndcg", report.ndcg},
                          {"users_evaluated", report.users_evaluated},
                          {"users_skipped", report.users_skipped},
                          {"fit_seconds", report.wall_time_fit},
                          {"eval_seconds", report.wall_time_eval}};
}

inline void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw io_error("write_report_csv: cannot open " + path.string());
    os << report_csv(report);
    if (!os) throw io_error("write_report_csv: write failed for " + path.string());
}

inline void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw io_error("write_report_json: cannot open " + path.string());
    os << report_json(report).dump(2) << "\n";
    if (!os) throw io_error("write_report_json: write failed for " + path.string());
}

} // namespace gfcf
