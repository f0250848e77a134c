#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gfcf/dataset.hpp"
#include "gfcf/errors.hpp"
#include "gfcf/filters.hpp"
#include "gfcf/sparse.hpp"
#include "gfcf/spectral.hpp"

namespace gfcf {

enum class RecommenderKind { GfCf, LgcnIde, Neighborhood, IdealLowPass, Autoencoder };

inline std::string kind_name(RecommenderKind kind) {
    switch (kind) {
        case RecommenderKind::GfCf: return "gfcf";
        case RecommenderKind::LgcnIde: return "lgcn-ide";
        case RecommenderKind::Neighborhood: return "neighborhood";
        case RecommenderKind::IdealLowPass: return "ideal-lowpass";
        case RecommenderKind::Autoencoder: return "autoencoder";
    }
    throw validation_error("unknown recommender kind");
}

inline RecommenderKind kind_from_name(const std::string& name) {
    if (name == "gfcf") return RecommenderKind::GfCf;
    if (name == "lgcn-ide") return RecommenderKind::LgcnIde;
    if (name == "neighborhood") return RecommenderKind::Neighborhood;
    if (name == "ideal-lowpass") return RecommenderKind::IdealLowPass;
    if (name == "autoencoder") return RecommenderKind::Autoencoder;
    throw validation_error("unknown recommender kind '" + name + "'");
}

struct RecommenderParams {
    double alpha = 0.3;                // blend weight of the ideal term
    std::vector<double> beta = {1.0, 1.0};  // polynomial weights, K = beta.size()
    double mu = 1.0;                   // autoencoder ridge weight
    Index dim = 256;                   // spectral dimension d
    bool normalized_input = false;     // score the blend from r~_u instead of r_u
};

struct RecommenderModel {
    RecommenderKind kind = RecommenderKind::Neighborhood;
    std::shared_ptr<const NormalizedMatrix> normalized;
    std::optional<SpectralBasis> basis;      // GfCf, IdealLowPass
    std::optional<Eigen::MatrixXd> dense_b;  // Autoencoder
    RecommenderParams params;

    Index n_users() const { return normalized->n_users(); }
    Index n_items() const { return normalized->n_items(); }
};

inline void validate_model(const RecommenderModel& model) {
    if (!model.normalized) throw validation_error("model: missing normalized matrix");
    if (!(model.params.alpha >= 0)) throw validation_error("model: alpha must be >= 0");
    if (!(model.params.mu > 0)) throw validation_error("model: mu must be > 0");
    if (model.params.beta.empty()) throw validation_error("model: beta must be non-empty");
    if (model.params.dim < 1) throw validation_error("model: dim must be >= 1");
    const bool needs_basis =
        model.kind == RecommenderKind::GfCf || model.kind == RecommenderKind::IdealLowPass;
    if (needs_basis && !model.basis)
        throw validation_error("model: " + kind_name(model.kind) + " requires a spectral basis");
    if (needs_basis && model.basis->n_items() != model.n_items())
        throw validation_error("model: basis dimension mismatch");
    if (model.kind == RecommenderKind::Autoencoder && !model.dense_b)
        throw validation_error("model: autoencoder requires the fitted dense matrix");
}

namespace detail {

inline void check_user(const RecommenderModel& model, Index user) {
    if (user < 0 || user >= model.n_users())
        throw validation_error("user " + std::to_string(user) + " out of range");
}

/// Raw binary row of the training matrix as a dense vector.
inline Eigen::VectorXd raw_row_dense(const InteractionMatrix& m, Index user) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m.n_items);
    for (Index i : m.items_of(user)) r[i] = 1.0;
    return r;
}

inline Eigen::VectorXd input_row(const RecommenderModel& model, Index user) {
    return model.params.normalized_input ? model.normalized->row_dense(user)
                                         : raw_row_dense(*model.normalized->base, user);
}

} // namespace detail

/// Closed-form infinite-dimension LightGCN score:
/// s_u = sum_k beta[k] * r~_u P~^k, with the k=0 term beta[0] r~_u.
inline Eigen::VectorXd score_lgcn_ide(const RecommenderModel& model, Index user) {
    detail::check_user(model, user);
    const NormalizedMatrix& nm = *model.normalized;
    Eigen::VectorXd power = nm.row_dense(user);
    Eigen::VectorXd acc = model.params.beta[0] * power;
    Eigen::VectorXd users(nm.n_users());
    Eigen::VectorXd next(nm.n_items());
    for (std::size_t k = 1; k < model.params.beta.size(); ++k) {
        gfcf::detail::gram_once(nm, power, users, next);
        power.swap(next);
        acc += model.params.beta[k] * power;
    }
    return acc;
}

/// Gram similarity scoring s_u = r_u P~ on the raw row.
inline Eigen::VectorXd score_neighborhood(const RecommenderModel& model, Index user) {
    detail::check_user(model, user);
    const NormalizedMatrix& nm = *model.normalized;
    Eigen::VectorXd x = detail::input_row(model, user);
    Eigen::VectorXd users(nm.n_users());
    Eigen::VectorXd out(nm.n_items());
    gfcf::detail::gram_once(nm, x, users, out);
    return out;
}

/// Rank-d projection of the normalized row: s_u = (r~_u Ubar) Ubar^T.
inline Eigen::VectorXd score_ideal_lowpass(const RecommenderModel& model, Index user) {
    detail::check_user(model, user);
    if (!model.basis) throw validation_error("score_ideal_lowpass: missing basis");
    Eigen::VectorXd r = model.normalized->row_dense(user);
    Eigen::VectorXd coeffs = model.basis->vectors.transpose() * r;
    return model.basis->vectors * coeffs;
}

/// Blend of the linear (gram) filter on the raw row and the degree-weighted
/// ideal low-pass term:
/// s_u = r_u (R~^T R~ + alpha D_I^{-1/2} Ubar Ubar^T D_I^{1/2}).
inline Eigen::VectorXd score_gfcf(const RecommenderModel& model, Index user) {
    detail::check_user(model, user);
    if (!model.basis) throw validation_error("score_gfcf: missing basis");
    const NormalizedMatrix& nm = *model.normalized;
    const InteractionMatrix& base = *nm.base;

    Eigen::VectorXd x = detail::input_row(model, user);

    Eigen::VectorXd users(nm.n_users());
    Eigen::VectorXd linear(nm.n_items());
    gfcf::detail::gram_once(nm, x, users, linear);

    // (x . D_I^{-1/2}) Ubar — gather only the nonzero entries of x.
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(model.basis->k);
    for (Index i : base.items_of(user)) {
        const double xi = model.params.normalized_input
                              ? nm.row_scale[static_cast<std::size_t>(user)] *
                                    nm.col_scale[static_cast<std::size_t>(i)]
                              : 1.0;
        coeffs += xi * nm.col_scale[static_cast<std::size_t>(i)] *
                  model.basis->vectors.row(i).transpose();
    }
    Eigen::VectorXd ideal = model.basis->vectors * coeffs;
    for (Index i = 0; i < base.n_items; ++i)
        ideal[i] *= std::sqrt(static_cast<double>(base.item_degrees[static_cast<std::size_t>(i)]));

    return linear + model.params.alpha * ideal;
}

/// Ridge linear autoencoder closed form B* = (P~ + mu I)^{-1} P~.
inline Eigen::MatrixXd fit_autoencoder(const ItemGraphOperator& op, double mu) {
    if (!(mu > 0)) throw validation_error("fit_autoencoder: mu must be > 0");
    Eigen::MatrixXd p = densify_item_graph(op);
    Eigen::MatrixXd lhs = p;
    lhs.diagonal().array() += mu;
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success)
        throw numeric_error("fit_autoencoder: Cholesky factorization failed");
    return llt.solve(p);
}

inline Eigen::MatrixXd fit_autoencoder(std::shared_ptr<const NormalizedMatrix> normalized,
                                       double mu, Index dense_cap = kDefaultDenseCap) {
    return fit_autoencoder(make_item_graph(std::move(normalized), dense_cap), mu);
}

inline Eigen::VectorXd score_autoencoder(const RecommenderModel& model, Index user) {
    detail::check_user(model, user);
    if (!model.dense_b) throw validation_error("score_autoencoder: model not fitted");
    Eigen::VectorXd r = model.normalized->row_dense(user);
    return model.dense_b->transpose() * r;
}

inline Eigen::VectorXd score_user(const RecommenderModel& model, Index user) {
    switch (model.kind) {
        case RecommenderKind::GfCf: return score_gfcf(model, user);
        case RecommenderKind::LgcnIde: return score_lgcn_ide(model, user);
        case RecommenderKind::Neighborhood: return score_neighborhood(model, user);
        case RecommenderKind::IdealLowPass: return score_ideal_lowpass(model, user);
        case RecommenderKind::Autoencoder: return score_autoencoder(model, user);
    }
    throw validation_error("unknown recommender kind");
}

/// Scores for a block of users, one row per user. The basis-backed kinds
/// batch their projection into a single dense product; everything else runs
/// the per-user path in parallel. Row r of the result always equals
/// score_user(model, users[r]).
inline Eigen::MatrixXd score_block(const RecommenderModel& model, std::span<const Index> users) {
    validate_model(model);
    for (Index u : users) detail::check_user(model, u);  // before any parallel region
    const auto b = static_cast<Index>(users.size());
    Eigen::MatrixXd out(b, model.n_items());

    if (model.kind == RecommenderKind::GfCf || model.kind == RecommenderKind::IdealLowPass) {
        const SpectralBasis& basis = *model.basis;
        Eigen::MatrixXd coeffs(b, basis.k);
        const NormalizedMatrix& nm = *model.normalized;
        const InteractionMatrix& base = *nm.base;
#pragma omp parallel for schedule(static)
        for (Index r = 0; r < b; ++r) {
            const Index u = users[static_cast<std::size_t>(r)];
            Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(basis.k);
            for (Index i : base.items_of(u)) {
                double xi;
                if (model.kind == RecommenderKind::IdealLowPass)
                    xi = nm.row_scale[static_cast<std::size_t>(u)] *
                         nm.col_scale[static_cast<std::size_t>(i)];
                else
                    xi = (model.params.normalized_input
                              ? nm.row_scale[static_cast<std::size_t>(u)] *
                                    nm.col_scale[static_cast<std::size_t>(i)]
                              : 1.0) *
                         nm.col_scale[static_cast<std::size_t>(i)];
                c += xi * basis.vectors.row(i);
            }
            coeffs.row(r) = c;
        }
        out.noalias() = coeffs * basis.vectors.transpose();
        if (model.kind == RecommenderKind::GfCf) {
            for (Index i = 0; i < model.n_items(); ++i)
                out.col(i) *= std::sqrt(
                    static_cast<double>(base.item_degrees[static_cast<std::size_t>(i)]));
            out *= model.params.alpha;
#pragma omp parallel for schedule(dynamic, 8)
            for (Index r = 0; r < b; ++r) {
                const Index u = users[static_cast<std::size_t>(r)];
                Eigen::VectorXd x = detail::input_row(model, u);
                Eigen::VectorXd scratch(nm.n_users());
                Eigen::VectorXd linear(nm.n_items());
                gfcf::detail::gram_once(nm, x, scratch, linear);
                out.row(r) += linear.transpose();
            }
        }
        return out;
    }

#pragma omp parallel for schedule(dynamic, 8)
    for (Index r = 0; r < b; ++r)
        out.row(r) = score_user(model, users[static_cast<std::size_t>(r)]).transpose();
    return out;
}

// --- top-N extraction ---------------------------------------------------------

struct ScoredSlate {
    Index user = -1;
    std::vector<Index> item_ids;   // descending score, ties by ascending id
    std::vector<double> scores;
    bool truncated = false;        // fewer than n unseen items were available
};

/// Top-n unseen items. Seen items are masked to the most negative finite
/// score before selection; ties break by ascending item id.
inline ScoredSlate top_n(Index user, const Eigen::VectorXd& scores,
                         std::span<const Index> seen_sorted, Index n) {
    if (n < 1) throw validation_error("top_n: n must be >= 1");
    const Index n_items = scores.size();

    Eigen::VectorXd masked = scores;
    for (Index i : seen_sorted) {
        if (i < 0 || i >= n_items)
            throw validation_error("top_n: seen item " + std::to_string(i) + " out of range");
        masked[i] = std::numeric_limits<double>::lowest();
    }

    const Index unseen = n_items - static_cast<Index>(seen_sorted.size());
    const Index take = std::min(n, std::max<Index>(unseen, 0));

    std::vector<Index> order(static_cast<std::size_t>(n_items));
    std::iota(order.begin(), order.end(), Index{0});
    auto better = [&masked](Index a, Index b) {
        return masked[a] > masked[b] || (masked[a] == masked[b] && a < b);
    };
    if (take < n_items) std::nth_element(order.begin(), order.begin() + take, order.end(), better);
    std::sort(order.begin(), order.begin() + take, better);

    ScoredSlate slate;
    slate.user = user;
    slate.item_ids.assign(order.begin(), order.begin() + take);
    slate.scores.reserve(static_cast<std::size_t>(take));
    for (Index i : slate.item_ids) slate.scores.push_back(scores[i]);
    slate.truncated = take < n;
    return slate;
}

// --- model fitting and persistence --------------------------------------------

struct FitOptions {
    GpmConfig gpm;                       // basis solver settings (dim comes from params)
    Index dense_cap = kDefaultDenseCap;  // autoencoder / oracle ceiling
};

inline RecommenderModel fit_model(RecommenderKind kind,
                                  std::shared_ptr<const NormalizedMatrix> normalized,
                                  const RecommenderParams& params, const FitOptions& options = {}) {
    RecommenderModel model;
    model.kind = kind;
    model.normalized = std::move(normalized);
    model.params = params;
    if (kind == RecommenderKind::GfCf || kind == RecommenderKind::IdealLowPass) {
        GpmConfig cfg = options.gpm;
        cfg.k = params.dim;
        model.basis = generalized_power_method(make_item_graph(model.normalized), cfg);
    } else if (kind == RecommenderKind::Autoencoder) {
        model.dense_b = fit_autoencoder(model.normalized, params.mu, options.dense_cap);
    }
    validate_model(model);
    return model;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto result = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip
    return std::string(buf, result.ptr);
}

inline std::string format_coeffs(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

inline std::string fingerprint_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace detail

/// Writes `path` (text manifest) and, for basis-backed kinds, `path`.basis in
/// the binary container. The manifest records the training-set location and
/// fingerprint so the matrix can be rebuilt and verified at load time.
inline void save_model(const RecommenderModel& model, const std::filesystem::path& path,
                       const std::string& train_path) {
    validate_model(model);
    std::ofstream os(path);
    if (!os) throw io_error("save_model: cannot open " + path.string());
    os << "gfcf-model-v1\n";
    os << "kind=" << kind_name(model.kind) << "\n";
    os << "n_users=" << model.n_users() << "\n";
    os << "n_items=" << model.n_items() << "\n";
    os << "train=" << train_path << "\n";
    os << "fingerprint=" << detail::fingerprint_hex(dataset_fingerprint(*model.normalized->base))
       << "\n";
    os << "alpha=" << detail::format_double(model.params.alpha) << "\n";
    os << "mu=" << detail::format_double(model.params.mu) << "\n";
    os << "beta=" << detail::format_coeffs(model.params.beta) << "\n";
    os << "dim=" << model.params.dim << "\n";
    os << "normalized_input=" << (model.params.normalized_input ? 1 : 0) << "\n";
    if (model.basis) {
        const std::string basis_name = path.filename().string() + ".basis";
        os << "basis=" << basis_name << "\n";
        save_spectral_basis(*model.basis, path.parent_path() / basis_name);
    }
    if (!os) throw io_error("save_model: write failed for " + path.string());
}

/// Rebuilds a model from its manifest. The training matrix is re-read from
/// the recorded path (or `train_override`), checked against the stored
/// fingerprint, and the autoencoder refit from its recorded mu.
inline RecommenderModel load_model(const std::filesystem::path& path,
                                   const std::string& train_override = "") {
    std::ifstream is(path);
    if (!is) throw io_error("load_model: cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "gfcf-model-v1")
        throw io_error("load_model: " + path.string() + " is not a model manifest");
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw io_error("load_model: malformed manifest line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&kv, &path](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end())
            throw io_error("load_model: manifest " + path.string() + " missing key '" + key + "'");
        return it->second;
    };

    RecommenderModel model;
    model.kind = kind_from_name(need("kind"));
    model.params.alpha = std::stod(need("alpha"));
    model.params.mu = std::stod(need("mu"));
    model.params.beta = parse_coefficient_list(need("beta"));
    model.params.dim = std::stoll(need("dim"));
    model.params.normalized_input = need("normalized_input") == "1";
    const auto n_users = static_cast<Index>(std::stoll(need("n_users")));
    const auto n_items = static_cast<Index>(std::stoll(need("n_items")));

    std::filesystem::path train_path =
        train_override.empty() ? std::filesystem::path(need("train"))
                               : std::filesystem::path(train_override);
    if (!std::filesystem::exists(train_path) && train_override.empty()) {
        // Paths recorded relative to the fit-time working directory also
        // resolve relative to the manifest.
        auto beside = path.parent_path() / train_path;
        if (std::filesystem::exists(beside)) train_path = beside;
    }
    AdjacencyFile train_file = read_adjacency_file(train_path);
    if (train_file.max_user + 1 > n_users || train_file.max_item + 1 > n_items)
        throw validation_error("load_model: training file exceeds manifest dimensions");
    auto interactions = std::make_shared<const InteractionMatrix>(
        build_interactions(train_file.pairs, n_users, n_items));
    const std::string fingerprint = detail::fingerprint_hex(dataset_fingerprint(*interactions));
    if (fingerprint != need("fingerprint"))
        throw validation_error("load_model: fingerprint mismatch, training data is not the set "
                               "this model was fit on");
    model.normalized = std::make_shared<const NormalizedMatrix>(normalize(interactions));

    if (auto it = kv.find("basis"); it != kv.end())
        model.basis = load_spectral_basis(path.parent_path() / it->second);
    if (model.kind == RecommenderKind::Autoencoder)
        model.dense_b = fit_autoencoder(model.normalized, model.params.mu);

    validate_model(model);
    return model;
}

} // namespace gfcf
