#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gfcf/errors.hpp"
#include "gfcf/sparse.hpp"
#include "gfcf/spectral.hpp"

namespace gfcf {

// Desk-scale Monte-Carlo checks: random-embedding propagation, mutual
// coherence against the degree bound, all-triples pairwise ordering, and the
// finite-dimension convergence of untrained propagation scores to their
// closed form.

enum class EmbeddingDistribution { UnitSphere, Gaussian };

struct EmbeddingMatrix {
    Eigen::MatrixXd rows;  // (n_users + n_items) x d, users first
    EmbeddingDistribution distribution = EmbeddingDistribution::UnitSphere;
    double sigma = 0.1;    // Gaussian scale
    std::uint64_t seed = 0;
};

inline EmbeddingMatrix sample_embeddings(Index n_rows, Index d, EmbeddingDistribution distribution,
                                         std::uint64_t seed, double sigma = 0.1) {
    if (n_rows < 1 || d < 1) throw validation_error("sample_embeddings: dimensions must be >= 1");
    EmbeddingMatrix e;
    e.distribution = distribution;
    e.sigma = sigma;
    e.seed = seed;
    e.rows.resize(n_rows, d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index r = 0; r < n_rows; ++r)
        for (Index c = 0; c < d; ++c) e.rows(r, c) = gauss(rng);
    if (distribution == EmbeddingDistribution::UnitSphere) {
        for (Index r = 0; r < n_rows; ++r) e.rows.row(r).normalize();
    } else {
        e.rows *= sigma;
    }
    return e;
}

/// max_{i != j} |<row_i, row_j>|.
inline double mutual_coherence(const Eigen::MatrixXd& rows) {
    const Index n = rows.rows();
    double best = 0.0;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            best = std::max(best, std::abs(rows.row(i).dot(rows.row(j))));
    return best;
}

/// Layer-combined propagation sum_k combo[k] A~^k E0, computed blockwise via
/// R~ / R~^T alternation. Rows: users first, then items.
inline Eigen::MatrixXd propagate_light(const EmbeddingMatrix& embeddings,
                                       const NormalizedMatrix& graph, int layers,
                                       std::span<const double> combo) {
    const Index nu = graph.n_users();
    const Index ni = graph.n_items();
    if (embeddings.rows.rows() != nu + ni)
        throw validation_error("propagate_light: embedding rows != n_users + n_items");
    if (static_cast<int>(combo.size()) != layers + 1)
        throw validation_error("propagate_light: combo must have layers + 1 weights");

    Eigen::MatrixXd user_part = embeddings.rows.topRows(nu);
    Eigen::MatrixXd item_part = embeddings.rows.bottomRows(ni);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nu + ni, embeddings.rows.cols());
    out.topRows(nu) = combo[0] * user_part;
    out.bottomRows(ni) = combo[0] * item_part;

    Eigen::VectorXd from_items(nu), from_users(ni);
    for (int k = 1; k <= layers; ++k) {
        Eigen::MatrixXd next_users(nu, embeddings.rows.cols());
        Eigen::MatrixXd next_items(ni, embeddings.rows.cols());
        for (Index c = 0; c < embeddings.rows.cols(); ++c) {
            Eigen::VectorXd vi = item_part.col(c);
            Eigen::VectorXd vu = user_part.col(c);
            graph.multiply(vi, from_items);            // R~ V
            graph.multiply_transpose(vu, from_users);  // R~^T U
            next_users.col(c) = from_items;
            next_items.col(c) = from_users;
        }
        user_part.swap(next_users);
        item_part.swap(next_items);
        out.topRows(nu) += combo[static_cast<std::size_t>(k)] * user_part;
        out.bottomRows(ni) += combo[static_cast<std::size_t>(k)] * item_part;
    }
    return out;
}

/// Dense normalized bipartite adjacency [[0, R~], [R~^T, 0]].
inline Eigen::MatrixXd dense_bipartite_adjacency(const NormalizedMatrix& graph) {
    const Index nu = graph.n_users();
    const Index ni = graph.n_items();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nu + ni, nu + ni);
    Eigen::MatrixXd r = graph.dense();
    a.topRightCorner(nu, ni) = r;
    a.bottomLeftCorner(ni, nu) = r.transpose();
    return a;
}

struct TrialResult {
    std::uint64_t seed = 0;
    double coherence = 0.0;
    bool event_holds = false;   // every sampled (u, i in N_u, j not in N_u) ordered correctly
    bool bound_satisfied = false;  // coherence < sqrt(N_min / (2 N_max^3))
};

struct TheoryReport {
    Index d = 0;
    double coherence = 0.0;        // mean measured coherence across trials
    double coherence_bound = 0.0;  // sqrt(N_min / (2 N_max^3))
    double ordering_success_rate = 0.0;
    Index n_max = 0;
    Index n_min = 0;
    double score_correlation = 0.0;   // mean per-user Spearman vs closed form
    double frobenius_rel_error = 0.0;
    std::vector<TrialResult> trials;
};

namespace detail {

inline void node_degree_range(const InteractionMatrix& m, Index& n_min, Index& n_max) {
    n_min = std::numeric_limits<Index>::max();
    n_max = 0;
    for (Index deg : m.user_degrees) {
        n_min = std::min(n_min, deg);
        n_max = std::max(n_max, deg);
    }
    for (Index deg : m.item_degrees) {
        n_min = std::min(n_min, deg);
        n_max = std::max(n_max, deg);
    }
    if (m.n_users == 0 && m.n_items == 0) n_min = 0;
}

/// Average ranks with tie midpoints.
inline Eigen::VectorXd rank_with_ties(const Eigen::VectorXd& v) {
    const Index n = v.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&v](Index a, Index b) { return v[a] < v[b]; });
    Eigen::VectorXd ranks(n);
    Index i = 0;
    while (i < n) {
        Index j = i;
        while (j + 1 < n && v[order[static_cast<std::size_t>(j + 1)]] ==
                                v[order[static_cast<std::size_t>(i)]])
            ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Index t = i; t <= j; ++t) ranks[order[static_cast<std::size_t>(t)]] = mid;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

/// Spearman rank correlation (tie-aware); NaN-free, returns 0 for constant input.
inline double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw validation_error("spearman: length mismatch");
    if (a.size() < 2) return 0.0;
    Eigen::VectorXd ra = detail::rank_with_ties(a);
    Eigen::VectorXd rb = detail::rank_with_ties(b);
    ra.array() -= ra.mean();
    rb.array() -= rb.mean();
    const double den = ra.norm() * rb.norm();
    return den > 0.0 ? ra.dot(rb) / den : 0.0;
}

/// One-layer untrained propagation ordering check. Per trial: sample a
/// unit-sphere frame, propagate one layer, and test the score ordering
/// e_u^(1) . e_i^(0) > e_u^(1) . e_j^(0) over all (or a seeded sample of)
/// (u, i in N_u, j not in N_u) triples, alongside the measured mutual
/// coherence and its degree bound.
inline TheoryReport verify_ordering_event(const NormalizedMatrix& graph, Index d, int trials,
                                    std::uint64_t seed, Index max_triples = 1'000'000) {
    const InteractionMatrix& m = *graph.base;
    TheoryReport report;
    report.d = d;
    detail::node_degree_range(m, report.n_min, report.n_max);
    if (report.n_min < 1)
        throw validation_error("verify_ordering_event: graph has an isolated node (N_min = 0)");
    report.coherence_bound = std::sqrt(static_cast<double>(report.n_min) /
                                       (2.0 * std::pow(static_cast<double>(report.n_max), 3)));

    // Triple census: sum_u N_u * (n_items - N_u).
    std::int64_t total_triples = 0;
    for (Index u = 0; u < m.n_users; ++u)
        total_triples += m.user_degrees[static_cast<std::size_t>(u)] *
                         (m.n_items - m.user_degrees[static_cast<std::size_t>(u)]);
    const bool exhaustive = total_triples <= max_triples;

    int successes = 0;
    double coherence_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = seed + static_cast<std::uint64_t>(t);
        EmbeddingMatrix e0 = sample_embeddings(m.n_users + m.n_items, d,
                                               EmbeddingDistribution::UnitSphere, trial_seed);
        const double coherence = mutual_coherence(e0.rows);

        // One-layer user embeddings: U^(1) = R~ V^(0).
        const Eigen::MatrixXd v0 = e0.rows.bottomRows(m.n_items);
        Eigen::MatrixXd u1(m.n_users, d);
        {
            Eigen::VectorXd acc(m.n_users);
            for (Index c = 0; c < d; ++c) {
                Eigen::VectorXd col = v0.col(c);
                graph.multiply(col, acc);
                u1.col(c) = acc;
            }
        }
        // scores(u, i) = e_u^(1) . e_i^(0)
        Eigen::MatrixXd scores = u1 * v0.transpose();

        bool all_ordered = true;
        if (exhaustive) {
            for (Index u = 0; u < m.n_users && all_ordered; ++u) {
                auto row = m.items_of(u);
                double min_pos = std::numeric_limits<double>::infinity();
                for (Index i : row) min_pos = std::min(min_pos, scores(u, i));
                auto it = row.begin();
                for (Index j = 0; j < m.n_items; ++j) {
                    if (it != row.end() && *it == j) {
                        ++it;
                        continue;
                    }
                    if (!(min_pos > scores(u, j))) {
                        all_ordered = false;
                        break;
                    }
                }
            }
        } else {
            std::mt19937_64 rng(trial_seed ^ 0x9e3779b97f4a7c15ull);
            std::uniform_int_distribution<Index> pick_user(0, m.n_users - 1);
            std::uniform_int_distribution<Index> pick_item(0, m.n_items - 1);
            Index sampled = 0;
            while (sampled < max_triples) {
                const Index u = pick_user(rng);
                auto row = m.items_of(u);
                if (row.empty() || static_cast<Index>(row.size()) == m.n_items) continue;
                std::uniform_int_distribution<std::size_t> pick_pos(0, row.size() - 1);
                const Index i = row[pick_pos(rng)];
                Index j = pick_item(rng);
                while (m.has(u, j)) j = pick_item(rng);
                ++sampled;
                if (!(scores(u, i) > scores(u, j))) {
                    all_ordered = false;
                    break;
                }
            }
        }

        const bool bound_ok = coherence < report.coherence_bound;
        report.trials.push_back({trial_seed, coherence, all_ordered, bound_ok});
        coherence_sum += coherence;
        if (all_ordered) ++successes;
    }

    report.coherence = trials > 0 ? coherence_sum / trials : 0.0;
    report.ordering_success_rate =
        trials > 0 ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
    return report;
}

/// Closed-form limit of the untrained layer-combined propagation scores.
/// Expanding U V^T and keeping the cross terms that survive in expectation
/// gives sum over (i, j) with i + j odd of combo[i] combo[j]
/// (R~ R~^T)^((i+j-1)/2) R~ — the polynomial-in-gram form with coefficients
/// implied by the layer combination.
inline Eigen::MatrixXd lgcn_ide_limit_scores(const NormalizedMatrix& graph,
                                             std::span<const double> combo) {
    Eigen::MatrixXd r = graph.dense();
    const Eigen::MatrixXd gram_users = r * r.transpose();  // R~ R~^T
    const int layers = static_cast<int>(combo.size()) - 1;
    Eigen::MatrixXd score = Eigen::MatrixXd::Zero(r.rows(), r.cols());
    for (int i = 0; i <= layers; ++i)
        for (int j = 0; j <= layers; ++j) {
            if ((i + j) % 2 == 0) continue;
            const int half = (i + j - 1) / 2;
            Eigen::MatrixXd term = r;
            for (int p = 0; p < half; ++p) term = gram_users * term;
            score += combo[static_cast<std::size_t>(i)] * combo[static_cast<std::size_t>(j)] * term;
        }
    return score;
}

/// Finite-dimension convergence toward the closed form: for each d, sample a
/// zero-mean frame, propagate with the layer combination, and compare the
/// score matrix U V^T against the closed form by per-user rank correlation.
inline std::vector<TheoryReport> verify_limit_convergence(const NormalizedMatrix& graph,
                                                          std::span<const Index> d_list,
                                                          std::uint64_t seed, int trials = 1,
                                                          std::span<const double> combo_in = {}) {
    const InteractionMatrix& m = *graph.base;
    std::vector<double> combo(combo_in.begin(), combo_in.end());
    if (combo.empty()) combo = {0.25, 0.25, 0.25, 0.25};  // uniform 3-layer combination
    const int layers = static_cast<int>(combo.size()) - 1;

    const Eigen::MatrixXd closed = lgcn_ide_limit_scores(graph, combo);

    std::vector<TheoryReport> reports;
    for (Index d : d_list) {
        TheoryReport report;
        report.d = d;
        detail::node_degree_range(m, report.n_min, report.n_max);
        double corr_sum = 0.0;
        double frob_sum = 0.0;
        for (int t = 0; t < trials; ++t) {
            const std::uint64_t trial_seed =
                seed + 0x10001ull * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(t);
            EmbeddingMatrix e0 = sample_embeddings(m.n_users + m.n_items, d,
                                                   EmbeddingDistribution::Gaussian, trial_seed, 0.1);
            Eigen::MatrixXd propagated = propagate_light(e0, graph, layers, combo);
            // Inner products scale with d sigma^2; normalize to the limit scale.
            Eigen::MatrixXd finite = propagated.topRows(m.n_users) *
                                     propagated.bottomRows(m.n_items).transpose() /
                                     (static_cast<double>(d) * 0.01);
            double corr = 0.0;
            Index counted = 0;
            for (Index u = 0; u < m.n_users; ++u) {
                if (m.user_degrees[static_cast<std::size_t>(u)] == 0) continue;
                corr += spearman(finite.row(u), closed.row(u));
                ++counted;
            }
            corr_sum += counted > 0 ? corr / static_cast<double>(counted) : 0.0;
            frob_sum += (finite - closed).norm() / std::max(closed.norm(), 1e-300);
            report.trials.push_back({trial_seed, 0.0, false, false});
        }
        report.score_correlation = trials > 0 ? corr_sum / trials : 0.0;
        report.frobenius_rel_error = trials > 0 ? frob_sum / trials : 0.0;
        reports.push_back(std::move(report));
    }
    return reports;
}

struct SpectrumReport {
    Eigen::VectorXd item_graph_values;  // eigenvalues of P~, descending
    Eigen::VectorXd bipartite_values;   // eigenvalues of A~, descending
    Index edge_components = 0;          // connected components containing an edge
    bool bounds_hold = false;
};

namespace detail {

struct UnionFind {
    std::vector<Index> parent;
    explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), Index{0});
    }
    Index find(Index x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(Index a, Index b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

} // namespace detail

inline Index count_edge_components(const InteractionMatrix& m) {
    detail::UnionFind uf(m.n_users + m.n_items);
    for (Index u = 0; u < m.n_users; ++u)
        for (Index i : m.items_of(u)) uf.unite(u, m.n_users + i);
    std::vector<Index> roots;
    for (Index u = 0; u < m.n_users; ++u)
        if (m.user_degrees[static_cast<std::size_t>(u)] > 0) roots.push_back(uf.find(u));
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
    return static_cast<Index>(roots.size());
}

/// Densifies P~ and A~ and checks the spectrum bounds: P~'s eigenvalues in
/// [0, 1], A~'s in [-1, 1] with eigenvalue 1 reached once per component with
/// an edge (all within 1e-9).
inline SpectrumReport verify_spectrum(const NormalizedMatrix& graph,
                                      Index dense_cap = kDefaultDenseCap) {
    if (graph.n_users() + graph.n_items() > dense_cap)
        throw validation_error("dense path unavailable: bipartite dimension " +
                               std::to_string(graph.n_users() + graph.n_items()) +
                               " exceeds dense cap " + std::to_string(dense_cap));
    SpectrumReport report;
    Eigen::MatrixXd r = graph.dense();
    Eigen::MatrixXd p = r.transpose() * r;
    p = ((p + p.transpose()) * 0.5).eval();
    report.item_graph_values = dense_spectral_oracle(p, dense_cap).values;
    report.bipartite_values =
        dense_spectral_oracle(dense_bipartite_adjacency(graph), dense_cap).values;
    report.edge_components = count_edge_components(*graph.base);

    const double tol = 1e-9;
    bool ok = true;
    for (Index i = 0; i < report.item_graph_values.size(); ++i) {
        const double v = report.item_graph_values[i];
        if (v < -tol || v > 1.0 + tol) ok = false;
    }
    for (Index i = 0; i < report.bipartite_values.size(); ++i) {
        const double v = report.bipartite_values[i];
        if (v < -1.0 - tol || v > 1.0 + tol) ok = false;
    }
    if (report.edge_components > 0) {
        // Eigenvalue 1 with multiplicity (at least) one per edge component.
        const Index m = report.edge_components;
        if (report.bipartite_values.size() < m ||
            std::abs(report.bipartite_values[m - 1] - 1.0) > tol)
            ok = false;
    } else if (report.bipartite_values.size() > 0 &&
               report.bipartite_values.cwiseAbs().maxCoeff() > tol) {
        ok = false;
    }
    report.bounds_hold = ok;
    return report;
}

/// Seeded random bipartite edge list at the requested density. Every user
/// and every item receives at least one edge when ensure_min_degree is set
/// (and the density allows it).
inline std::vector<std::pair<Index, Index>> make_random_bipartite(Index n_users, Index n_items,
                                                                  double density,
                                                                  std::mt19937_64& rng,
                                                                  bool ensure_min_degree = true) {
    if (n_users < 1 || n_items < 1)
        throw validation_error("make_random_bipartite: dimensions must be >= 1");
    if (!(density >= 0.0 && density <= 1.0))
        throw validation_error("make_random_bipartite: density must lie in [0, 1]");
    std::vector<std::pair<Index, Index>> pairs;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (Index u = 0; u < n_users; ++u)
        for (Index i = 0; i < n_items; ++i)
            if (coin(rng) < density) pairs.emplace_back(u, i);
    if (ensure_min_degree) {
        std::vector<bool> user_hit(static_cast<std::size_t>(n_users), false);
        std::vector<bool> item_hit(static_cast<std::size_t>(n_items), false);
        for (const auto& [u, i] : pairs) {
            user_hit[static_cast<std::size_t>(u)] = true;
            item_hit[static_cast<std::size_t>(i)] = true;
        }
        std::uniform_int_distribution<Index> pick_item(0, n_items - 1);
        std::uniform_int_distribution<Index> pick_user(0, n_users - 1);
        for (Index u = 0; u < n_users; ++u)
            if (!user_hit[static_cast<std::size_t>(u)]) {
                const Index i = pick_item(rng);
                pairs.emplace_back(u, i);
                item_hit[static_cast<std::size_t>(i)] = true;
            }
        for (Index i = 0; i < n_items; ++i)
            if (!item_hit[static_cast<std::size_t>(i)]) pairs.emplace_back(pick_user(rng), i);
    }
    return pairs;
}

} // namespace gfcf
