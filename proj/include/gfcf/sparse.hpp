#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gfcf/errors.hpp"

namespace gfcf {

using Index = std::int64_t;

inline constexpr Index kDefaultDenseCap = 4096;

/// Binary user-item interaction matrix in CSR form. Entries are implicit 1s,
/// duplicates collapsed (set semantics), columns sorted within each row.
struct InteractionMatrix {
    Index n_users = 0;
    Index n_items = 0;
    std::vector<Index> row_ptr;       // n_users + 1
    std::vector<Index> col_idx;       // nnz, sorted per row
    std::vector<Index> user_degrees;  // D_U diagonal
    std::vector<Index> item_degrees;  // D_I diagonal

    Index nnz() const { return static_cast<Index>(col_idx.size()); }

    std::span<const Index> items_of(Index u) const {
        return {col_idx.data() + row_ptr[u], col_idx.data() + row_ptr[u + 1]};
    }

    bool has(Index u, Index i) const {
        auto row = items_of(u);
        return std::binary_search(row.begin(), row.end(), i);
    }
};

inline InteractionMatrix build_interactions(std::span<const std::pair<Index, Index>> pairs,
                                            Index n_users, Index n_items) {
    if (n_users < 0 || n_items < 0)
        throw validation_error("build_interactions: negative dimensions");
    for (const auto& [u, i] : pairs) {
        if (u < 0 || u >= n_users || i < 0 || i >= n_items)
            throw validation_error("build_interactions: pair (" + std::to_string(u) + ", " +
                                   std::to_string(i) + ") out of range for " +
                                   std::to_string(n_users) + " users x " +
                                   std::to_string(n_items) + " items");
    }

    std::vector<std::pair<Index, Index>> sorted(pairs.begin(), pairs.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    InteractionMatrix m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.row_ptr.assign(static_cast<std::size_t>(n_users) + 1, 0);
    m.col_idx.reserve(sorted.size());
    m.user_degrees.assign(static_cast<std::size_t>(n_users), 0);
    m.item_degrees.assign(static_cast<std::size_t>(n_items), 0);

    for (const auto& [u, i] : sorted) {
        m.col_idx.push_back(i);
        ++m.user_degrees[static_cast<std::size_t>(u)];
        ++m.item_degrees[static_cast<std::size_t>(i)];
    }
    for (Index u = 0; u < n_users; ++u)
        m.row_ptr[static_cast<std::size_t>(u) + 1] =
            m.row_ptr[static_cast<std::size_t>(u)] + m.user_degrees[static_cast<std::size_t>(u)];
    return m;
}

/// Symmetrically normalized interaction matrix: weight(u,i) = scale_u * scale_i
/// with scale = degree^{-1/2}. Zero-degree rows/columns get scale 0, so the
/// normalized row of an unseen user is all zeros.
///
/// Both the row-major weights and the transpose (items as rows) are cached:
/// one pass in each direction is all the gram products need.
struct NormalizedMatrix {
    std::shared_ptr<const InteractionMatrix> base;
    std::vector<double> row_scale;  // D_U^{-1/2}
    std::vector<double> col_scale;  // D_I^{-1/2}
    std::vector<double> values;     // aligned with base->col_idx

    std::vector<Index> t_row_ptr;   // n_items + 1
    std::vector<Index> t_col_idx;   // users, sorted per item
    std::vector<double> t_values;

    Index n_users() const { return base->n_users; }
    Index n_items() const { return base->n_items; }

    /// Dense copy of row u of the normalized matrix.
    Eigen::VectorXd row_dense(Index u) const {
        if (u < 0 || u >= n_users())
            throw validation_error("row_dense: user " + std::to_string(u) + " out of range");
        Eigen::VectorXd r = Eigen::VectorXd::Zero(n_items());
        const Index begin = base->row_ptr[static_cast<std::size_t>(u)];
        const Index end = base->row_ptr[static_cast<std::size_t>(u) + 1];
        for (Index e = begin; e < end; ++e)
            r[base->col_idx[static_cast<std::size_t>(e)]] = values[static_cast<std::size_t>(e)];
        return r;
    }

    /// y = R~ x  (x over items, y over users).
    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
        y.setZero(n_users());
        for (Index u = 0; u < n_users(); ++u) {
            double acc = 0.0;
            const Index begin = base->row_ptr[static_cast<std::size_t>(u)];
            const Index end = base->row_ptr[static_cast<std::size_t>(u) + 1];
            for (Index e = begin; e < end; ++e)
                acc += values[static_cast<std::size_t>(e)] *
                       x[base->col_idx[static_cast<std::size_t>(e)]];
            y[u] = acc;
        }
    }

    /// z = R~^T y  (y over users, z over items).
    void multiply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& z) const {
        z.setZero(n_items());
        for (Index i = 0; i < n_items(); ++i) {
            double acc = 0.0;
            const Index begin = t_row_ptr[static_cast<std::size_t>(i)];
            const Index end = t_row_ptr[static_cast<std::size_t>(i) + 1];
            for (Index e = begin; e < end; ++e)
                acc += t_values[static_cast<std::size_t>(e)] *
                       y[t_col_idx[static_cast<std::size_t>(e)]];
            z[i] = acc;
        }
    }

    /// Dense n_users x n_items copy. Intended for desk-scale oracles only.
    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_users(), n_items());
        for (Index u = 0; u < n_users(); ++u) {
            const Index begin = base->row_ptr[static_cast<std::size_t>(u)];
            const Index end = base->row_ptr[static_cast<std::size_t>(u) + 1];
            for (Index e = begin; e < end; ++e)
                d(u, base->col_idx[static_cast<std::size_t>(e)]) =
                    values[static_cast<std::size_t>(e)];
        }
        return d;
    }
};

inline NormalizedMatrix normalize(std::shared_ptr<const InteractionMatrix> base) {
    if (!base) throw validation_error("normalize: null interaction matrix");
    NormalizedMatrix nm;
    nm.base = std::move(base);
    const InteractionMatrix& m = *nm.base;

    auto inv_sqrt = [](Index deg) { return deg > 0 ? 1.0 / std::sqrt(static_cast<double>(deg)) : 0.0; };
    nm.row_scale.resize(static_cast<std::size_t>(m.n_users));
    nm.col_scale.resize(static_cast<std::size_t>(m.n_items));
    for (Index u = 0; u < m.n_users; ++u)
        nm.row_scale[static_cast<std::size_t>(u)] = inv_sqrt(m.user_degrees[static_cast<std::size_t>(u)]);
    for (Index i = 0; i < m.n_items; ++i)
        nm.col_scale[static_cast<std::size_t>(i)] = inv_sqrt(m.item_degrees[static_cast<std::size_t>(i)]);

    nm.values.resize(static_cast<std::size_t>(m.nnz()));
    for (Index u = 0; u < m.n_users; ++u) {
        const Index begin = m.row_ptr[static_cast<std::size_t>(u)];
        const Index end = m.row_ptr[static_cast<std::size_t>(u) + 1];
        for (Index e = begin; e < end; ++e)
            nm.values[static_cast<std::size_t>(e)] =
                nm.row_scale[static_cast<std::size_t>(u)] *
                nm.col_scale[static_cast<std::size_t>(m.col_idx[static_cast<std::size_t>(e)])];
    }

    // Transpose CSR (items as rows), stable by construction: user order within
    // each item follows the row-major sweep.
    nm.t_row_ptr.assign(static_cast<std::size_t>(m.n_items) + 1, 0);
    for (Index i = 0; i < m.n_items; ++i)
        nm.t_row_ptr[static_cast<std::size_t>(i) + 1] =
            nm.t_row_ptr[static_cast<std::size_t>(i)] + m.item_degrees[static_cast<std::size_t>(i)];
    nm.t_col_idx.resize(static_cast<std::size_t>(m.nnz()));
    nm.t_values.resize(static_cast<std::size_t>(m.nnz()));
    std::vector<Index> fill(nm.t_row_ptr.begin(), nm.t_row_ptr.end() - 1);
    for (Index u = 0; u < m.n_users; ++u) {
        const Index begin = m.row_ptr[static_cast<std::size_t>(u)];
        const Index end = m.row_ptr[static_cast<std::size_t>(u) + 1];
        for (Index e = begin; e < end; ++e) {
            const Index i = m.col_idx[static_cast<std::size_t>(e)];
            const Index pos = fill[static_cast<std::size_t>(i)]++;
            nm.t_col_idx[static_cast<std::size_t>(pos)] = u;
            nm.t_values[static_cast<std::size_t>(pos)] = nm.values[static_cast<std::size_t>(e)];
        }
    }
    return nm;
}

inline NormalizedMatrix normalize(InteractionMatrix m) {
    return normalize(std::make_shared<const InteractionMatrix>(std::move(m)));
}

/// The item-to-item operator x -> x P~ with P~ = R~^T R~, applied as two
/// sparse passes without materializing P~. An optional dense cache (capped)
/// serves the autoencoder fit and the spectral oracle.
struct ItemGraphOperator {
    std::shared_ptr<const NormalizedMatrix> source;
    Index dense_cap = kDefaultDenseCap;
    std::optional<Eigen::MatrixXd> dense_cache;

    Index n_items() const { return source->n_items(); }
    Index n_users() const { return source->n_users(); }
};

inline ItemGraphOperator make_item_graph(std::shared_ptr<const NormalizedMatrix> source,
                                         Index dense_cap = kDefaultDenseCap) {
    if (!source) throw validation_error("make_item_graph: null normalized matrix");
    return ItemGraphOperator{std::move(source), dense_cap, std::nullopt};
}

namespace detail {

inline void gram_once(const NormalizedMatrix& nm, const Eigen::VectorXd& x,
                      Eigen::VectorXd& scratch_users, Eigen::VectorXd& out) {
    nm.multiply(x, scratch_users);
    nm.multiply_transpose(scratch_users, out);
}

} // namespace detail

/// x P~^k via k alternating sparse passes.
inline Eigen::VectorXd apply_gram(const ItemGraphOperator& op, const Eigen::VectorXd& x,
                                  int power) {
    if (power < 1) throw validation_error("apply_gram: power must be >= 1");
    if (x.size() != op.n_items())
        throw validation_error("apply_gram: vector length " + std::to_string(x.size()) +
                               " != n_items " + std::to_string(op.n_items()));
    if (!x.allFinite()) throw numeric_error("apply_gram: non-finite input vector");

    Eigen::VectorXd cur = x;
    Eigen::VectorXd users(op.n_users());
    Eigen::VectorXd next(op.n_items());
    for (int k = 0; k < power; ++k) {
        detail::gram_once(*op.source, cur, users, next);
        cur.swap(next);
    }
    return cur;
}

/// Column-wise P~ X for tall-skinny X. Columns are independent, so a worker
/// pool over columns keeps summation order fixed per column.
inline Eigen::MatrixXd apply_gram_matrix(const ItemGraphOperator& op, const Eigen::MatrixXd& x) {
    if (x.rows() != op.n_items())
        throw validation_error("apply_gram_matrix: row count mismatch");
    Eigen::MatrixXd out(x.rows(), x.cols());
#pragma omp parallel
    {
        Eigen::VectorXd users(op.n_users());
        Eigen::VectorXd col(op.n_items());
#pragma omp for schedule(static)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            Eigen::VectorXd in = x.col(j);
            detail::gram_once(*op.source, in, users, col);
            out.col(j) = col;
        }
    }
    return out;
}

/// Dense P~, only below the configured cap. Symmetrized to kill the last-bit
/// asymmetry of the accumulation order.
inline Eigen::MatrixXd densify_item_graph(const ItemGraphOperator& op) {
    const Index n = op.n_items();
    if (n > op.dense_cap)
        throw validation_error("dense path unavailable: n_items=" + std::to_string(n) +
                               " exceeds dense cap " + std::to_string(op.dense_cap));
    if (op.dense_cache) return *op.dense_cache;
    Eigen::MatrixXd rd = op.source->dense();
    Eigen::MatrixXd p = rd.transpose() * rd;
    p = ((p + p.transpose()) * 0.5).eval();
    return p;
}

/// Populate the operator's dense cache (no-op above the cap is an error,
/// matching densify_item_graph).
inline void cache_dense(ItemGraphOperator& op) {
    if (!op.dense_cache) op.dense_cache = densify_item_graph(op);
}

} // namespace gfcf
