#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gfcf/errors.hpp"
#include "gfcf/sparse.hpp"

namespace gfcf {

struct GpmConfig {
    Index k = 256;
    int max_iterations = 1000;
    double tolerance = 1e-10;  // Rayleigh-quotient plateau threshold
    std::uint64_t seed = 0;
    /// Optional warm start (n_items x k). Empty means seeded Gaussian init.
    Eigen::MatrixXd warm_start;
};

/// Top-k eigenpairs of P~ (equivalently squared top singular pairs of R~).
/// Columns orthonormal, values descending.
struct SpectralBasis {
    Index k = 0;
    Eigen::MatrixXd vectors;   // n_items x k
    Eigen::VectorXd values;    // eigenvalues of P~, descending
    int iterations_used = 0;   // gradient steps until the quotients stabilized
    double residual = 0.0;     // max_j ||P~ u_j - value_j u_j||_2
    bool converged = false;
    bool rank_truncated = false;  // requested k exceeded the achievable rank

    Index n_items() const { return vectors.rows(); }

    /// Laplacian-convention eigenvalues (ascending): 1 - values.
    Eigen::VectorXd laplacian_values() const {
        return Eigen::VectorXd::Ones(values.size()) - values;
    }
};

/// Per-iteration hook for property tests: (iteration, Rayleigh quotients).
using GpmObserver = std::function<void(int, const Eigen::VectorXd&)>;

namespace detail {

inline Eigen::MatrixXd thin_q(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

} // namespace detail

/// Alternating gradient step E <- P~ E (two sparse passes per column) and
/// re-orthonormalization onto the Stiefel manifold via a thin QR factor;
/// same retained subspace as the polar form E(E^T E)^{-1/2}. Terminates when
/// the per-column Rayleigh quotients hold still for three consecutive
/// iterations, then extracts eigenpairs with a Rayleigh-Ritz rotation.
inline SpectralBasis generalized_power_method(const ItemGraphOperator& op, const GpmConfig& cfg,
                                              const GpmObserver& observer = {}) {
    if (cfg.k < 1) throw validation_error("generalized_power_method: k must be >= 1");
    if (!(cfg.tolerance > 0)) throw validation_error("generalized_power_method: tolerance must be > 0");
    if (cfg.max_iterations < 0) throw validation_error("generalized_power_method: negative iteration budget");
    const Index n = op.n_items();

    // Structural rank bound of P~ = R~^T R~.
    const Index rank_bound = std::min({n, op.n_users(), op.source->base->nnz()});
    Index k = cfg.k;
    bool truncated = false;
    if (k > rank_bound) {
        k = std::max<Index>(rank_bound, 1);
        truncated = true;
    }

    Eigen::MatrixXd e;
    if (cfg.warm_start.size() > 0) {
        if (cfg.warm_start.rows() != n || cfg.warm_start.cols() != k)
            throw validation_error("generalized_power_method: warm start shape mismatch");
        e = detail::thin_q(cfg.warm_start);
    } else {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd init(n, k);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < k; ++j) init(i, j) = gauss(rng);
        e = detail::thin_q(init);
    }

    // Each pass: one gram application, Rayleigh quotients of the current
    // iterate, then the QR retraction. Pass t measures the iterate after t
    // retractions, so the quotient history starts at the initial frame.
    Eigen::MatrixXd g;
    Eigen::VectorXd quotients;
    int streak = 0;
    int settled_at = 0;
    bool converged = false;
    for (int t = 0;; ++t) {
        g = apply_gram_matrix(op, e);
        Eigen::VectorXd q(k);
        for (Index j = 0; j < k; ++j) q[j] = e.col(j).dot(g.col(j));
        if (observer) observer(t, q);
        if (t > 0) {
            const double change = (q - quotients).cwiseAbs().maxCoeff();
            if (change < cfg.tolerance) {
                if (streak == 0) settled_at = t;
                ++streak;
            } else {
                streak = 0;
            }
        }
        quotients = q;
        if (streak >= 3) {
            converged = true;
            break;
        }
        if (t >= cfg.max_iterations) break;
        e = detail::thin_q(g);
    }

    // Rayleigh-Ritz: rotate the converged subspace onto eigenvector directions.
    Eigen::MatrixXd small = e.transpose() * g;
    small = ((small + small.transpose()) * 0.5).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(small);
    if (ritz.info() != Eigen::Success)
        throw numeric_error("generalized_power_method: Rayleigh-Ritz solve failed");

    SpectralBasis basis;
    basis.vectors.resize(n, k);
    basis.values.resize(k);
    Eigen::MatrixXd rotated = e * ritz.eigenvectors();
    Eigen::MatrixXd rotated_g = g * ritz.eigenvectors();
    for (Index j = 0; j < k; ++j) {
        // Solver returns ascending; store descending. The operator is PSD, so
        // sub-tolerance negative Ritz values are rounding noise.
        const Index src = k - 1 - j;
        double value = ritz.eigenvalues()[src];
        if (value < 0.0 && value > -1e-9) value = 0.0;
        basis.values[j] = value;
        basis.vectors.col(j) = rotated.col(src);
    }
    double residual = 0.0;
    for (Index j = 0; j < k; ++j) {
        const Index src = k - 1 - j;
        residual = std::max(residual,
                            (rotated_g.col(src) - basis.values[j] * basis.vectors.col(j)).norm());
    }

    // Drop numerically null directions when the request exceeded the rank.
    Index keep = k;
    while (keep > 1 && basis.values[keep - 1] < 1e-12) --keep;
    if (keep < k) {
        basis.values = basis.values.head(keep).eval();
        basis.vectors = basis.vectors.leftCols(keep).eval();
        truncated = true;
    }

    basis.k = basis.values.size();
    basis.iterations_used = converged ? settled_at : cfg.max_iterations;
    basis.residual = residual;
    basis.converged = converged;
    basis.rank_truncated = truncated;
    return basis;
}

/// Full eigendecomposition of a symmetric matrix, values descending.
struct DenseEigen {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // columns aligned with values
};

inline DenseEigen dense_spectral_oracle(const Eigen::MatrixXd& sym,
                                        Index dense_cap = kDefaultDenseCap) {
    if (sym.rows() != sym.cols())
        throw validation_error("dense_spectral_oracle: matrix not square");
    if (sym.rows() > dense_cap)
        throw validation_error("dense path unavailable: dimension " + std::to_string(sym.rows()) +
                               " exceeds dense cap " + std::to_string(dense_cap));
    if (sym.size() > 0 && (sym - sym.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw validation_error("dense_spectral_oracle: matrix not symmetric within 1e-10");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success)
        throw numeric_error("dense_spectral_oracle: eigendecomposition failed");
    const Index n = sym.rows();
    DenseEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        out.values[j] = solver.eigenvalues()[n - 1 - j];
        out.vectors.col(j) = solver.eigenvectors().col(n - 1 - j);
    }
    return out;
}

// --- persistence ------------------------------------------------------------
//
// Binary container: magic "GFCF", version u16, n_items u64, k u64, then
// values as little-endian f64[k], then vectors column-major f64[n_items*k].

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
}

inline std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

} // namespace detail

inline constexpr std::uint16_t kBasisFormatVersion = 1;

inline void save_spectral_basis(const SpectralBasis& basis, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_spectral_basis: cannot open " + path.string());
    os.write("GFCF", 4);
    detail::put_u16(os, kBasisFormatVersion);
    detail::put_u64(os, static_cast<std::uint64_t>(basis.n_items()));
    detail::put_u64(os, static_cast<std::uint64_t>(basis.k));
    for (Index j = 0; j < basis.k; ++j) detail::put_f64(os, basis.values[j]);
    for (Index j = 0; j < basis.k; ++j)
        for (Index i = 0; i < basis.n_items(); ++i) detail::put_f64(os, basis.vectors(i, j));
    if (!os) throw io_error("save_spectral_basis: write failed for " + path.string());
}

inline SpectralBasis load_spectral_basis(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_spectral_basis: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GFCF", 4) != 0)
        throw io_error("load_spectral_basis: bad magic in " + path.string());
    const std::uint16_t version = detail::get_u16(is);
    if (version != kBasisFormatVersion)
        throw io_error("load_spectral_basis: unsupported format version " +
                       std::to_string(version));
    const auto n_items = static_cast<Index>(detail::get_u64(is));
    const auto k = static_cast<Index>(detail::get_u64(is));
    if (n_items < 0 || k < 0 || k > n_items)
        throw io_error("load_spectral_basis: corrupt header in " + path.string());

    SpectralBasis basis;
    basis.k = k;
    basis.values.resize(k);
    basis.vectors.resize(n_items, k);
    for (Index j = 0; j < k; ++j) basis.values[j] = detail::get_f64(is);
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < n_items; ++i) basis.vectors(i, j) = detail::get_f64(is);
    if (!is) throw io_error("load_spectral_basis: truncated file " + path.string());
    basis.converged = true;
    return basis;
}

} // namespace gfcf
