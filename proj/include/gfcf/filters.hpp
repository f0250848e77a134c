#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gfcf/errors.hpp"
#include "gfcf/sparse.hpp"

namespace gfcf {

// Spectral responses are stated over Laplacian eigenvalues lambda in [0, 1]
// (item graph: L~ = I - P~), so an eigenvalue of P~ enters as (1 - lambda).
// Ascending lambda = descending frequency ordering of P~'s spectrum.

/// Polynomial response sum_k coeffs[k] * (1 - lambda)^k.
struct LinearFilter {
    std::vector<double> coeffs;
};

/// Pass-band of 1 below a cutoff, 0 above. Specified either by rank
/// (cutoff_dim lowest eigenvalues pass) or by value (lambda <= cutoff_value).
struct IdealLowPassFilter {
    std::optional<Index> cutoff_dim;
    std::optional<double> cutoff_value;
};

/// Graph-diffusion response (1 - lambda) / (1 + mu - lambda), mu > 0.
struct DiffusionFilter {
    double mu = 1.0;
};

/// First-order response 1 - lambda (the gram-matrix similarity filter).
struct NeighborhoodFilter {};

/// Same polynomial form as LinearFilter; kept as a distinct variant because
/// its coefficients play the layer-combination role of the closed-form
/// infinite-dimensional LightGCN score.
struct LgcnIdeFilter {
    std::vector<double> coeffs;
};

using FilterSpec =
    std::variant<LinearFilter, IdealLowPassFilter, DiffusionFilter, NeighborhoodFilter, LgcnIdeFilter>;

inline void validate_filter_spec(const FilterSpec& spec) {
    std::visit(
        [](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, LinearFilter> || std::is_same_v<T, LgcnIdeFilter>) {
                if (f.coeffs.empty()) throw validation_error("filter: empty coefficient vector");
                for (double c : f.coeffs)
                    if (!std::isfinite(c)) throw validation_error("filter: non-finite coefficient");
            } else if constexpr (std::is_same_v<T, IdealLowPassFilter>) {
                if (!f.cutoff_dim && !f.cutoff_value)
                    throw validation_error("ideal low-pass: need cutoff_dim or cutoff_value");
                if (f.cutoff_dim && *f.cutoff_dim < 1)
                    throw validation_error("ideal low-pass: cutoff_dim must be >= 1");
                if (f.cutoff_value && !(*f.cutoff_value >= 0.0 && *f.cutoff_value <= 1.0))
                    throw validation_error("ideal low-pass: cutoff_value must lie in [0, 1]");
            } else if constexpr (std::is_same_v<T, DiffusionFilter>) {
                if (!(f.mu > 0)) throw validation_error("diffusion: mu must be > 0");
            }
        },
        spec);
}

/// Eigenvalue/gain pairs, eigenvalues ascending (Laplacian convention).
struct FilterResponse {
    Eigen::VectorXd eigenvalues;
    Eigen::VectorXd gains;
};

inline constexpr double kSpectrumTol = 1e-9;
inline constexpr double kCutoffTieTol = 1e-12;

namespace detail {

inline void check_laplacian_spectrum(const Eigen::VectorXd& eigenvalues) {
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        const double v = eigenvalues[i];
        if (!std::isfinite(v) || v < -kSpectrumTol || v > 1.0 + kSpectrumTol)
            throw validation_error("filter: eigenvalue " + std::to_string(v) +
                                   " outside [0, 1] item-graph Laplacian spectrum");
        if (i > 0 && v < eigenvalues[i - 1])
            throw validation_error("filter: eigenvalues must be ascending");
    }
}

inline double poly_in_one_minus_lambda(const std::vector<double>& coeffs, double lambda) {
    // Horner over powers of (1 - lambda).
    const double x = 1.0 - lambda;
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
    return acc;
}

} // namespace detail

inline FilterResponse evaluate_response(const FilterSpec& spec, const Eigen::VectorXd& eigenvalues) {
    validate_filter_spec(spec);
    detail::check_laplacian_spectrum(eigenvalues);

    const Index n = eigenvalues.size();
    FilterResponse resp;
    resp.eigenvalues = eigenvalues;
    resp.gains.resize(n);

    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, LinearFilter> || std::is_same_v<T, LgcnIdeFilter>) {
                for (Index i = 0; i < n; ++i)
                    resp.gains[i] = detail::poly_in_one_minus_lambda(f.coeffs, eigenvalues[i]);
            } else if constexpr (std::is_same_v<T, NeighborhoodFilter>) {
                for (Index i = 0; i < n; ++i) resp.gains[i] = 1.0 - eigenvalues[i];
            } else if constexpr (std::is_same_v<T, DiffusionFilter>) {
                for (Index i = 0; i < n; ++i)
                    resp.gains[i] = (1.0 - eigenvalues[i]) / (1.0 + f.mu - eigenvalues[i]);
            } else if constexpr (std::is_same_v<T, IdealLowPassFilter>) {
                double boundary;
                if (f.cutoff_dim) {
                    const Index d = std::min<Index>(*f.cutoff_dim, n);
                    boundary = d > 0 ? eigenvalues[d - 1] : -1.0;
                } else {
                    boundary = *f.cutoff_value;
                }
                // Closed cutoff: boundary ties (within 1e-12) pass.
                for (Index i = 0; i < n; ++i)
                    resp.gains[i] = eigenvalues[i] <= boundary + kCutoffTieTol ? 1.0 : 0.0;
            }
        },
        spec);

    return resp;
}

/// Low-pass ratio eta_k = max |gain| over the high band (indices k+1..n,
/// 1-based) divided by min |gain| over the low band (1..k).
inline double low_pass_ratio(const FilterResponse& resp, Index k) {
    const Index n = resp.gains.size();
    if (k < 1 || k > n - 1)
        throw validation_error("low_pass_ratio: k must satisfy 1 <= k <= n-1");
    double low = std::abs(resp.gains[0]);
    for (Index i = 1; i < k; ++i) low = std::min(low, std::abs(resp.gains[i]));
    if (!(low > 0.0))
        throw validation_error("low_pass_ratio: not k-low-pass-measurable (zero gain in low band)");
    double high = 0.0;
    for (Index i = k; i < n; ++i) high = std::max(high, std::abs(resp.gains[i]));
    return high / low;
}

/// signal * U Diag(h(lambda)) U^T for a spectral frame U with Laplacian
/// eigenvalues. Non-ideal responses need the full decomposition; a rank
/// basis only supports the ideal low-pass (projection) case.
inline Eigen::VectorXd apply_spectral_filter(const Eigen::MatrixXd& basis_vectors,
                                             const Eigen::VectorXd& laplacian_eigenvalues,
                                             const FilterSpec& spec, const Eigen::VectorXd& signal) {
    if (basis_vectors.cols() != laplacian_eigenvalues.size())
        throw validation_error("apply_spectral_filter: basis / eigenvalue count mismatch");
    if (basis_vectors.rows() != signal.size())
        throw validation_error("apply_spectral_filter: basis dimension != signal length");
    if (!std::holds_alternative<IdealLowPassFilter>(spec) &&
        basis_vectors.cols() < basis_vectors.rows())
        throw validation_error("apply_spectral_filter: non-ideal filter requires a full decomposition");

    FilterResponse resp = evaluate_response(spec, laplacian_eigenvalues);
    Eigen::VectorXd coeffs = basis_vectors.transpose() * signal;
    coeffs.array() *= resp.gains.array();
    return basis_vectors * coeffs;
}

// --- key=value serialization -------------------------------------------------
//
// Fragment grammar: `filter=<name> [key=value ...]`, names: linear,
// ideal-lowpass, diffusion, neighborhood, lgcn-ide.

inline std::string format_filter_spec(const FilterSpec& spec) {
    validate_filter_spec(spec);
    auto join = [](const std::vector<double>& v) {
        std::ostringstream os;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) os << ',';
            os << v[i];
        }
        return os.str();
    };
    std::ostringstream os;
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, LinearFilter>)
                os << "filter=linear beta=" << join(f.coeffs);
            else if constexpr (std::is_same_v<T, LgcnIdeFilter>)
                os << "filter=lgcn-ide beta=" << join(f.coeffs);
            else if constexpr (std::is_same_v<T, NeighborhoodFilter>)
                os << "filter=neighborhood";
            else if constexpr (std::is_same_v<T, DiffusionFilter>)
                os << "filter=diffusion mu=" << f.mu;
            else if constexpr (std::is_same_v<T, IdealLowPassFilter>) {
                os << "filter=ideal-lowpass";
                if (f.cutoff_dim) os << " dim=" << *f.cutoff_dim;
                if (f.cutoff_value) os << " cutoff=" << *f.cutoff_value;
            }
        },
        spec);
    return os.str();
}

inline std::vector<double> parse_coefficient_list(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::istringstream is(text);
    while (std::getline(is, token, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(token, &pos));
            if (pos != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw validation_error("cannot parse coefficient '" + token + "'");
        }
    }
    if (out.empty()) throw validation_error("empty coefficient list");
    return out;
}

inline FilterSpec parse_filter_spec(const std::string& fragment) {
    std::istringstream is(fragment);
    std::string token;
    std::string name;
    std::vector<std::pair<std::string, std::string>> kv;
    while (is >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos)
            throw validation_error("filter fragment token '" + token + "' is not key=value");
        std::string key = token.substr(0, eq);
        std::string value = token.substr(eq + 1);
        if (key == "filter")
            name = value;
        else
            kv.emplace_back(key, value);
    }
    if (name.empty()) throw validation_error("filter fragment missing filter=<name>");

    auto find = [&](const std::string& key) -> std::optional<std::string> {
        for (const auto& [k, v] : kv)
            if (k == key) return v;
        return std::nullopt;
    };
    auto to_double = [](const std::string& v) {
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw validation_error("cannot parse number '" + v + "'");
        }
    };

    FilterSpec spec;
    if (name == "linear") {
        auto beta = find("beta");
        if (!beta) throw validation_error("linear filter needs beta=<c0,c1,...>");
        spec = LinearFilter{parse_coefficient_list(*beta)};
    } else if (name == "lgcn-ide") {
        auto beta = find("beta");
        if (!beta) throw validation_error("lgcn-ide filter needs beta=<c0,c1,...>");
        spec = LgcnIdeFilter{parse_coefficient_list(*beta)};
    } else if (name == "neighborhood") {
        spec = NeighborhoodFilter{};
    } else if (name == "diffusion") {
        auto mu = find("mu");
        if (!mu) throw validation_error("diffusion filter needs mu=<value>");
        spec = DiffusionFilter{to_double(*mu)};
    } else if (name == "ideal-lowpass") {
        IdealLowPassFilter f;
        if (auto dim = find("dim")) f.cutoff_dim = static_cast<Index>(std::stoll(*dim));
        if (auto cutoff = find("cutoff")) f.cutoff_value = to_double(*cutoff);
        spec = f;
    } else {
        throw validation_error("unknown filter '" + name + "'");
    }
    validate_filter_spec(spec);
    return spec;
}

} // namespace gfcf
