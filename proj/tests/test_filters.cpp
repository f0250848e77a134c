#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gfcf/filters.hpp"
#include "gfcf/spectral.hpp"
#include "gfcf/theory.hpp"
#include "oracle.hpp"

using gfcf::Index;

namespace {

Eigen::VectorXd strict_spectrum(Index n, std::mt19937_64& rng, bool include_endpoints = true) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> values;
    if (include_endpoints) {
        values.push_back(0.0);
        values.push_back(1.0);
    }
    while (static_cast<Index>(values.size()) < n) values.push_back(uni(rng));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    Eigen::VectorXd out(static_cast<Index>(values.size()));
    for (Index i = 0; i < out.size(); ++i) out[i] = values[static_cast<std::size_t>(i)];
    return out;
}

} // namespace

TEST_CASE("pointwise gains per variant") {
    Eigen::VectorXd zero_one(2);
    zero_one << 0.0, 1.0;

    auto diffusion = gfcf::evaluate_response(gfcf::DiffusionFilter{0.5}, zero_one);
    CHECK(diffusion.gains[0] == Catch::Approx(1.0 / 1.5).margin(1e-15));
    CHECK(diffusion.gains[1] == 0.0);

    auto neighborhood = gfcf::evaluate_response(gfcf::NeighborhoodFilter{}, zero_one);
    CHECK(neighborhood.gains[0] == 1.0);
    CHECK(neighborhood.gains[1] == 0.0);

    Eigen::VectorXd toy(2);
    toy << 0.0, 0.75;
    auto ideal = gfcf::evaluate_response(gfcf::IdealLowPassFilter{std::nullopt, 0.5}, toy);
    CHECK(ideal.gains[0] == 1.0);
    CHECK(ideal.gains[1] == 0.0);

    auto linear = gfcf::evaluate_response(gfcf::LinearFilter{{1.0, 2.0}}, toy);
    CHECK(linear.gains[0] == Catch::Approx(3.0));            // 1 + 2 (1-0)
    CHECK(linear.gains[1] == Catch::Approx(1.0 + 2.0 * 0.25));
}

TEST_CASE("cutoff ties within 1e-12 pass") {
    Eigen::VectorXd values(4);
    values << 0.2, 0.5, 0.5 + 1e-13, 0.9;

    auto by_value = gfcf::evaluate_response(gfcf::IdealLowPassFilter{std::nullopt, 0.5}, values);
    CHECK(by_value.gains[1] == 1.0);
    CHECK(by_value.gains[2] == 1.0);
    CHECK(by_value.gains[3] == 0.0);

    auto by_rank = gfcf::evaluate_response(gfcf::IdealLowPassFilter{Index{2}, std::nullopt}, values);
    CHECK(by_rank.gains[1] == 1.0);
    CHECK(by_rank.gains[2] == 1.0);  // boundary tie included
    CHECK(by_rank.gains[3] == 0.0);
}

TEST_CASE("low-pass ratio on the toy spectrum") {
    Eigen::VectorXd toy(2);
    toy << 0.0, 0.75;
    auto resp = gfcf::evaluate_response(gfcf::NeighborhoodFilter{}, toy);
    CHECK(gfcf::low_pass_ratio(resp, 1) == Catch::Approx(0.25).margin(1e-15));

    auto ideal = gfcf::evaluate_response(gfcf::IdealLowPassFilter{std::nullopt, 0.5}, toy);
    CHECK(gfcf::low_pass_ratio(ideal, 1) == 0.0);

    CHECK_THROWS_AS(gfcf::low_pass_ratio(resp, 0), gfcf::validation_error);
    CHECK_THROWS_AS(gfcf::low_pass_ratio(resp, 2), gfcf::validation_error);

    // All-stop filter has no measurable ratio.
    auto stopped = gfcf::evaluate_response(gfcf::LinearFilter{{0.0}}, toy);
    CHECK_THROWS_MATCHES(gfcf::low_pass_ratio(stopped, 1), gfcf::validation_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("not k-low-pass-measurable")));
}

TEST_CASE("diffusion is strictly low-pass on strictly increasing spectra") {
    std::mt19937_64 rng(5);
    for (double mu : {0.1, 1.0, 10.0}) {
        Eigen::VectorXd spectrum = strict_spectrum(40, rng);
        auto resp = gfcf::evaluate_response(gfcf::DiffusionFilter{mu}, spectrum);
        for (Index k = 1; k < spectrum.size(); ++k) CHECK(gfcf::low_pass_ratio(resp, k) < 1.0);
        for (Index i = 1; i < spectrum.size(); ++i) CHECK(resp.gains[i] <= resp.gains[i - 1]);
    }
}

TEST_CASE("neighborhood and non-negative polynomials are low-pass") {
    std::mt19937_64 rng(6);
    Eigen::VectorXd spectrum = strict_spectrum(30, rng);

    auto resp = gfcf::evaluate_response(gfcf::NeighborhoodFilter{}, spectrum);
    for (Index k = 1; k < spectrum.size(); ++k) CHECK(gfcf::low_pass_ratio(resp, k) < 1.0);

    // Non-negative coefficients with some weight above order zero.
    std::uniform_real_distribution<double> uni(0.0, 2.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> coeffs = {uni(rng), uni(rng) + 0.05, uni(rng)};
        auto poly = gfcf::evaluate_response(gfcf::LgcnIdeFilter{coeffs}, spectrum);
        for (Index i = 1; i < spectrum.size(); ++i) CHECK(poly.gains[i] <= poly.gains[i - 1]);
        for (Index k = 1; k < spectrum.size(); ++k) CHECK(gfcf::low_pass_ratio(poly, k) < 1.0);
    }
}

TEST_CASE("responses reject eigenvalues outside the item-graph spectrum") {
    Eigen::VectorXd bad(2);
    bad << 0.0, 1.5;
    CHECK_THROWS_AS(gfcf::evaluate_response(gfcf::NeighborhoodFilter{}, bad),
                    gfcf::validation_error);
    bad << -0.5, 0.5;
    CHECK_THROWS_AS(gfcf::evaluate_response(gfcf::NeighborhoodFilter{}, bad),
                    gfcf::validation_error);
    Eigen::VectorXd unsorted(2);
    unsorted << 0.5, 0.2;
    CHECK_THROWS_AS(gfcf::evaluate_response(gfcf::NeighborhoodFilter{}, unsorted),
                    gfcf::validation_error);
}

TEST_CASE("identity and all-stop filters on a full frame") {
    std::mt19937_64 rng(9);
    auto pairs = gfcf::make_random_bipartite(25, 30, 0.15, rng);
    auto nm = gfcf::normalize(gfcf::build_interactions(pairs, 25, 30));
    auto op = gfcf::make_item_graph(std::make_shared<const gfcf::NormalizedMatrix>(nm));
    auto eig = gfcf::dense_spectral_oracle(gfcf::densify_item_graph(op));
    Eigen::VectorXd laplacian = Eigen::VectorXd::Ones(eig.values.size()) - eig.values;
    const Eigen::MatrixXd& frame = eig.vectors;

    std::normal_distribution<double> gauss;
    Eigen::VectorXd signal(30);
    for (Index i = 0; i < 30; ++i) signal[i] = gauss(rng);

    Eigen::VectorXd same =
        gfcf::apply_spectral_filter(frame, laplacian, gfcf::LinearFilter{{1.0}}, signal);
    CHECK((same - signal).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::VectorXd none =
        gfcf::apply_spectral_filter(frame, laplacian, gfcf::LinearFilter{{0.0}}, signal);
    CHECK(none.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spectral and spatial paths agree for polynomial filters") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 5; ++rep) {
        const Index nu = 30 + static_cast<Index>(rng() % 40);
        const Index ni = 40 + static_cast<Index>(rng() % 160);
        auto pairs = gfcf::make_random_bipartite(nu, ni, 0.1, rng);
        auto nm = std::make_shared<const gfcf::NormalizedMatrix>(
            gfcf::normalize(gfcf::build_interactions(pairs, nu, ni)));
        auto op = gfcf::make_item_graph(nm);
        auto eig = gfcf::dense_spectral_oracle(gfcf::densify_item_graph(op));
        Eigen::VectorXd laplacian = Eigen::VectorXd::Ones(eig.values.size()) - eig.values;
        const Eigen::MatrixXd& frame = eig.vectors;

        std::normal_distribution<double> gauss;
        Eigen::VectorXd signal(ni);
        for (Index i = 0; i < ni; ++i) signal[i] = gauss(rng);

        // Neighborhood: U diag(1-lambda) U^T x == x P~.
        Eigen::VectorXd spectral =
            gfcf::apply_spectral_filter(frame, laplacian, gfcf::NeighborhoodFilter{}, signal);
        Eigen::VectorXd spatial = gfcf::apply_gram(op, signal, 1);
        CHECK(oracle::max_rel_error(spectral, spatial) < 1e-8);

        // Polynomial: beta0 x + beta1 x P~ + beta2 x P~^2.
        std::vector<double> beta = {0.3, 1.0, 0.5};
        Eigen::VectorXd poly_spec =
            gfcf::apply_spectral_filter(frame, laplacian, gfcf::LinearFilter{beta}, signal);
        Eigen::VectorXd poly_spatial = beta[0] * signal + beta[1] * gfcf::apply_gram(op, signal, 1) +
                                       beta[2] * gfcf::apply_gram(op, signal, 2);
        CHECK(oracle::max_rel_error(poly_spec, poly_spatial) < 1e-8);
    }
}

TEST_CASE("diffusion filtering equals the dense ridge solve") {
    std::mt19937_64 rng(13);
    for (double mu : {0.1, 1.0, 10.0}) {
        const Index nu = 25, ni = 40;
        auto pairs = gfcf::make_random_bipartite(nu, ni, 0.15, rng);
        auto nm = std::make_shared<const gfcf::NormalizedMatrix>(
            gfcf::normalize(gfcf::build_interactions(pairs, nu, ni)));
        auto op = gfcf::make_item_graph(nm);
        Eigen::MatrixXd p = gfcf::densify_item_graph(op);
        auto eig = gfcf::dense_spectral_oracle(p);
        Eigen::VectorXd laplacian = Eigen::VectorXd::Ones(eig.values.size()) - eig.values;
        const Eigen::MatrixXd& frame = eig.vectors;

        std::normal_distribution<double> gauss;
        Eigen::VectorXd signal(ni);
        for (Index i = 0; i < ni; ++i) signal[i] = gauss(rng);

        Eigen::VectorXd filtered =
            gfcf::apply_spectral_filter(frame, laplacian, gfcf::DiffusionFilter{mu}, signal);

        Eigen::MatrixXd lhs = p;
        lhs.diagonal().array() += mu;
        Eigen::VectorXd solved = lhs.ldlt().solve(p * signal);
        CHECK(oracle::max_rel_error(filtered, solved) < 1e-8);
    }
}

TEST_CASE("apply_spectral_filter validates dimensions and basis completeness") {
    Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(4, 2);
    Eigen::VectorXd lap(2);
    lap << 0.0, 0.5;
    Eigen::VectorXd signal(4);
    signal.setZero();
    CHECK_THROWS_AS(
        gfcf::apply_spectral_filter(frame, lap, gfcf::NeighborhoodFilter{}, signal),
        gfcf::validation_error);
    // Rank basis is fine for the ideal projection.
    CHECK_NOTHROW(gfcf::apply_spectral_filter(frame, lap,
                                              gfcf::IdealLowPassFilter{Index{1}, std::nullopt},
                                              signal));
    Eigen::VectorXd short_signal(3);
    short_signal.setZero();
    CHECK_THROWS_AS(gfcf::apply_spectral_filter(frame, lap, gfcf::NeighborhoodFilter{}, short_signal),
                    gfcf::validation_error);
}

TEST_CASE("filter specs round-trip through the key=value fragment") {
    std::vector<gfcf::FilterSpec> specs = {
        gfcf::DiffusionFilter{0.5},
        gfcf::NeighborhoodFilter{},
        gfcf::LinearFilter{{1.0, 0.5}},
        gfcf::LgcnIdeFilter{{1.0, 1.0}},
        gfcf::IdealLowPassFilter{Index{256}, std::nullopt},
        gfcf::IdealLowPassFilter{std::nullopt, 0.25},
    };
    for (const auto& spec : specs) {
        const std::string text = gfcf::format_filter_spec(spec);
        const gfcf::FilterSpec back = gfcf::parse_filter_spec(text);
        CHECK(gfcf::format_filter_spec(back) == text);
    }
    CHECK(gfcf::format_filter_spec(gfcf::DiffusionFilter{0.5}) == "filter=diffusion mu=0.5");

    CHECK_THROWS_AS(gfcf::parse_filter_spec("filter=warp"), gfcf::validation_error);
    CHECK_THROWS_AS(gfcf::parse_filter_spec("mu=0.5"), gfcf::validation_error);
    CHECK_THROWS_AS(gfcf::parse_filter_spec("filter=diffusion mu=zero"), gfcf::validation_error);
    CHECK_THROWS_AS(gfcf::parse_filter_spec("filter=diffusion mu=-1"), gfcf::validation_error);
    CHECK_THROWS_AS(gfcf::parse_filter_spec("filter=linear beta="), gfcf::validation_error);
}
