#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gfcf/sparse.hpp"
#include "oracle.hpp"

using gfcf::Index;

namespace {

std::vector<std::pair<Index, Index>> two_by_two() {
    return {{0, 0}, {0, 1}, {1, 0}};
}

gfcf::NormalizedMatrix toy_normalized() {
    return gfcf::normalize(gfcf::build_interactions(two_by_two(), 2, 2));
}

std::vector<std::pair<Index, Index>> random_pairs(Index n_users, Index n_items, double density,
                                                  std::mt19937_64& rng) {
    std::vector<std::pair<Index, Index>> pairs;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (Index u = 0; u < n_users; ++u)
        for (Index i = 0; i < n_items; ++i)
            if (coin(rng) < density) pairs.emplace_back(u, i);
    return pairs;
}

} // namespace

TEST_CASE("build_interactions counts degrees and collapses duplicates") {
    auto m = gfcf::build_interactions(two_by_two(), 2, 2);
    CHECK(m.nnz() == 3);
    CHECK(m.user_degrees == std::vector<Index>{2, 1});
    CHECK(m.item_degrees == std::vector<Index>{2, 1});

    std::vector<std::pair<Index, Index>> dup = {{0, 0}, {0, 0}};
    CHECK(gfcf::build_interactions(dup, 1, 1).nnz() == 1);

    CHECK(gfcf::build_interactions({}, 3, 4).nnz() == 0);
}

TEST_CASE("build_interactions rejects out-of-range pairs, naming the pair") {
    std::vector<std::pair<Index, Index>> bad = {{0, 0}, {2, 0}};
    CHECK_THROWS_MATCHES(gfcf::build_interactions(bad, 2, 2), gfcf::validation_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("(2, 0)")));
}

TEST_CASE("normalize matches the closed-form weights") {
    auto nm = toy_normalized();
    Eigen::MatrixXd d = nm.dense();
    CHECK(d(0, 0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(d(0, 1) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
    CHECK(d(1, 0) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
    CHECK(d(1, 1) == 0.0);

    auto single = gfcf::normalize(gfcf::build_interactions({{{0, 0}}}, 1, 1));
    CHECK(single.dense()(0, 0) == 1.0);
}

TEST_CASE("zero-degree users and items get all-zero normalized rows") {
    std::vector<std::pair<Index, Index>> pairs = {{0, 0}};
    auto nm = gfcf::normalize(gfcf::build_interactions(pairs, 2, 2));
    Eigen::MatrixXd d = nm.dense();
    CHECK(d.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(nm.row_scale[1] == 0.0);
    CHECK(nm.col_scale[1] == 0.0);
}

TEST_CASE("degree consistency: cached vectors match a recount") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const Index nu = 5 + static_cast<Index>(rng() % 40);
        const Index ni = 5 + static_cast<Index>(rng() % 40);
        auto pairs = random_pairs(nu, ni, 0.1, rng);
        auto m = gfcf::build_interactions(pairs, nu, ni);
        std::vector<Index> du(static_cast<std::size_t>(nu), 0), di(static_cast<std::size_t>(ni), 0);
        for (Index u = 0; u < nu; ++u)
            for (Index i : m.items_of(u)) {
                ++du[static_cast<std::size_t>(u)];
                ++di[static_cast<std::size_t>(i)];
            }
        CHECK(du == m.user_degrees);
        CHECK(di == m.item_degrees);
        CHECK(std::accumulate(du.begin(), du.end(), Index{0}) == m.nnz());
    }
}

TEST_CASE("apply_gram on the 2x2 example") {
    auto nm = std::make_shared<const gfcf::NormalizedMatrix>(toy_normalized());
    auto op = gfcf::make_item_graph(nm);

    Eigen::VectorXd x(2);
    x << 1.0, 0.0;
    Eigen::VectorXd y = gfcf::apply_gram(op, x, 1);
    CHECK(y[0] == Catch::Approx(0.75).margin(1e-12));
    CHECK(y[1] == Catch::Approx(0.35355339059327373).margin(1e-12));

    Eigen::VectorXd top(2);
    top << std::sqrt(2.0) / std::sqrt(3.0), 1.0 / std::sqrt(3.0);
    Eigen::VectorXd fixed = gfcf::apply_gram(op, top, 1);
    CHECK((fixed - top).cwiseAbs().maxCoeff() < 1e-12);  // eigenvalue 1
}

TEST_CASE("apply_gram equals the dense gram power oracle") {
    std::mt19937_64 rng(101);
    for (int rep = 0; rep < 10; ++rep) {
        const Index nu = 20 + static_cast<Index>(rng() % 80);
        const Index ni = 20 + static_cast<Index>(rng() % 180);
        auto pairs = random_pairs(nu, ni, 0.08, rng);
        auto nm = std::make_shared<const gfcf::NormalizedMatrix>(
            gfcf::normalize(gfcf::build_interactions(pairs, nu, ni)));
        auto op = gfcf::make_item_graph(nm);

        Eigen::MatrixXd p = oracle::dense_gram(oracle::dense_normalized(
            oracle::dense_interactions(pairs, nu, ni)));
        std::normal_distribution<double> gauss;
        Eigen::VectorXd x(ni);
        for (Index i = 0; i < ni; ++i) x[i] = gauss(rng);

        Eigen::MatrixXd pk = Eigen::MatrixXd::Identity(ni, ni);
        for (int k = 1; k <= 4; ++k) {
            pk = pk * p;
            Eigen::VectorXd want = pk.transpose() * x;  // row-vector convention
            Eigen::VectorXd got = gfcf::apply_gram(op, x, k);
            CHECK(oracle::max_rel_error(got, want) < 1e-8);
        }
    }
}

TEST_CASE("single gram application equals the cached dense multiply") {
    std::mt19937_64 rng(91);
    for (int rep = 0; rep < 5; ++rep) {
        const Index nu = 15 + static_cast<Index>(rng() % 50);
        const Index ni = 15 + static_cast<Index>(rng() % 80);
        auto pairs = random_pairs(nu, ni, 0.12, rng);
        auto nm = std::make_shared<const gfcf::NormalizedMatrix>(
            gfcf::normalize(gfcf::build_interactions(pairs, nu, ni)));
        auto op = gfcf::make_item_graph(nm);
        gfcf::cache_dense(op);

        std::normal_distribution<double> gauss;
        Eigen::VectorXd x(ni);
        for (Index i = 0; i < ni; ++i) x[i] = gauss(rng);
        Eigen::VectorXd via_cache = *op.dense_cache * x;
        CHECK((gfcf::apply_gram(op, x, 1) - via_cache).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("apply_gram input validation") {
    auto nm = std::make_shared<const gfcf::NormalizedMatrix>(toy_normalized());
    auto op = gfcf::make_item_graph(nm);
    Eigen::VectorXd x(2);
    x << 1.0, 0.0;
    CHECK_THROWS_AS(gfcf::apply_gram(op, x, 0), gfcf::validation_error);
    x[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(gfcf::apply_gram(op, x, 1), gfcf::numeric_error);
    Eigen::VectorXd wrong(3);
    wrong.setZero();
    CHECK_THROWS_AS(gfcf::apply_gram(op, wrong, 1), gfcf::validation_error);
}

TEST_CASE("densify_item_graph matches the 2x2 values and honors the cap") {
    auto nm = std::make_shared<const gfcf::NormalizedMatrix>(toy_normalized());
    auto op = gfcf::make_item_graph(nm);
    Eigen::MatrixXd p = gfcf::densify_item_graph(op);
    CHECK(p(0, 0) == Catch::Approx(0.75).margin(1e-12));
    CHECK(p(0, 1) == Catch::Approx(0.35355339059327373).margin(1e-12));
    CHECK(p(1, 1) == Catch::Approx(0.5).margin(1e-12));
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() <= 1e-12);

    auto zero = gfcf::normalize(gfcf::build_interactions({}, 2, 2));
    auto zero_op = gfcf::make_item_graph(std::make_shared<const gfcf::NormalizedMatrix>(zero));
    CHECK(gfcf::densify_item_graph(zero_op).cwiseAbs().maxCoeff() == 0.0);

    auto capped = gfcf::normalize(gfcf::build_interactions({}, 2, 5));
    auto capped_op =
        gfcf::make_item_graph(std::make_shared<const gfcf::NormalizedMatrix>(capped), 4);
    CHECK_THROWS_MATCHES(
        gfcf::densify_item_graph(capped_op), gfcf::validation_error,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::ContainsSubstring("dense path unavailable") &&
            Catch::Matchers::ContainsSubstring("4")));
}

TEST_CASE("normalized matrix has largest singular value <= 1") {
    std::mt19937_64 rng(55);
    for (int rep = 0; rep < 10; ++rep) {
        const Index nu = 10 + static_cast<Index>(rng() % 60);
        const Index ni = 10 + static_cast<Index>(rng() % 60);
        auto pairs = random_pairs(nu, ni, 0.15, rng);
        auto nm = gfcf::normalize(gfcf::build_interactions(pairs, nu, ni));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(nm.dense());
        if (svd.singularValues().size() > 0)
            CHECK(svd.singularValues()[0] <= 1.0 + 1e-9);
    }
}

TEST_CASE("gram operator is symmetric and its spectrum sits in [0, 1]") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const Index nu = 10 + static_cast<Index>(rng() % 50);
        const Index ni = 10 + static_cast<Index>(rng() % 190);
        std::uniform_real_distribution<double> pick_density(0.02, 0.2);
        auto pairs = random_pairs(nu, ni, pick_density(rng), rng);
        auto nm = std::make_shared<const gfcf::NormalizedMatrix>(
            gfcf::normalize(gfcf::build_interactions(pairs, nu, ni)));
        auto op = gfcf::make_item_graph(nm);

        std::normal_distribution<double> gauss;
        Eigen::VectorXd x(ni), y(ni);
        for (Index i = 0; i < ni; ++i) {
            x[i] = gauss(rng);
            y[i] = gauss(rng);
        }
        const double lhs = gfcf::apply_gram(op, x, 1).dot(y);
        const double rhs = x.dot(gfcf::apply_gram(op, y, 1));
        CHECK(lhs == Catch::Approx(rhs).margin(1e-9));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gfcf::densify_item_graph(op));
        CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
        CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-9);
    }
}
