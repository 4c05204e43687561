#include "longmix/error.hpp"
#include "longmix/lmm.hpp"
#include "longmix/simul.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace longmix;

namespace {

LongDataset simulated(std::uint64_t seed, std::size_t n_subjects = 28,
                      CorrFamily family = CorrFamily::AR1) {
    simul::SimConfig c;
    c.n_subjects = n_subjects;
    c.seed = seed;
    c.family = family;
    return simul::simulate(c);
}

LongDataset affine(const LongDataset& d, double a, double c) {
    auto rows = d.rows;
    for (auto& o : rows) o.response = a * o.response + c;
    return make_dataset(rows);
}

}  // namespace

TEST_SUITE("lmm") {

TEST_CASE("correlation matrices") {
    CHECK(lmm::correlation_matrix(CorrFamily::AR1, 0.0, 3) == Eigen::MatrixXd::Identity(3, 3));
    Eigen::Matrix3d ar;
    ar << 1, .5, .25, .5, 1, .5, .25, .5, 1;
    CHECK((lmm::correlation_matrix(CorrFamily::AR1, 0.5, 3) - ar).norm() < 1e-15);
    Eigen::Matrix2d cs;
    cs << 1, .3, .3, 1;
    CHECK((lmm::correlation_matrix(CorrFamily::CompoundSymmetric, 0.3, 2) - cs).norm() < 1e-15);
    CHECK(lmm::correlation_matrix(CorrFamily::Independent, 0.7, 4) == Eigen::MatrixXd::Identity(4, 4));
    const std::vector<int> occ{0, 2, 3};
    CHECK(lmm::correlation_matrix(CorrFamily::AR1, 0.5, occ)(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("rho domain") {
    CHECK_THROWS_AS(lmm::check_rho(CorrFamily::AR1, 1.0), Error);
    CHECK_THROWS_AS(lmm::check_rho(CorrFamily::CompoundSymmetric, -0.2), Error);
    CHECK_NOTHROW(lmm::check_rho(CorrFamily::AR1, -0.9));
    CHECK_THROWS_AS(lmm::correlation_matrix(CorrFamily::AR1, -1.0, 2), Error);
}

TEST_CASE("marginal covariance examples") {
    const auto d = testing::grid(2, {1}, {0, 1}, [](int s, int, int t) { return s + t; });
    const auto dm = encode_design(d, with_fixed_terms(ModelSpec{}, "hour"));
    auto blocks = lmm::marginal_covariance({0, 2.5, 0}, CorrFamily::AR1, dm);
    CHECK((blocks[0] - 2.5 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0);
    blocks = lmm::marginal_covariance({1, 1, 0}, CorrFamily::AR1, dm);
    Eigen::Matrix2d expect;
    expect << 2, 1, 1, 2;
    CHECK((blocks[0] - expect).norm() < 1e-15);

    // two one-point day series of one subject: correlation must not cross days
    const auto d2 = testing::grid(1, {1, 2}, {0}, [](int, int, int) { return 1.0; });
    const auto dm2 = encode_design(d2, with_fixed_terms(ModelSpec{}, "1"));
    blocks = lmm::marginal_covariance({1, 1, 0.9}, CorrFamily::AR1, dm2);
    CHECK((blocks[0] - expect).norm() < 1e-15);
}

TEST_CASE("marginal covariance is positive definite over admissible parameters") {
    const auto d = testing::grid(2, {1, 2, 3}, {0, 1, 2, 3, 4, 5, 6}, [](int, int, int) { return 1.0; });
    const auto dm = encode_design(d, ModelSpec{});
    for (auto fam : {CorrFamily::AR1, CorrFamily::CompoundSymmetric})
        for (double rho : {-0.99, -0.5, 0.0, 0.5, 0.999})
            for (double sb : {0.0, 1e-6, 0.64, 50.0}) {
                if (fam == CorrFamily::CompoundSymmetric && rho < 0) continue;
                for (const auto& b : lmm::marginal_covariance({sb, 0.015, rho}, fam, dm)) {
                    CHECK((b - b.transpose()).norm() == 0);
                    CHECK(Eigen::LLT<Eigen::MatrixXd>(b).info() == Eigen::Success);
                }
            }
}

TEST_CASE("gls examples") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 1);
    Eigen::VectorXd y(2);
    y << 0, 3;
    std::vector<Eigen::MatrixXd> blocks{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 4.0)};
    CHECK(lmm::gls_estimate(X, y, blocks).beta(0) == doctest::Approx(0.6).epsilon(1e-14));

    std::mt19937_64 gen(2);
    std::normal_distribution<double> z;
    Eigen::MatrixXd X2(10, 3);
    Eigen::VectorXd y2(10);
    for (int i = 0; i < 10; ++i) {
        X2.row(i) << 1, z(gen), z(gen);
        y2(i) = z(gen);
    }
    std::vector<Eigen::MatrixXd> id{Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(6, 6)};
    const Eigen::VectorXd ols = X2.colPivHouseholderQr().solve(y2);
    CHECK((lmm::gls_estimate(X2, y2, id).beta - ols).norm() < 1e-12);

    X2.col(2) = X2.col(1);
    CHECK_THROWS_AS(lmm::gls_estimate(X2, y2, id), Error);
}

TEST_CASE("gls matches dense inverse") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Eigen::MatrixXd> blocks;
        int n = 0;
        for (int g = 0; g < 4; ++g) {
            blocks.push_back(testing::random_spd(gen, 3));
            n += 3;
        }
        Eigen::MatrixXd X(n, 3);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X.row(i) << 1, z(gen), z(gen);
            y(i) = z(gen);
        }
        const auto fast = lmm::gls_estimate(X, y, blocks);
        const auto dense = testing::dense_gls(X, y, blocks);
        CHECK((fast.beta - dense.beta).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((fast.beta_cov - dense.cov).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(fast.weighted_rss == doctest::Approx(dense.rss).epsilon(1e-10));
    }
}

TEST_CASE("scaling y and sqrt V together leaves beta unchanged") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> z;
    Eigen::MatrixXd X(8, 2);
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) {
        X.row(i) << 1, z(gen);
        y(i) = z(gen);
    }
    std::vector<Eigen::MatrixXd> blocks{testing::random_spd(gen, 4), testing::random_spd(gen, 4)};
    auto scaled = blocks;
    for (auto& b : scaled) b *= 9.0;
    const auto a = lmm::gls_estimate(X, y, blocks);
    const auto b = lmm::gls_estimate(X, 3.0 * y, scaled);
    CHECK((3.0 * a.beta - b.beta).norm() < 1e-12);
}

TEST_CASE("objective hand value") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
    std::vector<Eigen::MatrixXd> blocks{Eigen::MatrixXd::Identity(2, 2)};
    const double l = -lmm::objective(X, y, blocks, Method::REML);
    CHECK(l == doctest::Approx(-0.5 * (std::log(2 * M_PI) + std::log(2.0))).epsilon(1e-14));
    CHECK(l == doctest::Approx(-1.26551).epsilon(1e-5));
}

TEST_CASE("objective nests the independent family at the origin") {
    const auto d = simulated(3);
    const auto dm = encode_design(d, ModelSpec{});
    for (auto m : {Method::REML, Method::ML}) {
        const double ar = lmm::objective({0, 0.2, 0}, CorrFamily::AR1, dm, m);
        const double cs = lmm::objective({0, 0.2, 0}, CorrFamily::CompoundSymmetric, dm, m);
        const double ind = lmm::objective({0, 0.2, 0}, CorrFamily::Independent, dm, m);
        CHECK(ar == doctest::Approx(ind).epsilon(1e-13));
        CHECK(cs == doctest::Approx(ind).epsilon(1e-13));
    }
}

TEST_CASE("profiled objective agrees with the direct one") {
    const auto d = simulated(8);
    const auto dm = encode_design(d, ModelSpec{});
    for (auto fam : {CorrFamily::AR1, CorrFamily::CompoundSymmetric})
        for (auto m : {Method::REML, Method::ML}) {
            const lmm::ProfiledObjective prof(dm, fam, m);
            CHECK(prof.pattern_count() == 1);
            const auto v = prof(30.0, 0.4);
            const double direct = lmm::objective({30.0 * v.sigma_e2, v.sigma_e2, 0.4}, fam, dm, m);
            CHECK(v.neg_loglik == doctest::Approx(direct).epsilon(1e-10));
            // the profiled sigma_e2 is the maximizer along that ray
            for (double f : {0.97, 1.03})
                CHECK(lmm::objective({30.0 * v.sigma_e2 * f, v.sigma_e2 * f, 0.4}, fam, dm, m) > direct);
        }
}

TEST_CASE("balanced random intercept matches anova moments") {
    std::mt19937_64 gen(99);
    std::normal_distribution<double> z;
    const int g = 12, m = 5;
    Eigen::MatrixXd y(g, m);
    for (int i = 0; i < g; ++i) {
        const double b = 0.8 * z(gen);
        for (int j = 0; j < m; ++j) y(i, j) = 3 + b + 0.5 * z(gen);
    }
    const auto d = testing::grid(g, {1}, {0, 1, 2, 3, 4}, [&](int s, int, int t) { return y(s, t); });
    ModelSpec spec = with_fixed_terms(ModelSpec{}, "1");
    spec.corr = CorrFamily::Independent;
    const auto fm = lmm::fit(d, spec);
    const auto ref = testing::one_way_moments(y);
    CHECK(fm.vparams.sigma_b2 == doctest::Approx(ref.sigma_b2).epsilon(1e-6));
    CHECK(fm.vparams.sigma_e2 == doctest::Approx(ref.sigma_e2).epsilon(1e-6));
    CHECK(fm.beta(0) == doctest::Approx(y.mean()).epsilon(1e-10));
    CHECK(fm.k_var == 2);
}

TEST_CASE("fit on simulated data") {
    const auto d = simulated(21, 60);
    const auto fm = lmm::fit(d, ModelSpec{});
    CHECK(fm.converged);
    CHECK(fm.p == 7);
    CHECK(fm.k_var == 3);
    CHECK(fm.n_obs == 60 * 21);
    CHECK(fm.vparams.rho == doctest::Approx(0.5).epsilon(0.2));
    CHECK(fm.vparams.sigma_e2 == doctest::Approx(0.015).epsilon(0.2));
    CHECK((fm.beta_cov - fm.beta_cov.transpose()).norm() < 1e-15 * fm.beta_cov.norm() + 1e-18);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(fm.beta_cov).info() == Eigen::Success);

    // refitting beta at the stored variance parameters reproduces it
    const auto dm = encode_design(d, fm.spec);
    const auto g = lmm::gls_estimate(dm.X, dm.y, lmm::marginal_covariance(fm.vparams, fm.spec.corr, dm));
    CHECK(g.beta == fm.beta);
}

TEST_CASE("affine response transform") {
    const auto d = simulated(5);
    const double a = 2.5, c = -1.25;
    const auto f0 = lmm::fit(d, ModelSpec{});
    const auto f1 = lmm::fit(affine(d, a, c), ModelSpec{});
    CHECK(f1.beta(0) == doctest::Approx(a * f0.beta(0) + c).epsilon(1e-6));
    for (Eigen::Index k = 1; k < f0.beta.size(); ++k)
        CHECK(std::abs(f1.beta(k) - a * f0.beta(k)) < 1e-6);
    CHECK(std::abs(f1.vparams.sigma_b2 - a * a * f0.vparams.sigma_b2) < 1e-6);
    CHECK(std::abs(f1.vparams.sigma_e2 - a * a * f0.vparams.sigma_e2) < 1e-6);
    CHECK(std::abs(f1.vparams.rho - f0.vparams.rho) < 1e-6);
}

TEST_CASE("subject relabeling does not change the fit") {
    const auto d = simulated(6);
    auto rows = d.rows;
    for (auto& o : rows) o.subject_id = "p" + std::to_string(100 - std::stoi(o.subject_id));
    const auto f0 = lmm::fit(d, ModelSpec{});
    const auto f1 = lmm::fit(make_dataset(rows), ModelSpec{});
    CHECK((f0.beta - f1.beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(f0.loglik == doctest::Approx(f1.loglik).epsilon(1e-10));
}

TEST_CASE("all series of length one") {
    const auto d = testing::grid(10, {1, 2, 3}, {0}, [](int s, int d, int) { return s + 0.1 * d; });
    ModelSpec spec = with_fixed_terms(ModelSpec{}, "day");
    CHECK_THROWS_WITH_AS(lmm::fit(d, spec), doctest::Contains("IdentifiabilityError"), Error);
    spec.corr = CorrFamily::Independent;
    CHECK_NOTHROW(lmm::fit(d, spec));
}

TEST_CASE("boundary estimate is flagged") {
    std::mt19937_64 gen(12);
    std::normal_distribution<double> z;
    const auto d = testing::grid(15, {1}, {0, 1, 2, 3}, [&](int, int, int) { return z(gen); });
    ModelSpec spec = with_fixed_terms(ModelSpec{}, "1");
    spec.corr = CorrFamily::Independent;
    const auto fm = lmm::fit(d, spec);
    const auto ref = testing::one_way_moments([&] {
        Eigen::MatrixXd y(15, 4);
        for (int i = 0; i < 15; ++i)
            for (int j = 0; j < 4; ++j) y(i, j) = d.rows[static_cast<std::size_t>(i * 4 + j)].response;
        return y;
    }());
    if (ref.sigma_b2 < 0) CHECK(fm.sigma_b2_at_boundary);
    CHECK(fm.vparams.sigma_b2 >= 0);
}

TEST_CASE("wald intervals") {
    lmm::FittedModel fm;
    fm.column_names = {"a", "b"};
    fm.beta = Eigen::Vector2d(-0.08, 1.0);
    fm.beta_cov = Eigen::Matrix2d::Zero();
    fm.beta_cov(0, 0) = 0.0383 * 0.0383;
    const auto t = lmm::wald_intervals(fm, 0.95);
    CHECK(t.rows[0].ci_low == doctest::Approx(-0.155067).epsilon(1e-5));
    CHECK(t.rows[0].ci_high == doctest::Approx(-0.004933).epsilon(1e-4));
    CHECK(t.rows[0].estimate - t.rows[0].ci_low == doctest::Approx(t.rows[0].ci_high - t.rows[0].estimate));
    CHECK(lmm::format_effect(t.rows[0], 2, lmm::Rounding::Staged) == "-0.08(-0.16,-0.01)");
    CHECK(t.rows[1].degenerate);
    CHECK_FALSE(t.rows[1].z_value.has_value());
    CHECK(t.rows[1].ci_low == t.rows[1].ci_high);
    const auto zero = lmm::wald_intervals(fm, 0.0);
    CHECK(zero.rows[0].ci_low == zero.rows[0].estimate);
    CHECK(zero.rows[0].ci_high == zero.rows[0].estimate);
}

TEST_CASE("rounding") {
    CHECK(lmm::round_fixed(-0.0049, 2) == "-0.00");
    CHECK(lmm::round_fixed(0.125, 2) == "0.13");
    CHECK(lmm::round_fixed(-0.00493, 2, lmm::Rounding::Staged) == "-0.01");
    CHECK(lmm::round_fixed(1.0, 2) == "1.00");
}

TEST_CASE("information criteria") {
    lmm::FittedModel fm;
    fm.loglik = -10;
    fm.p = 1;
    fm.k_var = 2;
    fm.n_obs = 11;
    fm.spec.method = Method::ML;
    const auto ic = lmm::information_criteria(fm);
    CHECK(ic.k == 3);
    CHECK(ic.aic == doctest::Approx(26));
    CHECK(ic.bic == doctest::Approx(20 + 3 * std::log(11.0)));
    fm.spec.method = Method::REML;
    CHECK(lmm::information_criteria(fm).n_eff == 10);
}

TEST_CASE("stratified fit of duplicated strata") {
    const auto d = simulated(31);
    auto rows = subset_by_smoker(d, false).rows;
    std::vector<Observation> both = rows;
    for (auto o : rows) {
        o.subject_id = "x" + o.subject_id;
        o.smoker = true;
        both.push_back(o);
    }
    const auto r = lmm::stratified_fit(make_dataset(both), ModelSpec{}, "smoker");
    REQUIRE(r.strata.size() == 2);
    REQUIRE(r.strata[0].fit);
    REQUIRE(r.strata[1].fit);
    CHECK(r.differences.size() == 6);
    for (const auto& diff : r.differences) {
        CHECK(std::abs(diff.z) < 1e-6);
        CHECK(diff.p_value == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("stratum failure is isolated") {
    const auto d = simulated(32);
    std::vector<Observation> rows;
    for (const auto& o : d.rows)
        if (!o.smoker || o.time_point == std::stoi(o.subject_id) % 7) rows.push_back(o);
    const auto r = lmm::stratified_fit(make_dataset(rows), ModelSpec{}, "smoker");
    REQUIRE(r.strata.size() == 2);
    CHECK(r.strata[0].fit.has_value());
    CHECK(r.strata[1].error == Errc::IdentifiabilityError);
    CHECK(r.differences.empty());
    CHECK_THROWS_AS(lmm::stratified_fit(d, ModelSpec{}, "age"), Error);
}

}
