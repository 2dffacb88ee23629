#include <doctest.h>

#include "helpers.hpp"

#include <msc/error.hpp>
#include <msc/null_calibration.hpp>
#include <msc/probes.hpp>
#include <msc/stats.hpp>
#include <msc/task_model.hpp>

#include <map>
#include <numeric>

using namespace msc;

namespace {

// Three-year circular dataset: X = [sin, cos] embedded in two planted
// directions plus Gaussian noise of scale sigma.
struct Circle {
    Eigen::MatrixXd X;
    std::vector<int> doy;
    Eigen::MatrixXd plane;
};

Circle make_circle(int d, double sigma, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    Circle c;
    c.plane = testutil::haar_rows(d, 2, eng);
    const int n = 3 * 365;
    const Eigen::MatrixXd noise = testutil::std_gaussian(n, d, eng);
    c.X.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const int day = i % 365 + 1;
        c.doy.push_back(day);
        const double a = 2.0 * std::numbers::pi * day / 365.0;
        c.X.row(i) = 3.0 * (std::sin(a) * c.plane.row(0) + std::cos(a) * c.plane.row(1)) + sigma * noise.row(i);
    }
    return c;
}

} // namespace

TEST_SUITE("probes") {

TEST_CASE("ridge matches the centered normal equations") {
    std::mt19937_64 eng(1);
    const Eigen::MatrixXd X = testutil::std_gaussian(40, 5, eng), Y = testutil::std_gaussian(40, 2, eng);
    const auto fit = ridge_fit(X, Y, 0.7);
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean(), Yc = Y.rowwise() - Y.colwise().mean();
    const Eigen::MatrixXd W = (Xc.transpose() * Xc + 0.7 * Eigen::MatrixXd::Identity(5, 5)).inverse() * Xc.transpose() * Yc;
    CHECK((fit.W - W.transpose()).norm() < 1e-10);
    const Eigen::VectorXd b = Y.colwise().mean().transpose() - W.transpose() * X.colwise().mean().transpose();
    CHECK((fit.b - b).norm() < 1e-10);
    CHECK((fit.predict(X) - ((X * W).rowwise() + b.transpose())).norm() < 1e-10);
    CHECK_THROWS_AS(ridge_fit(X, Y, 0.0), ValidationError);
    CHECK_THROWS_AS(ridge_fit(X, Y.topRows(3), 1.0), ValidationError);
}

TEST_CASE("stratified folds deal each stratum round-robin") {
    std::vector<int> strata, key;
    for (int i = 0; i < 23; ++i) {
        strata.push_back(i % 3);
        key.push_back(100 - i);
    }
    const auto f = stratified_folds(strata, key, 4);
    std::map<std::pair<int, int>, int> count;
    for (std::size_t i = 0; i < f.size(); ++i) ++count[{strata[i], f[i]}];
    for (int s = 0; s < 3; ++s) {
        int lo = 1000, hi = 0;
        for (int k = 0; k < 4; ++k) {
            lo = std::min(lo, count[{s, k}]);
            hi = std::max(hi, count[{s, k}]);
        }
        CHECK(hi - lo <= 1);
    }
    CHECK(f == stratified_folds(strata, key, 4));
    // Smallest key in stratum 0 is index 21, which opens fold 0.
    CHECK(f[21] == 0);
    CHECK_THROWS_AS(stratified_folds(strata, key, 1), ValidationError);
}

TEST_CASE("targets and R^2") {
    const auto Y = circular_targets({365, 91}, 2);
    CHECK(Y(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(Y(0, 1) == doctest::Approx(1.0));
    CHECK(Y(1, 0) == doctest::Approx(std::sin(2 * std::numbers::pi * 91 / 365)));
    CHECK(Y(1, 3) == doctest::Approx(std::cos(4 * std::numbers::pi * 91 / 365)));
    Eigen::MatrixXd t(3, 1), p(3, 1);
    t << 1, 2, 3;
    p << 1, 2, 3;
    CHECK(r2_score(t, p) == 1.0);
    p << 2, 2, 2;
    CHECK(r2_score(t, p) == doctest::Approx(0.0));
}

TEST_CASE("noiseless circular signal") {
    const auto c = make_circle(20, 0.0, 3);
    const auto fit = fit_circular_probe(c.X, c.doy, 1e-6, 5);
    CHECK(fit.cv_r2 > 0.999);
    CHECK(principal_angles(fit.subspace, Subspace(c.plane)).mean_angle_deg() < 0.1);
    const auto pred = fit.probe.predict_doy(c.X);
    for (std::size_t i = 0; i < pred.size(); i += 37) {
        CHECK(circular_day_distance(pred[i], c.doy[i]) < 0.01);
        CHECK(pred[i] > 0.0);
        CHECK(pred[i] <= 365.0);
    }
}

TEST_CASE("pure noise has R^2 near zero and at most one") {
    std::mt19937_64 eng(5);
    const Eigen::MatrixXd X = testutil::std_gaussian(1095, 20, eng);
    std::vector<int> doy;
    for (int i = 0; i < 1095; ++i) doy.push_back(i % 365 + 1);
    const auto fit = fit_circular_probe(X, doy, 1.0, 5);
    CHECK(fit.cv_r2 < 0.05);
    CHECK(fit.cv_r2 <= 1.0);
}

TEST_CASE("probe subspace ignores row order") {
    const auto c = make_circle(12, 0.5, 4);
    std::vector<int> perm(c.doy.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 eng(2);
    std::shuffle(perm.begin(), perm.end(), eng);
    Eigen::MatrixXd X2(c.X.rows(), c.X.cols());
    std::vector<int> d2;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        X2.row(static_cast<Eigen::Index>(i)) = c.X.row(perm[i]);
        d2.push_back(c.doy[static_cast<std::size_t>(perm[i])]);
    }
    const auto a = fit_circular_probe(c.X, c.doy, 1.0, 0), b = fit_circular_probe(X2, d2, 1.0, 0);
    CHECK(principal_angles(a.subspace, b.subspace).mean_angle_deg() < 1e-5);
}

TEST_CASE("empty month stratum is rejected") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(40, 3);
    std::vector<int> doy(40, 10);
    CHECK_THROWS_WITH_AS(fit_circular_probe(X, doy), doctest::Contains("month stratum"), ValidationError);
}

TEST_CASE("classifier probe: separable, chance and validation") {
    std::mt19937_64 eng(6);
    Eigen::MatrixXd X = testutil::std_gaussian(200, 6, eng);
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        y.push_back(i % 2);
        X(i, 0) = (i % 2 ? 5.0 : -5.0) + 0.1 * X(i, 0);
    }
    auto fit = fit_classifier_probe(X, y, 1);
    CHECK(fit.balanced_accuracy == 1.0);
    CHECK(std::abs(fit.subspace.basis()(0, 0)) > 0.99);

    std::vector<int> noise;
    for (int i = 0; i < 600; ++i) noise.push_back(i % 4);
    std::shuffle(noise.begin(), noise.end(), eng);
    const Eigen::MatrixXd Z = testutil::std_gaussian(600, 10, eng);
    fit = fit_classifier_probe(Z, noise, 2);
    CHECK(std::abs(fit.balanced_accuracy - 0.25) < 3 * std::sqrt(0.25 * 0.75 / 600));

    // Scaling the data with the penalty scaled to match keeps every decision.
    const auto base = fit_classifier_probe(Z, noise, 2, 1.0, 0);
    const auto scaled = fit_classifier_probe(3.0 * Z, noise, 2, 9.0, 0);
    CHECK(base.probe.predict(Z) == scaled.probe.predict(3.0 * Z));

    std::vector<int> lonely(600, 0);
    lonely[0] = 1;
    CHECK_THROWS_AS(fit_classifier_probe(Z, lonely, 1), ValidationError);
    CHECK_THROWS_AS(fit_classifier_probe(Z, std::vector<int>(600, 0), 1), ValidationError);
    CHECK(balanced_accuracy({0, 0, 1, 1}, {0, 1, 1, 1}) == doctest::Approx(0.75));
}

TEST_CASE("bootstrap angle CI") {
    const auto c = make_circle(12, 1.0, 7);
    const auto full = fit_circular_probe(c.X, c.doy, 1.0, 0);
    const auto ci = bootstrap_angle_ci(c.X, c.doy, full.subspace, 100, 42);
    CHECK(ci.draws.size() == 100);
    CHECK(ci.sd > 0.0);
    CHECK(std::isfinite(ci.hi - ci.lo));
    CHECK(ci.hi - ci.lo < 5.0);
    CHECK(ci.lo <= ci.mean);
    CHECK(ci.mean <= ci.hi);
    const auto again = bootstrap_angle_ci(c.X, c.doy, full.subspace, 100, 42);
    CHECK(again.draws == ci.draws);
    CHECK_THROWS_AS(bootstrap_angle_ci(c.X, c.doy, full.subspace, 99, 42), ValidationError);
}

TEST_CASE("planted suite: probes sit away from the mediator") {
    const auto cache = generate_synthetic_suite(testutil::small_spec());
    const auto data = load_dataset(cache);
    const Subspace med = Subspace::from_record(cache.get("mediator.basis"));
    const auto circ = fit_circular_probe(data.X, data.doy);
    CHECK(circ.cv_r2 > 0.9);
    CHECK(principal_angles(circ.subspace, med).mean_angle_deg() > 85.0);

    std::vector<int> months;
    for (int d : data.doy) months.push_back(month_of_doy(d));
    const auto month = fit_classifier_probe(data.X, months, 2);
    const auto cal = monte_carlo_null(32, 2, 2, 1000, 1);
    const double theta = principal_angles(month.subspace, med).mean_angle;
    // The month probe reads the planted circle, which is orthogonal to the
    // mediator, so it lands at or above the upper null quantile.
    CHECK(theta > cal.mc_quantile(NullStatistic::mean_angle, 0.05));
}

} // TEST_SUITE
