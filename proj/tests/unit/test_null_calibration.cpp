#include <doctest.h>

#include "helpers.hpp"

#include <msc/error.hpp>
#include <msc/null_calibration.hpp>
#include <msc/probes.hpp>
#include <msc/stats.hpp>
#include <msc/task_model.hpp>

using namespace msc;

TEST_SUITE("null_calibration") {

TEST_CASE("analytic values") {
    auto a = analytic_null(2304, 2, 2);
    CHECK(rad2deg(a.mean_angle) == doctest::Approx(88.31).epsilon(1e-4));
    CHECK(a.sum_cos2 == doctest::Approx(0.00174).epsilon(5e-3));
    CHECK(analytic_null(2304, 4, 4).sum_cos2 == doctest::Approx(0.00694).epsilon(5e-3));
    a = analytic_null(6, 6, 6);
    CHECK(a.mean_angle == 0.0);
    CHECK(a.sum_cos2 == 6.0);
    CHECK(analytic_null(100, 2, 4).sum_cos2 == doctest::Approx(0.08));
    CHECK_THROWS_AS(analytic_null(4, 5, 1), ValidationError);
    CHECK_THROWS_AS(analytic_null(4, 0, 1), ValidationError);
}

TEST_CASE("MC draws are sorted, deterministic and parallel-safe") {
    const auto a = monte_carlo_null(30, 2, 3, 300, 5);
    const auto b = monte_carlo_null(30, 2, 3, 300, 5);
    CHECK(a.mean_angle == b.mean_angle);
    CHECK(a.sum_cos2 == b.sum_cos2);
    CHECK(std::is_sorted(a.mean_angle.begin(), a.mean_angle.end()));
    CHECK(std::is_sorted(a.sum_cos2.begin(), a.sum_cos2.end()));
    CHECK_THROWS_AS(monte_carlo_null(30, 2, 3, 99, 5), ValidationError);
    CHECK_THROWS_AS(monte_carlo_null(30, 2, 3, 100, 5, haar_sample(30, 2, 1)), ValidationError);
}

TEST_CASE("MC matches an independent Gram-Schmidt sampler") {
    const int d = 200, k = 2, n = 3000;
    const auto cal = monte_carlo_null(d, k, k, n, 8);
    std::mt19937_64 eng(8);
    std::vector<double> ref;
    for (int i = 0; i < n; ++i)
        ref.push_back(testutil::mean_angle_deg_by_eig(testutil::haar_rows(d, k, eng), testutil::haar_rows(d, k, eng)));
    const double m1 = rad2deg(cal.mc_mean(NullStatistic::mean_angle)), m2 = mean(ref);
    const double se = std::hypot(rad2deg(cal.mc_sd(NullStatistic::mean_angle)), stddev(ref)) / std::sqrt(double(n));
    CHECK(std::abs(m1 - m2) < 4 * se);
}

TEST_CASE("sum cos^2 identity at small d, including a fixed frame") {
    auto cal = monte_carlo_null(16, 4, 4, 50000, 3);
    double se = cal.mc_sd(NullStatistic::sum_cos2) / std::sqrt(50000.0);
    CHECK(std::abs(cal.mc_mean(NullStatistic::sum_cos2) - 1.0) < 4 * se);

    cal = monte_carlo_null(40, 3, 5, 20000, 4, haar_sample(40, 5, 77));
    se = cal.mc_sd(NullStatistic::sum_cos2) / std::sqrt(20000.0);
    CHECK(std::abs(cal.mc_mean(NullStatistic::sum_cos2) - 15.0 / 40.0) < 4 * se);
}

TEST_CASE("empirical p-values") {
    const auto cal = monte_carlo_null(64, 2, 2, 2000, 9);
    const double med = cal.mc_quantile(NullStatistic::mean_angle, 0.5);
    CHECK(empirical_p(cal, med, NullStatistic::mean_angle, Tail::above) == doctest::Approx(0.5).epsilon(0.1));
    CHECK(empirical_p(cal, 2.0, NullStatistic::sum_cos2, Tail::above) == doctest::Approx(1.0 / 2001.0));
    CHECK(empirical_p(cal, -1.0, NullStatistic::sum_cos2, Tail::below) == doctest::Approx(1.0 / 2001.0));
    CHECK(empirical_p(cal, -1.0, NullStatistic::sum_cos2, Tail::above) == 1.0);
    NullCalibration empty;
    CHECK_THROWS_AS(empirical_p(empty, 0.0, NullStatistic::sum_cos2, Tail::above), ValidationError);
}

TEST_CASE("probe-scale observation at d=2304") {
    const auto cal = monte_carlo_null(2304, 4, 4, 3000, 21);
    const double p = empirical_p(cal, 0.00559, NullStatistic::sum_cos2, Tail::above);
    CHECK(p == doctest::Approx(0.68).epsilon(0.08));
}

TEST_CASE("p-values of fresh draws are uniform") {
    const auto cal = monte_carlo_null(24, 2, 2, 4000, 31);
    const auto fresh = monte_carlo_null(24, 2, 2, 500, 32);
    std::vector<double> p;
    for (double x : fresh.mean_angle) p.push_back(empirical_p(cal, x, NullStatistic::mean_angle, Tail::above));
    CHECK(ks_pvalue(ks_uniform_statistic(p), p.size()) > 0.01);
}

TEST_CASE("save and load") {
    const auto dir = testutil::tmp_dir("null_cal");
    const auto cal = monte_carlo_null(20, 2, 3, 150, 1);
    cal.save(dir);
    const auto back = NullCalibration::load(dir);
    CHECK(back.d == 20);
    CHECK(back.k2 == 3);
    CHECK(back.mean_angle == cal.mean_angle);
    CHECK(back.sum_cos2 == cal.sum_cos2);
}

TEST_CASE("whitening") {
    std::mt19937_64 eng(12);
    const Eigen::MatrixXd iso = testutil::std_gaussian(5000, 6, eng);
    auto t = whiten(iso);
    const Eigen::MatrixXd off = t.W - Eigen::MatrixXd(t.W.diagonal().asDiagonal());
    CHECK(off.norm() < 0.05 * t.W.diagonal().norm());
    CHECK((t.W - t.W.transpose()).norm() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t.W).eigenvalues().minCoeff() > 0);

    // Anisotropic rows come out with identity covariance up to the ridge.
    Eigen::MatrixXd A = testutil::std_gaussian(6, 6, eng);
    const Eigen::MatrixXd X = testutil::std_gaussian(4000, 6, eng) * A;
    t = whiten(X);
    const Eigen::MatrixXd Y = t.apply(X);
    const Eigen::MatrixXd cov = Y.transpose() * Y / double(X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    CHECK(es.eigenvalues().maxCoeff() < 1.0 + 1e-9);
    CHECK(es.eigenvalues().minCoeff() > 0.9);
    // Exact shrinkage: eigenvalue l of the sample covariance maps to l / (l + ridge).
    const Eigen::MatrixXd Xc0 = X.rowwise() - X.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> raw(Xc0.transpose() * Xc0 / double(X.rows() - 1));
    for (Eigen::Index i = 0; i < 6; ++i) {
        const double l = raw.eigenvalues()(i);
        CHECK(es.eigenvalues()(i) == doctest::Approx(l / (l + t.ridge)).epsilon(1e-9));
    }
    CHECK((t.W * t.W_inv - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-6);

    // W_inv Sigma_w W_inv recovers the ridged covariance.
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd S = Xc.transpose() * Xc / double(X.rows() - 1) + t.ridge * Eigen::MatrixXd::Identity(6, 6);
    CHECK((t.W_inv * t.W_inv - S).norm() < 1e-6 * S.norm());

    CHECK_THROWS_AS(whiten(Eigen::MatrixXd::Ones(5, 3)), ValidationError);
    CHECK_THROWS_AS(whiten(Eigen::MatrixXd::Ones(1, 3)), ValidationError);
}

TEST_CASE("whitened probe-vs-mediator overlap stays near the null") {
    const auto cache = generate_synthetic_suite(testutil::small_spec());
    const auto data = load_dataset(cache);
    const auto probe = fit_circular_probe(data.X, data.doy, 1.0, 0);
    const Subspace med = Subspace::from_record(cache.get("mediator.basis"));
    const auto t = whiten(cache);
    const double obs = principal_angles(t.transform(probe.subspace), t.transform(med)).sum_cos2;
    const auto cal = monte_carlo_null(32, 2, 2, 2000, 2);
    const double z = (obs - cal.mc_mean(NullStatistic::sum_cos2)) / cal.mc_sd(NullStatistic::sum_cos2);
    MESSAGE("whitened sum_cos2 ", obs, " z ", z);
    CHECK(std::abs(z) < 2.5);
}

} // TEST_SUITE
