#include "msc/null_calibration.hpp"

#include "msc/cache.hpp"
#include "msc/error.hpp"
#include "msc/parallel.hpp"
#include "msc/rng.hpp"
#include "msc/stats.hpp"

#include <algorithm>
#include <cmath>

namespace msc {

AnalyticNull analytic_null(int d, int k1, int k2) {
    if (k1 < 1 || k2 < 1 || k1 > d || k2 > d) throw ValidationError("analytic_null needs 1 <= k <= d");
    const double kmax = std::max(k1, k2);
    return {std::acos(std::sqrt(kmax / d)), static_cast<double>(k1) * k2 / d};
}

const std::vector<double>& NullCalibration::draws(NullStatistic s) const {
    return s == NullStatistic::mean_angle ? mean_angle : sum_cos2;
}

double NullCalibration::mc_mean(NullStatistic s) const { return mean(draws(s)); }
double NullCalibration::mc_sd(NullStatistic s) const { return stddev(draws(s)); }
double NullCalibration::mc_quantile(NullStatistic s, double q) const { return quantile_sorted(draws(s), q); }

void NullCalibration::save(const std::filesystem::path& dir) const {
    ActivationCache cache;
    Eigen::MatrixXd m(n_draws, 2);
    for (int i = 0; i < n_draws; ++i) {
        m(i, 0) = mean_angle[static_cast<std::size_t>(i)];
        m(i, 1) = sum_cos2[static_cast<std::size_t>(i)];
    }
    cache.put(TensorRecord::from_matrix("null.draws", m));
    cache.meta() = {{"d", d}, {"k1", k1}, {"k2", k2}, {"n_draws", n_draws}, {"seed", seed},
                    {"analytic_mean_angle_deg", rad2deg(analytic.mean_angle)}, {"analytic_sum_cos2", analytic.sum_cos2}};
    cache.save(dir);
}

NullCalibration NullCalibration::load(const std::filesystem::path& dir) {
    auto cache = ActivationCache::open(dir);
    NullCalibration cal;
    const auto& m = cache.meta();
    cal.d = m.at("d").get<int>();
    cal.k1 = m.at("k1").get<int>();
    cal.k2 = m.at("k2").get<int>();
    cal.n_draws = m.at("n_draws").get<int>();
    cal.seed = m.at("seed").get<std::uint64_t>();
    cal.analytic = analytic_null(cal.d, cal.k1, cal.k2);
    const Eigen::MatrixXd draws = cache.get("null.draws").to_matrix();
    if (draws.rows() != cal.n_draws || draws.cols() != 2) throw ValidationError("null.draws has wrong shape");
    for (int i = 0; i < cal.n_draws; ++i) {
        cal.mean_angle.push_back(draws(i, 0));
        cal.sum_cos2.push_back(draws(i, 1));
    }
    return cal;
}

NullCalibration monte_carlo_null(int d, int k1, int k2, int n_draws, std::uint64_t seed,
                                 const std::optional<Subspace>& fixed) {
    if (n_draws < 100) throw ValidationError("monte_carlo_null needs n_draws >= 100");
    if (fixed && (fixed->d() != d || fixed->k() != k2)) throw ValidationError("fixed frame must be k2 x d");
    NullCalibration cal;
    cal.d = d;
    cal.k1 = k1;
    cal.k2 = k2;
    cal.n_draws = n_draws;
    cal.seed = seed;
    cal.analytic = analytic_null(d, k1, k2);
    cal.mean_angle.resize(static_cast<std::size_t>(n_draws));
    cal.sum_cos2.resize(static_cast<std::size_t>(n_draws));

    parallel_for(static_cast<std::size_t>(n_draws), [&](std::size_t j) {
        Rng rng = Rng::substream(seed, j);
        const Subspace u = haar_sample(d, k1, rng);
        const PrincipalAngleSet pa = fixed ? principal_angles(u, *fixed) : principal_angles(u, haar_sample(d, k2, rng));
        cal.mean_angle[j] = pa.mean_angle;
        cal.sum_cos2[j] = pa.sum_cos2;
    });
    std::sort(cal.mean_angle.begin(), cal.mean_angle.end());
    std::sort(cal.sum_cos2.begin(), cal.sum_cos2.end());
    return cal;
}

double empirical_p(const NullCalibration& cal, double observed, NullStatistic stat, Tail side) {
    const auto& v = cal.draws(stat);
    if (v.empty()) throw ValidationError("empty calibration");
    std::size_t count;
    if (side == Tail::above)
        count = static_cast<std::size_t>(v.end() - std::lower_bound(v.begin(), v.end(), observed));
    else
        count = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), observed) - v.begin());
    return (1.0 + static_cast<double>(count)) / (static_cast<double>(v.size()) + 1.0);
}

Eigen::MatrixXd WhiteningTransform::apply(const Eigen::MatrixXd& rows) const {
    return (rows.rowwise() - mean.transpose()) * W;
}

Subspace WhiteningTransform::transform(const Subspace& u) const {
    if (u.d() != W.rows()) throw ValidationError("dimension mismatch in whitening transform");
    if (u.k() == 0) return u;
    return orthonormalize(u.basis() * W);
}

WhiteningTransform whiten(const Eigen::MatrixXd& rows) {
    const Eigen::Index n = rows.rows(), d = rows.cols();
    if (n < 2) throw ValidationError("whiten needs at least 2 rows");
    WhiteningTransform t;
    t.mean = rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = rows.rowwise() - t.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    const double tr = cov.trace();
    if (!(tr > 0)) throw ValidationError("whiten: degenerate (all-equal) rows");
    t.ridge = 1e-3 * tr / static_cast<double>(d);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("whiten: eigen-decomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < d; ++i) ev(i) = std::max(ev(i), 0.0) + t.ridge;
    const Eigen::MatrixXd& V = es.eigenvectors();
    t.W = V * ev.cwiseInverse().cwiseSqrt().asDiagonal() * V.transpose();
    t.W_inv = V * ev.cwiseSqrt().asDiagonal() * V.transpose();
    return t;
}

WhiteningTransform whiten(const ActivationCache& cache) {
    if (cache.contains("activations")) return whiten(cache.get("activations").to_matrix());
    if (cache.contains("doy_means")) return whiten(cache.get("doy_means").to_matrix());
    throw ValidationError("cache has neither activations nor doy_means");
}

} // namespace msc
