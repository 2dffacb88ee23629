#include "msc/diagnostics.hpp"

#include "msc/erasure.hpp"
#include "msc/error.hpp"
#include "msc/null_calibration.hpp"
#include "msc/parallel.hpp"
#include "msc/probes.hpp"
#include "msc/rng.hpp"
#include "msc/stats.hpp"

#include <cmath>
#include <limits>

namespace msc {

const char* fieller_kind_name(FiellerKind k) {
    switch (k) {
    case FiellerKind::interval: return "interval";
    case FiellerKind::exterior: return "exterior";
    case FiellerKind::unbounded: return "unbounded";
    }
    return "unbounded";
}

FiellerInterval fieller_interval(double a, double b, double se, double z) {
    // (a - rho b)^2 <= z^2 se^2 rho^2  <=>  A rho^2 - 2 a b rho + a^2 <= 0.
    const double A = b * b - z * z * se * se;
    FiellerInterval out;
    if (A == 0.0 || (b == 0.0 && se == 0.0)) return out;
    const double half = std::abs(a) * z * se;
    const double r1 = (a * b - half) / A, r2 = (a * b + half) / A;
    out.lo = std::min(r1, r2);
    out.hi = std::max(r1, r2);
    out.kind = A > 0 ? FiellerKind::interval : FiellerKind::exterior;
    return out;
}

SpecificityInterval specificity_interval(double das_drop, double random_mean, double random_se) {
    SpecificityInterval out;
    out.random_mean = random_mean;
    out.random_se = random_se;
    if (random_mean != 0.0) out.rho = das_drop / random_mean;
    out.fieller = fieller_interval(das_drop, random_mean, random_se);
    out.delta_add = das_drop - random_mean;
    return out;
}

SpecificityInterval specificity_interval(double das_drop, const std::vector<double>& random_drops) {
    if (random_drops.size() < 5) throw ValidationError("specificity_interval needs at least 5 random drops");
    const double se = stddev(random_drops) / std::sqrt(static_cast<double>(random_drops.size()));
    return specificity_interval(das_drop, mean(random_drops), se);
}

double ablation_drop_pp(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                        const Subspace& u) {
    const double clean = model.evaluate(X, labels).accuracy();
    return 100.0 * (clean - evaluate_hooked(model, X, labels, u).accuracy());
}

std::vector<double> random_control_drops(const TaskModel& model, const Eigen::MatrixXd& X,
                                         const std::vector<int>& labels, int k, int n, std::uint64_t seed) {
    const double clean = model.evaluate(X, labels).accuracy();
    std::vector<double> drops(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
        const Subspace u = haar_sample(model.d(), k, mix(seed, j));
        drops[j] = 100.0 * (clean - evaluate_hooked(model, X, labels, u).accuracy());
    });
    return drops;
}

DiagnosticReport run_diagnostic(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                const std::vector<int>& labels, const DiagnosticConfig& cfg) {
    if (cfg.n_null < 5) throw ValidationError("n_null must be >= 5");
    if (cfg.k < 1) throw ValidationError("diagnostic needs k >= 1");
    DiagnosticReport r;
    r.d = model.d();
    r.k = cfg.k;
    r.n = static_cast<int>(X.rows());
    r.seed = cfg.seed;
    r.n_null = cfg.n_null;

    const auto probe = fit_circular_probe(X, doy, cfg.ridge_alpha, cfg.folds, 1, 0);
    r.probe_cv_r2 = probe.cv_r2;
    r.probe_subspace = probe.subspace;
    r.k_probe = probe.subspace.k();

    DasConfig das = cfg.das;
    das.k = cfg.k;
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < std::max(1, cfg.das_restarts); ++i) seeds.push_back(mix(cfg.seed, 100 + static_cast<std::uint64_t>(i)));
    const DasFitResult fit = das_fit_best(model, X, labels, das, seeds);
    r.das_subspace = fit.subspace;
    r.das_converged = fit.converged;

    r.theta_bar = principal_angles(r.probe_subspace, r.das_subspace).mean_angle_deg();
    const NullCalibration cal = monte_carlo_null(r.d, r.k_probe, r.k, cfg.null_draws, mix(cfg.seed, 200));
    r.null_lo = rad2deg(cal.mc_quantile(NullStatistic::mean_angle, 0.05));
    r.null_hi = rad2deg(cal.mc_quantile(NullStatistic::mean_angle, 0.95));
    r.null_mean = rad2deg(cal.mc_mean(NullStatistic::mean_angle));
    r.theta_in_null_band = r.theta_bar >= r.null_lo && r.theta_bar <= r.null_hi;

    r.clean_accuracy = model.evaluate(X, labels).accuracy();
    r.delta_P = ablation_drop_pp(model, X, labels, r.probe_subspace);
    r.delta_M = ablation_drop_pp(model, X, labels, r.das_subspace);
    r.random_drops = random_control_drops(model, X, labels, r.k, cfg.n_null, mix(cfg.seed, 300));
    r.random_lo = quantile(r.random_drops, 0.05);
    r.random_hi = quantile(r.random_drops, 0.95);
    r.specificity = specificity_interval(r.delta_M, r.random_drops);
    r.zero_signal = r.delta_M == 0.0 && std::all_of(r.random_drops.begin(), r.random_drops.end(), [](double v) { return v == 0.0; });
    if (r.zero_signal) r.specificity.rho.reset();
    return r;
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

} // namespace

nlohmann::json DiagnosticReport::to_json() const {
    nlohmann::json f = {{"kind", fieller_kind_name(specificity.fieller.kind)}};
    if (specificity.fieller.kind != FiellerKind::unbounded) {
        f["lo"] = num(specificity.fieller.lo);
        f["hi"] = num(specificity.fieller.hi);
    }
    return {
        {"d", d},
        {"k", k},
        {"k_probe", k_probe},
        {"n", n},
        {"seed", seed},
        {"n_null", n_null},
        {"probe_cv_r2", probe_cv_r2},
        {"theta_bar_deg", theta_bar},
        {"null_band_deg", {{"p05", null_lo}, {"p95", null_hi}, {"mean", null_mean}}},
        {"theta_in_null_band", theta_in_null_band},
        {"clean_accuracy", clean_accuracy},
        {"delta_P_pp", delta_P},
        {"delta_M_pp", delta_M},
        {"random_drops_pp", random_drops},
        {"random_envelope_pp", {{"p05", random_lo}, {"p95", random_hi}}},
        {"rho_k", specificity.rho ? num(*specificity.rho) : nlohmann::json(nullptr)},
        {"fieller", f},
        {"delta_add_pp", specificity.delta_add},
        {"zero_signal", zero_signal},
        {"das_converged", das_converged},
    };
}

SubsetAblationSweep subset_ablation_sweep(const TaskModel& model, const Eigen::MatrixXd& X,
                                          const std::vector<int>& labels, const Subspace& u) {
    const int k = u.k();
    if (k < 1) throw ValidationError("subset sweep needs k >= 1");
    if (k > 8) throw ValidationError("subset sweep supports k <= 8");
    SubsetAblationSweep out;
    for (int size = 1; size <= k; ++size)
        for (int mask = 1; mask < (1 << k); ++mask) {
            if (__builtin_popcount(static_cast<unsigned>(mask)) != size) continue;
            std::vector<int> s;
            for (int i = 0; i < k; ++i)
                if (mask & (1 << i)) s.push_back(i);
            out.subsets.push_back(std::move(s));
        }
    // Lexicographic within size: masks visit in numeric order, which is not
    // lexicographic on index lists, so sort explicitly.
    std::stable_sort(out.subsets.begin(), out.subsets.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });

    const double clean = model.evaluate(X, labels).mean_nll();
    out.delta_nll.resize(out.subsets.size());
    parallel_for(out.subsets.size(), [&](std::size_t i) {
        out.delta_nll[i] = evaluate_hooked(model, X, labels, u.rows(out.subsets[i])).mean_nll() - clean;
    });
    double singles = 0.0;
    for (int i = 0; i < k; ++i) singles += out.delta_nll[static_cast<std::size_t>(i)];
    out.cooperation_ratio = singles != 0.0 ? out.delta_nll.back() / singles : std::numeric_limits<double>::quiet_NaN();
    return out;
}

nlohmann::json SubsetAblationSweep::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < subsets.size(); ++i) rows.push_back({{"subset", subsets[i]}, {"delta_nll", delta_nll[i]}});
    return {{"subsets", rows}, {"cooperation_ratio", num(cooperation_ratio)}};
}

std::vector<SpectrumRow> spectrum_report(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                         const std::vector<int>& labels, const Subspace& das, int n_random,
                                         std::uint64_t seed) {
    const int k = das.k();
    if (k < 1) throw ValidationError("spectrum needs a nonempty DAS frame");
    const Evaluation clean = model.evaluate(X, labels);
    const auto row = [&](std::string method, const Subspace& u) {
        const Evaluation e = evaluate_hooked(model, X, labels, u);
        SpectrumRow r;
        r.method = std::move(method);
        r.k = u.k();
        r.delta_nll = e.mean_nll() - clean.mean_nll();
        r.drop_pp = 100.0 * (clean.accuracy() - e.accuracy());
        r.angle_to_das_deg = principal_angles(u, das).mean_angle_deg();
        return r;
    };
    std::vector<int> months(doy.size());
    std::transform(doy.begin(), doy.end(), months.begin(), month_of_doy);
    const Eigen::MatrixXd Y = circular_targets(doy, 1);

    std::vector<SpectrumRow> rows;
    rows.push_back(row("das", das));
    rows.push_back(row("pca", pca_basis(X, k).subspace));
    rows.push_back(row("mean_projection", mean_projection_basis(X, months, std::min(k, 11)).subspace));
    rows.push_back(row("probe", fit_circular_probe(X, doy, 1.0, 0).subspace));
    rows.push_back(row("inlp", inlp_basis(X, Y, k).subspace));
    rows.push_back(row("leace", leace_basis(X, Y, std::min(k, 2)).subspace));

    SpectrumRow rnd;
    rnd.method = "random";
    rnd.k = k;
    std::vector<SpectrumRow> draws(static_cast<std::size_t>(std::max(1, n_random)));
    parallel_for(draws.size(), [&](std::size_t j) { draws[j] = row("random", haar_sample(model.d(), k, mix(seed, j))); });
    for (const auto& r : draws) {
        rnd.delta_nll += r.delta_nll / static_cast<double>(draws.size());
        rnd.drop_pp += r.drop_pp / static_cast<double>(draws.size());
        rnd.angle_to_das_deg += r.angle_to_das_deg / static_cast<double>(draws.size());
    }
    rows.push_back(rnd);
    return rows;
}

nlohmann::json spectrum_json(const std::vector<SpectrumRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows)
        out.push_back({{"method", r.method},
                       {"k", r.k},
                       {"delta_nll", r.delta_nll},
                       {"drop_pp", r.drop_pp},
                       {"angle_to_das_deg", r.angle_to_das_deg}});
    return out;
}

} // namespace msc
