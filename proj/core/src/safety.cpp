#include "msc/safety.hpp"

#include "msc/error.hpp"
#include "msc/parallel.hpp"
#include "msc/rng.hpp"
#include "msc/stats.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

namespace msc {

AdversarialSpec::AdversarialSpec(double a, double b, int src, int tgt, Subspace mediator, Subspace complement)
    : alpha(a), beta(b), src_doy(src), tgt_doy(tgt), mediator_(std::move(mediator)), complement_(std::move(complement)) {
    if (mediator_.d() != complement_.d()) throw ValidationError("mediator and probe complement differ in width");
    if (mediator_.k() > 0 && complement_.k() > 0) {
        const auto pa = principal_angles(mediator_, complement_);
        if (std::cos(pa.angles.front()) > 1e-6) throw ValidationError("probe complement is not orthogonal to the mediator");
    }
}

Eigen::VectorXd adversarial_inject(const Eigen::VectorXd& x, const AdversarialSpec& spec, const Eigen::MatrixXd& means,
                                   const CircularProbe& probe) {
    if (means.rows() != 365) throw ValidationError("adversarial injection needs 365 day means");
    for (int day : {spec.src_doy, spec.tgt_doy})
        if (day < 1 || day > 365 || !means.row(day - 1).allFinite()) throw ValidationError("missing day mean");
    const Eigen::MatrixXd& M = spec.mediator().basis();
    const Eigen::MatrixXd& P = spec.probe_complement().basis();
    if (P.rows() != 2) throw ValidationError("probe complement must have rank 2 to match the sin/cos readout");

    const Eigen::VectorXd diff = (means.row(spec.src_doy - 1) - means.row(spec.tgt_doy - 1)).transpose();
    Eigen::VectorXd out = x + spec.alpha * (M.transpose() * (M * diff));
    if (spec.beta != 0.0) {
        const double a = 2.0 * std::numbers::pi * spec.src_doy / 365.0;
        const Eigen::Vector2d target(std::sin(a), std::cos(a));
        const Eigen::Vector2d yhat = probe.fit.W.topRows(2) * x + probe.fit.b.head(2);
        out += spec.beta * (P.transpose() * (target - yhat));
    }
    return out;
}

int mediator_nearest_day(const Eigen::VectorXd& x, const Subspace& mediator, const Eigen::MatrixXd& means) {
    const Eigen::MatrixXd coords = means * mediator.basis().transpose();
    const Eigen::RowVectorXd z = (mediator.basis() * x).transpose();
    Eigen::Index best = 0;
    (coords.rowwise() - z).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<int>(best) + 1;
}

std::vector<AdversarialResult> adversarial_sweep(const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                                 const Eigen::MatrixXd& means, const Subspace& mediator,
                                                 const Subspace& complement, const CircularProbe& probe,
                                                 const std::vector<double>& alphas, const std::vector<double>& betas,
                                                 int shift_days) {
    if (static_cast<std::size_t>(X.rows()) != doy.size()) throw ValidationError("rows and days differ in length");
    std::vector<AdversarialResult> out;
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<int> base_day(n);
    for (std::size_t i = 0; i < n; ++i)
        base_day[i] = mediator_nearest_day(X.row(static_cast<Eigen::Index>(i)).transpose(), mediator, means);
    for (double a : alphas)
        for (double b : betas) {
            std::vector<double> shift(n), err(n);
            parallel_for(n, [&](std::size_t i) {
                const int src = doy[i];
                const int tgt = ((src - 1 + shift_days) % 365 + 365) % 365 + 1;
                const AdversarialSpec spec(a, b, src, tgt, mediator, complement);
                const Eigen::VectorXd adv =
                    adversarial_inject(X.row(static_cast<Eigen::Index>(i)).transpose(), spec, means, probe);
                shift[i] = circular_day_distance(mediator_nearest_day(adv, mediator, means), base_day[i]);
                err[i] = circular_day_distance(probe.predict_doy(adv), src);
            });
            AdversarialResult r;
            r.alpha = a;
            r.beta = b;
            r.mediator_shift_days = mean(shift);
            double ss = 0.0;
            for (double e : err) ss += e * e;
            r.probe_rmse_days = std::sqrt(ss / static_cast<double>(n));
            out.push_back(r);
        }
    return out;
}

namespace {

bool is_constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// Count of sorted values v with |v - c| < eps. The bounds c -/+ eps round
// differently from |v - c|, so the range edges are settled on the distance.
std::size_t count_within(const std::vector<double>& sorted, double c, double eps) {
    const auto in = [&](double v) { return std::abs(v - c) < eps; };
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), c - eps);
    while (lo != sorted.begin() && in(*(lo - 1))) --lo;
    while (lo != sorted.end() && *lo < c && !in(*lo)) ++lo;
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), c + eps);
    while (hi != sorted.begin() && *(hi - 1) > c && !in(*(hi - 1))) --hi;
    while (hi != sorted.end() && in(*hi)) ++hi;
    return hi > lo ? static_cast<std::size_t>(hi - lo) : 0;
}

double ksg_value(const std::vector<double>& a, const std::vector<double>& b, int k) {
    using boost::math::digamma;
    const std::size_t n = a.size();
    std::vector<double> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x] < a[y]; });

    // k-th neighbour distance in the max norm by sweeping outward in a-order;
    // a side stops once its a-gap alone reaches the current k-th distance.
    std::vector<double> heap;
    heap.reserve(static_cast<std::size_t>(k) + 1);
    const auto offer = [&](double v) {
        if (heap.size() < static_cast<std::size_t>(k)) {
            heap.push_back(v);
            std::push_heap(heap.begin(), heap.end());
        } else if (v < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = v;
            std::push_heap(heap.begin(), heap.end());
        }
    };
    const auto full = [&] { return heap.size() == static_cast<std::size_t>(k); };

    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t i = order[p];
        heap.clear();
        std::size_t l = p, r = p + 1;
        bool go_l = p > 0, go_r = r < n;
        while (go_l || go_r) {
            if (go_l) {
                const std::size_t j = order[--l];
                const double gap = a[i] - a[j];
                if (full() && gap >= heap.front()) go_l = false;
                else offer(std::max(gap, std::abs(b[j] - b[i])));
                if (l == 0) go_l = false;
            }
            if (go_r) {
                const std::size_t j = order[r++];
                const double gap = a[j] - a[i];
                if (full() && gap >= heap.front()) go_r = false;
                else offer(std::max(gap, std::abs(b[j] - b[i])));
                if (r == n) go_r = false;
            }
        }
        const double eps = heap.front();
        const std::size_t nx = count_within(sa, a[i], eps), ny = count_within(sb, b[i], eps);
        // Counts include the point itself.
        acc += digamma(static_cast<double>(nx > 0 ? nx : 1)) + digamma(static_cast<double>(ny > 0 ? ny : 1));
    }
    return digamma(static_cast<double>(k)) + digamma(static_cast<double>(n)) - acc / static_cast<double>(n);
}

void check_series(const std::vector<double>& a, const std::vector<double>& b, int k) {
    if (a.size() != b.size()) throw ValidationError("series differ in length");
    if (a.size() < 20) throw ValidationError("KSG needs at least 20 samples");
    if (k < 1 || static_cast<std::size_t>(k) >= a.size()) throw ValidationError("bad neighbour count");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw ValidationError("non-finite sample");
}

} // namespace

MIEstimate ksg_mutual_information(const std::vector<double>& a, const std::vector<double>& b, int k) {
    check_series(a, b, k);
    MIEstimate m;
    m.k_neighbors = k;
    m.n = static_cast<int>(a.size());
    if (is_constant(a) || is_constant(b)) {
        std::fprintf(stderr, "warning: constant input to KSG, mutual information reported as 0\n");
        m.constant_input = true;
        return m;
    }
    m.mi_nats = ksg_value(a, b, k);
    return m;
}

std::vector<double> phase_randomized(const std::vector<double>& x, std::uint64_t seed) {
    const std::size_t n = x.size();
    if (n < 16) throw ValidationError("series too short for a phase surrogate");
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, x);
    Rng rng(seed);
    for (std::size_t j = 1; j < n - j; ++j) {
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        spec[j] = std::polar(std::abs(spec[j]), phi);
        spec[n - j] = std::conj(spec[j]);
    }
    std::vector<std::complex<double>> time;
    fft.inv(time, spec);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = time[i].real();
    return out;
}

double phase_shuffle_pvalue(const std::vector<double>& a, const std::vector<double>& b, int n_shuffles,
                            std::uint64_t seed, int k) {
    check_series(a, b, k);
    if (n_shuffles < 50) throw ValidationError("need at least 50 phase shuffles");
    if (a.size() < 16) throw ValidationError("series too short for a phase surrogate");
    if (is_constant(a) || is_constant(b)) return 1.0;
    const double observed = ksg_value(a, b, k);
    std::vector<double> null(static_cast<std::size_t>(n_shuffles));
    parallel_for(null.size(), [&](std::size_t j) { null[j] = ksg_value(a, phase_randomized(b, mix(seed, j)), k); });
    const auto ge = std::count_if(null.begin(), null.end(), [&](double v) { return v >= observed; });
    return (1.0 + static_cast<double>(ge)) / (static_cast<double>(n_shuffles) + 1.0);
}

Eigen::VectorXd LogisticFit::decision(const Eigen::MatrixXd& X) const {
    return (X * w).array() + b;
}

LogisticFit logistic_fit(const Eigen::MatrixXd& X, const std::vector<int>& y, double lambda, int max_iter, double tol) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ValidationError("rows and labels differ in length");
    if (lambda <= 0.0) throw ValidationError("logistic penalty must be positive");
    const Eigen::Index n = X.rows(), d = X.cols();
    Eigen::MatrixXd Xa(n, d + 1);
    Xa << X, Eigen::VectorXd::Ones(n);
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    Eigen::VectorXd reg = Eigen::VectorXd::Constant(d + 1, lambda);
    reg(d) = 1e-10;

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
    LogisticFit fit;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd pr = (1.0 / (1.0 + (-(Xa * theta).array()).exp())).matrix();
        const Eigen::VectorXd g = Xa.transpose() * (pr - yv) + reg.cwiseProduct(theta);
        const Eigen::VectorXd wts = (pr.array() * (1.0 - pr.array())).matrix();
        Eigen::MatrixXd H = Xa.transpose() * wts.asDiagonal() * Xa;
        H.diagonal() += reg;
        const Eigen::VectorXd step = H.ldlt().solve(g);
        if (!step.allFinite()) throw NumericalError("logistic Newton step is not finite");
        theta -= step;
        fit.iterations = it + 1;
        if (step.cwiseAbs().maxCoeff() < tol) break;
    }
    fit.w = theta.head(d);
    fit.b = theta(d);
    return fit;
}

double MockMonitor::angle_to_deg(const Subspace& u) const {
    return principal_angles(direction, u).mean_angle_deg();
}

MockMonitor mock_monitor(const Eigen::MatrixXd& X, const Eigen::VectorXd& nll, double lambda, int folds) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (n < 20) throw ValidationError("monitor needs at least 20 prompts");
    if (static_cast<std::size_t>(nll.size()) != n) throw ValidationError("NLL length does not match prompts");
    const std::vector<double> v(nll.data(), nll.data() + nll.size());
    const double med = quantile(v, 0.5);
    std::vector<int> y(n);
    int pos = 0;
    for (std::size_t i = 0; i < n; ++i) pos += y[i] = v[i] < med ? 1 : 0;
    if (pos == 0 || pos == static_cast<int>(n)) throw ValidationError("degenerate median split");

    const auto fold = stratified_folds(y, std::vector<int>(n, 0), folds);
    int correct = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
        std::vector<int> ytr;
        for (auto i : tr) ytr.push_back(y[static_cast<std::size_t>(i)]);
        const LogisticFit fit = logistic_fit(X(tr, Eigen::all), ytr, lambda);
        const Eigen::VectorXd s = fit.decision(X(te, Eigen::all));
        for (std::size_t j = 0; j < te.size(); ++j)
            correct += (s(static_cast<Eigen::Index>(j)) > 0 ? 1 : 0) == y[static_cast<std::size_t>(te[j])];
    }
    MockMonitor m;
    m.cv_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    m.fit = logistic_fit(X, y, lambda);
    if (m.fit.w.norm() == 0.0) throw NumericalError("monitor weights vanished");
    m.direction = Subspace(Eigen::MatrixXd(m.fit.w.normalized().transpose()));
    return m;
}

namespace {

double mean_shift(const CircularProbe& probe, const Eigen::MatrixXd& X, const std::vector<double>& before,
                  const Subspace& u) {
    const auto after = probe.predict_doy(ablate_rows(X, u));
    double s = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) s += circular_day_distance(before[i], after[i]);
    return s / static_cast<double>(before.size());
}

} // namespace

AblationInvisibility ablation_invisibility(const CircularProbe& probe, const Subspace& mediator, const Eigen::MatrixXd& X,
                                           const TaskModel* model, const std::vector<int>& labels, int n_random,
                                           std::uint64_t seed) {
    if (X.rows() == 0) throw ValidationError("no prompts");
    AblationInvisibility r;
    const auto before = probe.predict_doy(X);
    r.probe_shift_days = mean_shift(probe, X, before, mediator);
    r.delta_nll = std::numeric_limits<double>::quiet_NaN();
    if (model)
        r.delta_nll = evaluate_hooked(*model, X, labels, mediator).mean_nll() - model->evaluate(X, labels).mean_nll();
    if (n_random > 0 && mediator.k() > 0) {
        r.random_shifts.resize(static_cast<std::size_t>(n_random));
        parallel_for(r.random_shifts.size(), [&](std::size_t j) {
            r.random_shifts[j] = mean_shift(probe, X, before, haar_sample(mediator.d(), mediator.k(), mix(seed, j)));
        });
        r.random_mean = mean(r.random_shifts);
        r.random_sd = stddev(r.random_shifts);
        r.random_p95 = quantile(r.random_shifts, 0.95);
    }
    return r;
}

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

} // namespace

SafetyReport run_safety_battery(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                const std::vector<int>& labels, const Eigen::MatrixXd& means, const Subspace& mediator,
                                const CircularProbeFit& probe, const SafetyConfig& cfg) {
    if (mediator.k() < 1) throw ValidationError("safety battery needs a nonempty mediator");
    SafetyReport r;
    const Subspace complement = orthogonalize_against(probe.subspace.basis().topRows(2), mediator);
    r.adversarial = adversarial_sweep(X, doy, means, mediator, complement, probe.probe, {cfg.alpha}, {cfg.beta},
                                      cfg.shift_days)
                        .front();

    std::vector<double> ea(static_cast<std::size_t>(X.rows())), eb(ea.size());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Eigen::VectorXd x = X.row(i).transpose();
        ea[static_cast<std::size_t>(i)] = energy_fraction(x, probe.subspace);
        eb[static_cast<std::size_t>(i)] = energy_fraction(x, mediator);
    }
    r.energy_mi = ksg_mutual_information(ea, eb, cfg.ksg_k);
    r.energy_mi.p_phase_shuffle = phase_shuffle_pvalue(ea, eb, cfg.n_shuffles, mix(cfg.seed, 1), cfg.ksg_k);

    const MockMonitor mon = mock_monitor(X, model.evaluate(X, labels).nll, cfg.monitor_lambda);
    r.monitor_cv_accuracy = mon.cv_accuracy;
    r.monitor_angle_deg = mon.angle_to_deg(mediator);

    r.invisibility = ablation_invisibility(probe.probe, mediator, X, &model, labels, cfg.n_random, mix(cfg.seed, 2));

    const auto& a = r.adversarial;
    r.rows.push_back({"adversarial injection", "mediator shift / probe error (days)",
                      fmt("%.1f / %.1f", a.mediator_shift_days, a.probe_rmse_days),
                      a.mediator_shift_days > 2.0 * a.probe_rmse_days ? "probe fooled" : "probe not fooled"});
    r.rows.push_back({"probe vs mediator energy", "KSG MI nats (phase-shuffle p)",
                      fmt("%.3f (p=%.3f)", r.energy_mi.mi_nats, r.energy_mi.p_phase_shuffle),
                      r.energy_mi.p_phase_shuffle > 0.05 ? "no detectable dependence" : "dependent"});
    r.rows.push_back({"confidence monitor", "CV accuracy / angle to mediator (deg)",
                      fmt("%.3f / %.1f", r.monitor_cv_accuracy, r.monitor_angle_deg),
                      r.monitor_angle_deg > 80.0 ? "monitor misses mediator" : "monitor aligned with mediator"});
    const auto& v = r.invisibility;
    r.rows.push_back({"ablation invisibility", "probe shift days (random mean +- sd)",
                      fmt("%.1f", v.probe_shift_days) + fmt(" (%.1f +- %.1f)", v.random_mean, v.random_sd),
                      v.probe_shift_days <= v.random_p95 ? "ablation invisible to probe" : "ablation visible to probe"});
    return r;
}

nlohmann::json SafetyReport::to_json() const {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& row : rows)
        table.push_back({{"experiment", row.experiment}, {"key_metric", row.metric}, {"result", row.result},
                         {"verdict", row.verdict}});
    const auto nan_null = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    return {
        {"adversarial",
         {{"alpha", adversarial.alpha},
          {"beta", adversarial.beta},
          {"mediator_shift_days", adversarial.mediator_shift_days},
          {"probe_rmse_days", adversarial.probe_rmse_days}}},
        {"energy_mi",
         {{"mi_nats", energy_mi.mi_nats},
          {"k", energy_mi.k_neighbors},
          {"n", energy_mi.n},
          {"p_phase_shuffle", energy_mi.p_phase_shuffle},
          {"constant_input", energy_mi.constant_input}}},
        {"monitor", {{"cv_accuracy", monitor_cv_accuracy}, {"angle_to_mediator_deg", monitor_angle_deg}}},
        {"ablation_invisibility",
         {{"probe_shift_days", invisibility.probe_shift_days},
          {"delta_nll", nan_null(invisibility.delta_nll)},
          {"random_shifts", invisibility.random_shifts},
          {"random_mean", invisibility.random_mean},
          {"random_sd", invisibility.random_sd},
          {"random_p95", invisibility.random_p95}}},
        {"summary", table},
    };
}

} // namespace msc
