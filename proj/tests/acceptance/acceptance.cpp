// Acceptance checks. Each criterion prints one [PASS] or [FAIL] line with
// the measured numbers; exit status 0 on pass, 1 on fail.

#include <CLI11.hpp>

#include <msc/cache.hpp>
#include <msc/deviation.hpp>
#include <msc/diagnostics.hpp>
#include <msc/erasure.hpp>
#include <msc/mediator.hpp>
#include <msc/null_calibration.hpp>
#include <msc/probes.hpp>
#include <msc/qk_twist.hpp>
#include <msc/rng.hpp>
#include <msc/safety.hpp>
#include <msc/stats.hpp>
#include <msc/synthetic.hpp>
#include <msc/task_model.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace msc;

namespace {

struct Context {
    std::string msc;
    fs::path work;
};

// Collects sub-check outcomes and renders the single summary line.
class Verdict {
public:
    explicit Verdict(std::string name) : name_(std::move(name)) {}
    void check(bool ok, const std::string& what) {
        ok_ = ok_ && ok;
        parts_.push_back((ok ? "" : "!") + what);
    }
    bool finish() const {
        std::string line = (ok_ ? "[PASS] " : "[FAIL] ") + name_ + ":";
        for (const auto& p : parts_) line += " " + p + ";";
        line.pop_back();
        std::cout << line << std::endl;
        return ok_;
    }

private:
    std::string name_;
    std::vector<std::string> parts_;
    bool ok_ = true;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool haar_null(const Context&) {
    Verdict v("haar-null");
    struct Row {
        int d, k;
        double target;
    };
    const std::vector<Row> rows{{1536, 2, 88.5}, {2304, 2, 88.3}, {3584, 2, 88.6}, {2304, 4, 87.9}, {2304, 6, 86.7}};
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto cal = monte_carlo_null(r.d, r.k, r.k, 10000, mix(2024, i));
        const double m = rad2deg(cal.mc_mean(NullStatistic::mean_angle));
        v.check(std::abs(m - r.target) <= 0.2, fmt("(%d,%d) %.2f vs %.1f", r.d, r.k, m, r.target));
    }
    const double secs = seconds_since(t0);
    v.check(secs < 120.0, fmt("%.1fs", secs));
    return v.finish();
}

bool jacobi_trace(const Context&) {
    Verdict v("jacobi-trace");
    const int d = 2304, n = 20000;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k : {1, 2, 4, 8, 16}) {
        const auto cal = monte_carlo_null(d, k, k, n, mix(3033, static_cast<std::uint64_t>(k)));
        const double m = cal.mc_mean(NullStatistic::sum_cos2);
        const double half = 2.576 * cal.mc_sd(NullStatistic::sum_cos2) / std::sqrt(static_cast<double>(n));
        const double expect = static_cast<double>(k * k) / d;
        v.check(std::abs(m - expect) <= half, fmt("k=%d %.5f vs %.5f (+-%.5f)", k, m, expect, half));
    }
    const double secs = seconds_since(t0);
    v.check(secs < 300.0, fmt("%.1fs", secs));
    return v.finish();
}

DasConfig planted_das() {
    DasConfig c;
    c.k = 4;
    c.steps = 2000;
    c.lr = 3e-3;
    return c;
}

bool planted_recovery(const Context&) {
    Verdict v("planted-recovery");
    const SyntheticSuiteSpec spec;
    const auto cache = generate_synthetic_suite(spec);
    const auto data = load_dataset(cache);
    const auto model = SyntheticMediatorModel::from_cache(cache);
    const Subspace& truth = model.mediator();

    DiagnosticConfig cfg;
    cfg.k = 4;
    cfg.n_null = 25;
    cfg.seed = spec.seed;
    cfg.das = planted_das();
    const DiagnosticReport r = run_diagnostic(model, data.X, data.doy, data.labels, cfg);

    const GradientSubspace oracle = gradient_subspace(model, data.X, data.labels, 4);
    const double to_truth = principal_angles(r.das_subspace, truth).mean_angle_deg();
    const double to_oracle = principal_angles(r.das_subspace, oracle.frame).mean_angle_deg();
    v.check(to_truth < 5.0, fmt("angle to planted %.2f deg", to_truth));
    v.check(to_oracle < 5.0, fmt("angle to gradient frame %.2f deg", to_oracle));

    const double planted = ablation_drop_pp(model, data.X, data.labels, truth);
    v.check(r.delta_M >= 0.9 * planted, fmt("delta_M %.2f pp of planted %.2f", r.delta_M, planted));
    v.check(std::abs(r.delta_P) < 2.0, fmt("delta_P %.2f pp", r.delta_P));
    double worst = 0.0;
    for (double x : r.random_drops) worst = std::max(worst, std::abs(x));
    v.check(r.random_drops.size() == 25 && worst < 2.0, fmt("max |random drop| %.2f pp over %zu", worst, r.random_drops.size()));
    v.check(r.theta_in_null_band, fmt("theta %.2f in [%.2f, %.2f]", r.theta_bar, r.null_lo, r.null_hi));
    return v.finish();
}

// f(x) = L Q U_M x with Q orthogonal, so g is exactly L-Lipschitz (and
// L-expanding) and E|df|^2 under x ~ N(0, s^2 I) is L^2 s^2 ||U_M U^T||_F^2.
double mean_sq_effect(const Subspace& med, const Eigen::MatrixXd& Q, double L, const Subspace& u, double sigma,
                      int n, Rng& rng) {
    const Eigen::MatrixXd C = L * Q * med.basis() * u.basis().transpose();
    double acc = 0.0;
    Eigen::VectorXd x(med.d());
    for (int i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = sigma * rng.normal();
        acc += (C * (u.basis() * x)).squaredNorm();
    }
    return acc / n;
}

bool lipschitz_sandwich(const Context&) {
    Verdict v("lipschitz-sandwich");
    const int d = 256, k_med = 4, k = 4, n_x = 4000;
    const double L = 2.0, sigma = 1.5;
    const Subspace med = haar_sample(d, k_med, 41);
    Rng qr(42);
    Eigen::MatrixXd G(k_med, k_med);
    for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = qr.normal();
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();

    double lo = 1e300, hi = 0.0;
    for (int j = 0; j < 20; ++j) {
        const Subspace u = haar_sample(d, k, mix(43, static_cast<std::uint64_t>(j)));
        Rng rng = Rng::substream(44, static_cast<std::uint64_t>(j));
        const double measured = mean_sq_effect(med, Q, L, u, sigma, n_x, rng);
        const double bound = L * L * sigma * sigma * principal_angles(u, med).sum_cos2;
        lo = std::min(lo, measured / bound);
        hi = std::max(hi, measured / bound);
    }
    v.check(lo >= 0.5 && hi <= 2.0, fmt("Haar ratio range [%.3f, %.3f] over 20", lo, hi));

    // Containing frame: the lower bound with the same modulus.
    Eigen::MatrixXd rows(k_med + 2, d);
    rows << med.basis(), haar_sample(d, 2, 45).basis();
    Rng rng(46);
    const double full = mean_sq_effect(med, Q, L, orthonormalize(rows), sigma, n_x, rng) / (L * L * sigma * sigma * k_med);
    v.check(full >= 0.5 && full <= 2.0, fmt("containing ratio %.3f", full));

    // Perturbations inside vs orthogonal to a trained DAS frame.
    const auto cache = generate_synthetic_suite(SyntheticSuiteSpec{});
    const auto data = load_dataset(cache);
    const auto model = SyntheticMediatorModel::from_cache(cache);
    DasConfig dc = planted_das();
    dc.seed = 7;
    const DasFitResult das = das_fit(model, data.X, data.labels, dc);
    const std::vector<Eigen::Index> take = [&] {
        std::vector<Eigen::Index> t;
        for (Eigen::Index i = 0; i < data.X.rows(); i += 5) t.push_back(i);
        return t;
    }();
    std::vector<int> labels;
    for (auto i : take) labels.push_back(data.labels[static_cast<std::size_t>(i)]);
    const std::vector<double> eps{0.05, 0.1, 0.2, 0.4, 0.8};
    const auto curve = perturbation_response(model, data.X(take, Eigen::all), labels, das.subspace, eps, 47);
    const double s_in = slope_through_origin(curve.eps, curve.in_subspace);
    const double s_out = slope_through_origin(curve.eps, curve.orthogonal);
    const double ratio = s_out > 0.0 ? s_in / s_out : INFINITY;
    v.check(ratio >= 10.0, fmt("slopes %.4g / %.4g = %.1fx", s_in, s_out, ratio));
    return v.finish();
}

bool fieller(const Context&) {
    Verdict v("fieller");
    const auto close = [](double got, double want) { return std::abs(got - want) <= 0.01 * std::abs(want); };
    const auto a = fieller_interval(44.0, 0.20, 0.08);
    v.check(a.kind == FiellerKind::interval && close(a.lo, 122.2) && close(a.hi, 1100.8),
            fmt("%s [%.1f, %.1f] vs interval [122.2, 1100.8]", fieller_kind_name(a.kind), a.lo, a.hi));
    const auto b = fieller_interval(42.0, 0.04, 0.19);
    v.check(b.kind == FiellerKind::exterior && close(b.lo, -128.7) && close(b.hi, 103.4),
            fmt("%s %.1f / %.1f vs exterior -128.7 / 103.4", fieller_kind_name(b.kind), b.lo, b.hi));
    const auto c = fieller_interval(51.0, 0.0, 0.0);
    v.check(c.kind == FiellerKind::unbounded, fmt("%s vs unbounded", fieller_kind_name(c.kind)));
    return v.finish();
}

Eigen::MatrixXd gaussian_means(int d, Rng& rng) {
    Eigen::MatrixXd m(kDays, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

bool qk_scan(const Context&) {
    Verdict v("qk-scan");
    const auto cache = generate_synthetic_suite(SyntheticSuiteSpec{});
    const Eigen::MatrixXd means = cache.get("doy_means").to_matrix();
    const auto heads = load_heads(cache);
    const auto res = scan_heads(means, heads, 999, 0.05, 7);
    const auto& h0 = res.front();
    int false_hits = 0;
    for (std::size_t i = 1; i < res.size(); ++i) false_hits += res[i].significant;
    v.check(h0.c_star == 30 && h0.q_bh < 0.05,
            fmt("planted head c*=%d z=%.2f q=%.4f, %d other heads significant", h0.c_star, h0.peak_z, h0.q_bh,
                false_hits));

    int with_discovery = 0;
    const int repeats = 50;
    for (int r = 0; r < repeats; ++r) {
        Rng rng = Rng::substream(808, static_cast<std::uint64_t>(r));
        const Eigen::MatrixXd noise = gaussian_means(16, rng);
        std::vector<HeadTensors> null_heads;
        for (int h = 0; h < 8; ++h) null_heads.push_back(random_head(16, 4, rng));
        const auto scan = scan_heads(noise, null_heads, 200, 0.05, mix(809, static_cast<std::uint64_t>(r)));
        with_discovery += std::any_of(scan.begin(), scan.end(), [](const auto& x) { return x.significant; });
    }
    // All discoveries are false, so the FDR is the share of scans with any.
    const double fdr = static_cast<double>(with_discovery) / repeats;
    v.check(fdr <= 0.10, fmt("null FDR %.3f over %d scans", fdr, repeats));

    const double p = mode_coincidence_test({30.1, 60.8}, {30.0, 61.0}, 3.0, 100000, 39);
    v.check(std::abs(p - 0.009) <= 0.004, fmt("coincidence p %.4f vs 0.009", p));
    return v.finish();
}

bool ksg(const Context&) {
    Verdict v("ksg");
    const auto pair = [](double rho, std::uint64_t seed, std::vector<double>& a, std::vector<double>& b) {
        Rng rng(seed);
        a.assign(2000, 0.0);
        b.assign(2000, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double u = rng.normal(), w = rng.normal();
            a[i] = u;
            b[i] = rho * u + std::sqrt(1.0 - rho * rho) * w;
        }
    };
    std::vector<double> a, b;
    pair(0.9, 90, a, b);
    const double mi = ksg_mutual_information(a, b, 3).mi_nats;
    const double truth = -0.5 * std::log(1.0 - 0.81);
    v.check(std::abs(mi - 0.830) <= 0.08, fmt("rho 0.9 MI %.4f (closed form %.4f)", mi, truth));
    pair(0.0, 91, a, b);
    const double mi0 = ksg_mutual_information(a, b, 3).mi_nats;
    v.check(std::abs(mi0) < 0.05, fmt("independent MI %.4f", mi0));
    return v.finish();
}

bool calibration(const Context&) {
    Verdict v("calibration");
    const double perfect = auroc({0.9, 0.8, 0.7, 0.3, 0.2, 0.1}, {1, 1, 1, 0, 0, 0});
    const double tied = auroc(std::vector<double>(6, 0.4), {1, 0, 1, 0, 1, 0});
    v.check(perfect == 1.0 && tied == 0.5, fmt("AUROC %.17g / %.17g", perfect, tied));

    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        s.push_back(i < 10 ? 0.0 : 1.0);
        y.push_back(i < 10 ? 0 : 1);
    }
    const double ece = calibration_report(s, y).ece;
    v.check(ece == 0.0, fmt("ECE %.3g", ece));

    const std::vector<double> sc{0.95, 0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.2, 0.1};
    const std::vector<int> lab{1, 1, 0, 1, 1, 0, 0, 1, 0, 0};
    const auto rep = calibration_report(sc, lab);
    const auto counts = [&](double t) {
        int tp = 0, fp = 0;
        for (std::size_t i = 0; i < sc.size(); ++i)
            if (sc[i] >= t) (lab[i] ? tp : fp)++;
        return std::pair{tp, fp};
    };
    double best_j = -1.0, best_t = 0.0;
    for (double t : sc) {
        const auto [tp, fp] = counts(t);
        if (tp / 5.0 - fp / 5.0 > best_j) best_j = tp / 5.0 - fp / 5.0, best_t = t;
    }
    v.check(rep.youden_threshold == best_t && std::abs(rep.youden_tpr - rep.youden_fpr - best_j) < 1e-12,
            fmt("Youden t=%.2f J=%.2f (brute %.2f, %.2f)", rep.youden_threshold, rep.youden_tpr - rep.youden_fpr,
                best_t, best_j));
    double worst = 0.0;
    for (const auto& p : rep.net_benefit) {
        const auto [tp, fp] = counts(p.threshold);
        const double t = p.threshold;
        worst = std::max(worst, std::abs(p.net_benefit - (tp / 5.0 - t / (1.0 - t) * fp / 5.0)));
    }
    v.check(rep.net_benefit.size() == 19 && worst < 1e-12, fmt("NB max error %.2g over %zu thresholds", worst, rep.net_benefit.size()));
    return v.finish();
}

bool erasure(const Context&) {
    Verdict v("erasure");
    const auto cache = generate_synthetic_suite(SyntheticSuiteSpec{});
    const auto data = load_dataset(cache);
    const Eigen::MatrixXd Y = circular_targets(data.doy);
    std::vector<int> months;
    for (int t : data.doy) months.push_back(month_of_doy(t));
    const auto folds = stratified_folds(months, data.doy, 5);

    const double before = fit_circular_probe(data.X, data.doy).cv_r2;
    v.check(before > 0.9, fmt("probe R2 before %.3f", before));
    const auto run = inlp_until_chance(data.X, Y, folds, 0.05);
    const double inlp = fit_circular_probe(ablate_rows(data.X, run.basis.subspace), data.doy).cv_r2;
    v.check(run.reached_target && inlp < 0.05, fmt("INLP (%d dirs) R2 %.4f", run.basis.subspace.k(), inlp));
    const double leace = fit_circular_probe(leace_fit(data.X, Y, 2).erase(data.X), data.doy).cv_r2;
    v.check(leace < 0.05, fmt("LEACE R2 %.4f", leace));
    return v.finish();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

std::map<std::string, std::string> read_tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream f(e.path(), std::ios::binary);
        out[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(f), {}};
    }
    return out;
}

bool determinism(const Context& ctx) {
    Verdict v("determinism");
    if (ctx.msc.empty()) {
        v.check(false, "no --msc binary given");
        return v.finish();
    }
    const fs::path root = ctx.work / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cache = (root / "cache").string();

    struct Cmd {
        std::string name, args;
        bool uses_cache = true;
    };
    const std::vector<Cmd> cmds{
        {"synth-gen", "--d 64 --k-med 2 --n-prompts 730 --heads 2 --queries 40 --seed 3", false},
        {"probe-fit", "--bootstrap 100 --seed 5"},
        {"das-fit", "--k 2 --steps 200 --restarts 2 --seed 5"},
        {"diagnose", "--k 2 --n-null 5 --steps 200 --null-draws 200 --subsets --spectrum --seed 5"},
        {"calibrate-null", "--frame-a mediator.basis --frame-b probe_signal.basis --draws 500 --seed 5"},
        {"qk-scan", "--n-perm 50 --modes-a 30 61 --modes-b 31 60 --mc-draws 2000 --seed 5"},
        {"deviation", "--k 2 --seed 5"},
        {"safety-battery", "--shuffles 50 --n-random 5 --seed 5"},
        {"tfa-split", "--seed 5"},
    };
    const std::string log = quote((root / "log.txt").string());
    const auto run = [&](const Cmd& c, const fs::path& out) {
        std::string line = quote(ctx.msc) + " " + c.name + " " + c.args;
        if (c.uses_cache || c.name == "calibrate-null") line += " --cache " + quote(cache);
        line += " --out " + quote(out.string()) + " >>" + log + " 2>&1";
        return std::system(line.c_str()) == 0;
    };

    // The first synth-gen run doubles as the input cache for the others.
    bool all = true;
    for (const auto& c : cmds) {
        const fs::path a = c.name == "synth-gen" ? fs::path(cache) : root / (c.name + ".1");
        const fs::path b = root / (c.name + ".2");
        if (!run(c, a) || !run(c, b)) {
            v.check(false, c.name + " exited nonzero");
            all = false;
            continue;
        }
        const auto ta = read_tree(a), tb = read_tree(b);
        const bool same = !ta.empty() && ta == tb;
        all = all && same;
        if (!same) v.check(false, c.name + " outputs differ");
    }
    if (all) v.check(true, fmt("%zu subcommands byte-identical", cmds.size()));
    return v.finish();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"msc acceptance checks"};
    std::string criterion = "all";
    Context ctx;
    std::string work = "acceptance_work";
    app.add_option("--criterion", criterion, "criterion name or 'all'");
    app.add_option("--msc", ctx.msc, "path to the msc binary");
    app.add_option("--work", work, "scratch directory");
    CLI11_PARSE(app, argc, argv);
    ctx.work = work;

    const std::vector<std::pair<std::string, std::function<bool(const Context&)>>> table{
        {"haar-null", haar_null},       {"jacobi-trace", jacobi_trace}, {"planted-recovery", planted_recovery},
        {"lipschitz-sandwich", lipschitz_sandwich}, {"fieller", fieller},       {"qk-scan", qk_scan},
        {"ksg", ksg},                   {"calibration", calibration},   {"erasure", erasure},
        {"determinism", determinism},
    };
    bool ok = true, found = false;
    for (const auto& [name, fn] : table) {
        if (criterion != "all" && criterion != name) continue;
        found = true;
        try {
            ok = fn(ctx) && ok;
        } catch (const std::exception& e) {
            std::cout << "[FAIL] " << name << ": error: " << e.what() << std::endl;
            ok = false;
        }
    }
    if (!found) {
        std::cerr << "unknown criterion " << criterion << "\n";
        return 2;
    }
    return ok ? 0 : 1;
}
