#include "commands.hpp"

#include <msc/cache.hpp>
#include <msc/deviation.hpp>
#include <msc/diagnostics.hpp>
#include <msc/error.hpp>
#include <msc/mediator.hpp>
#include <msc/null_calibration.hpp>
#include <msc/probes.hpp>
#include <msc/qk_twist.hpp>
#include <msc/rng.hpp>
#include <msc/safety.hpp>
#include <msc/stats.hpp>
#include <msc/subspace.hpp>
#include <msc/synthetic.hpp>
#include <msc/task_model.hpp>
#include <msc/tensor_io.hpp>
#include <msc/version.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace msc::cli {
namespace {

json provenance(const std::string& command, std::uint64_t seed, const std::string& cache_hash) {
    json p = {{"tool", "msc"}, {"version", kVersion}, {"command", command}, {"seed", seed}};
    p["cache_hash"] = cache_hash.empty() ? json(nullptr) : json(cache_hash);
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("write failed for " + path.string());
}

void write_report(const fs::path& out, const json& report, const std::string& file = "report.json") {
    write_text(out / file, report.dump(2) + "\n");
}

ActivationCache open_cache(const std::string& dir) {
    ActivationCache cache = ActivationCache::open(dir);
    cache.validate();
    return cache;
}

std::unique_ptr<SyntheticMediatorModel> load_model(const ActivationCache& cache) {
    return std::make_unique<SyntheticMediatorModel>(SyntheticMediatorModel::from_cache(cache));
}

void require_labels(const Dataset& ds) {
    if (ds.labels.empty()) throw ValidationError("cache has no labels");
}

std::optional<Subspace> optional_frame(const ActivationCache& cache, const std::string& name) {
    if (!cache.contains(name)) return std::nullopt;
    return Subspace::from_record(cache.get(name));
}

Subspace frame_from(const ActivationCache& cache, const std::string& spec) {
    // A path to an MSCT file, or a tensor name inside the cache.
    if (fs::is_regular_file(spec)) return Subspace::from_record(read_tensor(spec));
    if (!cache.contains(spec)) throw ValidationError("no frame named " + spec);
    return Subspace::from_record(cache.get(spec));
}

CLI::App* add_common(CLI::App& app, const char* name, const char* help, Common& c, bool needs_cache = true) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (needs_cache) sub->add_option("--cache", c.cache, "input cache directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", c.out, "output directory")->required();
    sub->add_option("--seed", c.seed, "random seed");
    return sub;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    Common c;
    SyntheticSuiteSpec spec;
};

void run_synth(const SynthArgs& a) {
    SyntheticSuiteSpec spec = a.spec;
    spec.seed = a.c.seed;
    generate_synthetic_suite(spec).save(a.c.out);
}

struct ProbeArgs {
    Common c;
    double alpha = 1.0;
    int folds = 5;
    int harmonics = 1;
    int k = 0;
    int bootstrap = 0;
    std::string reference = "mediator.basis";
};

void run_probe(const ProbeArgs& a) {
    const ActivationCache cache = open_cache(a.c.cache);
    const Dataset ds = load_dataset(cache);
    const CircularProbeFit fit = fit_circular_probe(ds.X, ds.doy, a.alpha, a.folds, a.harmonics, a.k);

    double energy = 0.0;
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) energy += energy_fraction(ds.X.row(i).transpose(), fit.subspace);
    energy /= static_cast<double>(ds.X.rows());

    json r = {{"provenance", provenance("probe-fit", a.c.seed, cache.content_hash())},
              {"n", ds.X.rows()},
              {"d", ds.X.cols()},
              {"ridge_alpha", a.alpha},
              {"folds", a.folds},
              {"stratify", fit.split.stratify},
              {"harmonics", a.harmonics},
              {"k", fit.subspace.k()},
              {"cv_r2", fit.cv_r2},
              {"singular_values", std::vector<double>(fit.singular_values.data(),
                                                      fit.singular_values.data() + fit.singular_values.size())},
              {"mean_energy_fraction", energy}};
    if (auto ref = optional_frame(cache, a.reference)) {
        r["reference"] = a.reference;
        r["angle_to_reference_deg"] = principal_angles(fit.subspace, *ref).mean_angle_deg();
        if (a.bootstrap > 0) {
            const auto ci = bootstrap_angle_ci(ds.X, ds.doy, *ref, a.bootstrap, a.c.seed, a.alpha, a.harmonics);
            r["bootstrap"] = {{"B", a.bootstrap}, {"mean", ci.mean}, {"sd", ci.sd}, {"lo", ci.lo}, {"hi", ci.hi}};
        }
    } else if (a.bootstrap > 0) {
        throw ValidationError("bootstrap needs a reference frame in the cache");
    }
    write_report(a.c.out, r);
    write_tensor(fit.subspace.to_record("probe"), fs::path(a.c.out) / "probe.basis.msct");
}

struct DasArgs {
    Common c;
    DasConfig das;
    int restarts = 1;
};

void run_das(const DasArgs& a) {
    const ActivationCache cache = open_cache(a.c.cache);
    const Dataset ds = load_dataset(cache);
    require_labels(ds);
    const auto model = load_model(cache);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < a.restarts; ++i) seeds.push_back(a.c.seed + static_cast<std::uint64_t>(i));
    const DasFitResult fit = das_fit_best(*model, ds.X, ds.labels, a.das, seeds);

    ActivationCache out;
    fit.save(out, "das");
    out.meta()["d"] = model->d();
    out.meta()["source_cache_hash"] = cache.content_hash();
    out.save(a.c.out);

    const GradientSubspace grad = gradient_subspace(*model, ds.X, ds.labels, fit.subspace.k());
    json r = {{"provenance", provenance("das-fit", a.c.seed, cache.content_hash())},
              {"k", fit.subspace.k()},
              {"steps", fit.steps},
              {"lr", a.das.lr},
              {"batch_size", a.das.batch_size},
              {"restarts", a.restarts},
              {"best_seed", fit.seed},
              {"final_objective", fit.final_objective},
              {"converged", fit.converged},
              {"final_orth_residual", fit.orth_residual_trace.empty() ? 0.0 : fit.orth_residual_trace.back()},
              {"angle_to_gradient_frame_deg", principal_angles(fit.subspace, grad.frame).mean_angle_deg()},
              {"gradient_participation_ratio", grad.participation_ratio}};
    if (auto planted = optional_frame(cache, "mediator.basis"))
        r["angle_to_planted_deg"] = principal_angles(fit.subspace, *planted).mean_angle_deg();
    write_report(a.c.out, r);
}

struct DiagnoseArgs {
    Common c;
    DiagnosticConfig cfg;
    bool subsets = false;
    bool spectrum = false;
};

void run_diagnose(const DiagnoseArgs& a) {
    const ActivationCache cache = open_cache(a.c.cache);
    const Dataset ds = load_dataset(cache);
    require_labels(ds);
    const auto model = load_model(cache);
    DiagnosticConfig cfg = a.cfg;
    cfg.seed = a.c.seed;
    const DiagnosticReport rep = run_diagnostic(*model, ds.X, ds.doy, ds.labels, cfg);
    json r = rep.to_json();
    r["provenance"] = provenance("diagnose", a.c.seed, cache.content_hash());
    r["das_steps"] = cfg.das.steps;
    if (auto planted = optional_frame(cache, "mediator.basis"))
        r["das_angle_to_planted_deg"] = principal_angles(rep.das_subspace, *planted).mean_angle_deg();
    if (a.subsets) r["subset_sweep"] = subset_ablation_sweep(*model, ds.X, ds.labels, rep.das_subspace).to_json();
    if (a.spectrum)
        r["spectrum"] = spectrum_json(
            spectrum_report(*model, ds.X, ds.doy, ds.labels, rep.das_subspace, cfg.n_null, mix(cfg.seed, 400)));
    write_report(a.c.out, r);
}

struct NullArgs {
    Common c;
    int d = 2304, k1 = 2, k2 = 2, draws = 10000;
    std::string frame_a, frame_b;
};

void run_null(const NullArgs& a) {
    std::optional<ActivationCache> cache;
    if (!a.c.cache.empty()) cache = open_cache(a.c.cache);
    if ((!a.frame_a.empty() || !a.frame_b.empty()) && !cache) throw ValidationError("--frame-a/--frame-b need --cache");
    if (a.frame_a.empty() != a.frame_b.empty()) throw ValidationError("give both --frame-a and --frame-b");

    int d = a.d, k1 = a.k1, k2 = a.k2;
    std::optional<Subspace> fa, fb;
    if (!a.frame_a.empty()) {
        fa = frame_from(*cache, a.frame_a);
        fb = frame_from(*cache, a.frame_b);
        if (fa->d() != fb->d()) throw ValidationError("frames differ in ambient dimension");
        d = fa->d();
        k1 = fa->k();
        k2 = fb->k();
    }
    const NullCalibration cal = monte_carlo_null(d, k1, k2, a.draws, a.c.seed);
    cal.save(a.c.out);

    json r = {{"provenance", provenance("calibrate-null", a.c.seed, cache ? cache->content_hash() : "")},
              {"d", d},
              {"k1", k1},
              {"k2", k2},
              {"n_draws", a.draws},
              {"analytic", {{"mean_angle_deg", rad2deg(cal.analytic.mean_angle)}, {"sum_cos2", cal.analytic.sum_cos2}}},
              {"mc",
               {{"mean_angle_deg", rad2deg(cal.mc_mean(NullStatistic::mean_angle))},
                {"mean_angle_sd_deg", rad2deg(cal.mc_sd(NullStatistic::mean_angle))},
                {"mean_angle_p05_deg", rad2deg(cal.mc_quantile(NullStatistic::mean_angle, 0.05))},
                {"mean_angle_p95_deg", rad2deg(cal.mc_quantile(NullStatistic::mean_angle, 0.95))},
                {"sum_cos2_mean", cal.mc_mean(NullStatistic::sum_cos2)},
                {"sum_cos2_sd", cal.mc_sd(NullStatistic::sum_cos2)}}}};
    if (fa) {
        const auto obs = [&](const Subspace& u, const Subspace& v) {
            const auto pa = principal_angles(u, v);
            return json{{"mean_angle_deg", pa.mean_angle_deg()},
                        {"sum_cos2", pa.sum_cos2},
                        {"p_mean_angle_below", empirical_p(cal, pa.mean_angle, NullStatistic::mean_angle, Tail::below)},
                        {"p_sum_cos2_above", empirical_p(cal, pa.sum_cos2, NullStatistic::sum_cos2, Tail::above)}};
        };
        const WhiteningTransform w = whiten(*cache);
        r["observed"] = {{"frame_a", a.frame_a},
                         {"frame_b", a.frame_b},
                         {"raw", obs(*fa, *fb)},
                         {"whitened", obs(w.transform(*fa), w.transform(*fb))},
                         {"whitening_ridge", w.ridge}};
    }
    write_report(a.c.out, r);
}

struct QkArgs {
    Common c;
    int n_perm = 200;
    double q = 0.05;
    bool circular = false;
    std::vector<double> modes_a, modes_b;
    double tau = 3.0;
    int mc_draws = 100000;
};

void run_qk(const QkArgs& a) {
    const ActivationCache cache = open_cache(a.c.cache);
    const Eigen::MatrixXd means = cache.get("doy_means").to_matrix();
    const auto heads = load_heads(cache);
    const auto res = scan_heads(means, heads, a.n_perm, a.q, a.c.seed, a.circular);
    write_text(fs::path(a.c.out) / "scan.csv", scan_csv(res));

    json rows = json::array();
    std::vector<double> sig_offsets;
    for (const auto& h : res) {
        rows.push_back({{"layer", h.layer},
                        {"head", h.head},
                        {"c_star", h.c_star},
                        {"peak_z", h.peak_z},
                        {"p_perm", h.p_perm},
                        {"q_bh", h.q_bh},
                        {"significant", h.significant},
                        {"degenerate", h.profile.degenerate}});
        if (h.significant) sig_offsets.push_back(h.c_star);
    }
    json r = {{"provenance", provenance("qk-scan", a.c.seed, cache.content_hash())},
              {"n_heads", res.size()},
              {"n_perm", a.n_perm},
              {"q", a.q},
              {"circular", a.circular},
              {"n_significant", sig_offsets.size()},
              {"heads", rows}};
    if (sig_offsets.size() >= 4) {
        const ModeFit m = offset_modes(sig_offsets, 4, a.c.seed);
        json table = json::array();
        for (const auto& g : m.table) table.push_back({{"k", g.k}, {"bic", g.bic}, {"log_lik", g.log_lik}});
        r["modes"] = {{"k", m.best.k}, {"centers", m.best.means}, {"weights", m.best.weights}, {"bic_table", table}};
    }
    if (!a.modes_a.empty() || !a.modes_b.empty()) {
        if (a.modes_a.empty() || a.modes_b.empty()) throw ValidationError("give both --modes-a and --modes-b");
        r["mode_coincidence"] = {
            {"tau", a.tau},
            {"draws", a.mc_draws},
            {"matched", matched_modes(a.modes_a, a.modes_b, a.tau)},
            {"p", mode_coincidence_test(a.modes_a, a.modes_b, a.tau, a.mc_draws, mix(a.c.seed, 1))}};
    }
    write_report(a.c.out, r);
}

struct DeviationArgs {
    Common c;
    int k = 8;
    bool uncentered = false;
};

void run_deviation(const DeviationArgs& a) {
    const ActivationCache cache = open_cache(a.c.cache);
    const ReferenceManifold m = reference_basis(cache.get("doy_means").to_matrix(), a.k);
    const Eigen::MatrixXd acts = cache.get("queries").to_matrix();
    const auto pos = cache.get("queries.positions").to_i64();
    const auto& pdims = cache.get("queries.positions").dims;
    if (pdims.size() != 2) throw ValidationError("queries.positions must be n_queries x p");
    const auto Q = static_cast<std::size_t>(pdims[0]), P = static_cast<std::size_t>(pdims[1]);
    const Eigen::VectorXd err = cache.get("queries.error_days").to_vector();
    const auto wrong64 = cache.get("queries.wrong").to_i64();
    if (static_cast<std::size_t>(err.size()) != Q || wrong64.size() != Q) throw ValidationError("query tables differ in length");
    const int per_query = static_cast<int>(acts.rows()) / static_cast<int>(std::max<std::size_t>(Q, 1));

    std::vector<std::vector<int>> positions(Q);
    for (std::size_t q = 0; q < Q; ++q)
        for (std::size_t p = 0; p < P; ++p) positions[q].push_back(static_cast<int>(pos[q * P + p]));
    const auto delta = score_queries(acts, per_query, positions, m, !a.uncentered);

    std::vector<int> wrong(wrong64.begin(), wrong64.end());
    std::vector<double> errv(err.data(), err.data() + err.size());
    const CalibrationReport cal = calibration_report(delta, wrong);

    std::ostringstream csv;
    csv << "query_id,delta,k,error_days,wrong_flag\n";
    char buf[128];
    for (std::size_t q = 0; q < Q; ++q) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%d,%.17g,%d\n", q, delta[q], a.k, errv[q], wrong[q]);
        csv << buf;
    }
    write_text(fs::path(a.c.out) / "queries.csv", csv.str());

    json r = {{"provenance", provenance("deviation", a.c.seed, cache.content_hash())},
              {"k", a.k},
              {"centered", !a.uncentered},
              {"n_queries", Q},
              {"spearman_delta_error", spearman(delta, errv)},
              {"calibration", cal.to_json()}};
    write_report(a.c.out, r);
}

struct SafetyArgs {
    Common c;
    SafetyConfig cfg;
    std::string mediator;
};

void run_safety(const SafetyArgs& a) {
    const ActivationCache cache = open_cache(a.c.cache);
    const Dataset ds = load_dataset(cache);
    require_labels(ds);
    const auto model = load_model(cache);
    std::string source = a.mediator;
    if (source.empty()) source = cache.contains("das.basis") ? "das.basis" : "mediator.basis";
    const Subspace mediator = frame_from(cache, source);
    const CircularProbeFit probe = fit_circular_probe(ds.X, ds.doy, 1.0, 0);
    SafetyConfig cfg = a.cfg;
    cfg.seed = a.c.seed;
    const SafetyReport rep =
        run_safety_battery(*model, ds.X, ds.doy, ds.labels, cache.get("doy_means").to_matrix(), mediator, probe, cfg);
    json r = rep.to_json();
    r["provenance"] = provenance("safety-battery", a.c.seed, cache.content_hash());
    r["mediator_source"] = source;
    write_report(a.c.out, r);

    std::ostringstream csv;
    csv << "experiment,key_metric,result,verdict\n";
    for (const auto& row : rep.rows)
        csv << '"' << row.experiment << "\",\"" << row.metric << "\",\"" << row.result << "\",\"" << row.verdict << "\"\n";
    write_text(fs::path(a.c.out) / "summary.csv", csv.str());
}

struct TfaArgs {
    Common c;
    std::string tensor = "doy_means";
    int t = 0;
};

void run_tfa(const TfaArgs& a) {
    const ActivationCache cache = open_cache(a.c.cache);
    const Eigen::MatrixXd seq = cache.get(a.tensor).to_matrix();
    const int n = static_cast<int>(seq.rows());
    if (a.t < 0 || a.t > n) throw ValidationError("--t out of range");
    const int lo = a.t == 0 ? 1 : a.t, hi = a.t == 0 ? n : a.t;

    std::ostringstream csv;
    csv << "t,predictable_norm,novel_norm,novel_fraction\n";
    std::vector<double> novel_frac;
    char buf[160];
    for (int t = lo; t <= hi; ++t) {
        const TfaSplit s = tfa_split(seq, t);
        const double total = seq.row(t - 1).norm();
        const double frac = total > 0 ? s.novel.norm() / total : 0.0;
        novel_frac.push_back(frac);
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", t, s.predictable.norm(), s.novel.norm(), frac);
        csv << buf;
    }
    write_text(fs::path(a.c.out) / "tfa.csv", csv.str());
    json r = {{"provenance", provenance("tfa-split", a.c.seed, cache.content_hash())},
              {"tensor", a.tensor},
              {"t_first", lo},
              {"t_last", hi},
              {"mean_novel_fraction", mean(novel_frac)}};
    write_report(a.c.out, r);
}

template <class Args>
void bind(CLI::App* sub, std::shared_ptr<Args> args, void (*fn)(const Args&), std::function<void()>* run) {
    sub->callback([args, fn, run] { *run = [args, fn] { fn(*args); }; });
}

} // namespace

void register_commands(CLI::App& app, std::function<void()>* run) {
    {
        auto a = std::make_shared<SynthArgs>();
        a->c.seed = 7;
        auto* s = add_common(app, "synth-gen", "generate the planted-mediator synthetic suite", a->c, false);
        s->add_option("--d", a->spec.d);
        s->add_option("--k-med", a->spec.k_med);
        s->add_option("--n-classes", a->spec.n_classes);
        s->add_option("--n-prompts", a->spec.n_prompts);
        s->add_option("--snr-med", a->spec.snr_med);
        s->add_option("--snr-probe", a->spec.snr_probe);
        s->add_option("--noise", a->spec.noise);
        s->add_option("--temperature", a->spec.temperature);
        s->add_option("--fallback-bias", a->spec.fallback_bias);
        s->add_option("--heads", a->spec.n_heads);
        s->add_option("--d-head", a->spec.d_head);
        s->add_option("--qk-offset", a->spec.qk_offset);
        s->add_option("--qk-z", a->spec.qk_z);
        s->add_option("--queries", a->spec.n_queries);
        bind(s, a, &run_synth, run);
    }
    {
        auto a = std::make_shared<ProbeArgs>();
        auto* s = add_common(app, "probe-fit", "fit the circular ridge probe", a->c);
        s->add_option("--alpha", a->alpha, "ridge penalty");
        s->add_option("--folds", a->folds, "month-stratified CV folds (0 skips CV)");
        s->add_option("--harmonics", a->harmonics);
        s->add_option("--k", a->k, "probe subspace rank (0 = 2 x harmonics)");
        s->add_option("--bootstrap", a->bootstrap, "bootstrap resamples for the angle CI");
        s->add_option("--reference", a->reference, "frame in the cache to compare against");
        bind(s, a, &run_probe, run);
    }
    {
        auto a = std::make_shared<DasArgs>();
        auto* s = add_common(app, "das-fit", "train a DAS mediator subspace", a->c);
        s->add_option("--k", a->das.k);
        s->add_option("--steps", a->das.steps);
        s->add_option("--lr", a->das.lr);
        s->add_option("--batch", a->das.batch_size);
        s->add_option("--clip", a->das.clip_norm, "gradient norm clip (0 disables)");
        s->add_option("--restarts", a->restarts, "seeds seed .. seed + restarts - 1");
        bind(s, a, &run_das, run);
    }
    {
        auto a = std::make_shared<DiagnoseArgs>();
        auto* s = add_common(app, "diagnose", "run the readout-mediator diagnostic", a->c);
        s->add_option("--k", a->cfg.k);
        s->add_option("--n-null", a->cfg.n_null, "random-control frames");
        s->add_option("--steps", a->cfg.das.steps, "DAS steps");
        s->add_option("--lr", a->cfg.das.lr);
        s->add_option("--restarts", a->cfg.das_restarts);
        s->add_option("--null-draws", a->cfg.null_draws);
        s->add_flag("--subsets", a->subsets, "add the subset ablation sweep");
        s->add_flag("--spectrum", a->spectrum, "add baseline ablations");
        bind(s, a, &run_diagnose, run);
    }
    {
        auto a = std::make_shared<NullArgs>();
        auto* s = app.add_subcommand("calibrate-null", "Monte-Carlo Haar null for principal angles");
        s->add_option("--cache", a->c.cache, "cache holding frames to test")->check(CLI::ExistingDirectory);
        s->add_option("--out", a->c.out)->required();
        s->add_option("--seed", a->c.seed);
        s->add_option("--d", a->d);
        s->add_option("--k1", a->k1);
        s->add_option("--k2", a->k2);
        s->add_option("--draws", a->draws);
        s->add_option("--frame-a", a->frame_a, "tensor name or MSCT path");
        s->add_option("--frame-b", a->frame_b, "tensor name or MSCT path");
        bind(s, a, &run_null, run);
    }
    {
        auto a = std::make_shared<QkArgs>();
        auto* s = add_common(app, "qk-scan", "scan attention heads for offset ridges", a->c);
        s->add_option("--n-perm", a->n_perm);
        s->add_option("--q", a->q, "BH false discovery rate");
        s->add_flag("--circular", a->circular, "wrap offsets around the year");
        s->add_option("--modes-a", a->modes_a, "mode centres of the first population");
        s->add_option("--modes-b", a->modes_b, "mode centres of the second population");
        s->add_option("--tau", a->tau, "mode match tolerance in days");
        s->add_option("--mc-draws", a->mc_draws);
        bind(s, a, &run_qk, run);
    }
    {
        auto a = std::make_shared<DeviationArgs>();
        auto* s = add_common(app, "deviation", "score queries by manifold deviation", a->c);
        s->add_option("--k", a->k, "reference basis rank");
        s->add_flag("--uncentered", a->uncentered, "project raw activations");
        bind(s, a, &run_deviation, run);
    }
    {
        auto a = std::make_shared<SafetyArgs>();
        auto* s = add_common(app, "safety-battery", "probe-monitoring stress tests", a->c);
        s->add_option("--alpha", a->cfg.alpha);
        s->add_option("--beta", a->cfg.beta);
        s->add_option("--shift-days", a->cfg.shift_days);
        s->add_option("--ksg-k", a->cfg.ksg_k);
        s->add_option("--shuffles", a->cfg.n_shuffles);
        s->add_option("--n-random", a->cfg.n_random);
        s->add_option("--mediator", a->mediator, "tensor name or MSCT path (default das.basis, then mediator.basis)");
        bind(s, a, &run_safety, run);
    }
    {
        auto a = std::make_shared<TfaArgs>();
        auto* s = add_common(app, "tfa-split", "split rows into predictable and novel parts", a->c);
        s->add_option("--tensor", a->tensor);
        s->add_option("--t", a->t, "1-based row (0 = every row)");
        bind(s, a, &run_tfa, run);
    }
}

} // namespace msc::cli
