#include "msc/mediator.hpp"

#include "msc/cache.hpp"
#include "msc/error.hpp"
#include "msc/parallel.hpp"
#include "msc/rng.hpp"
#include "msc/stats.hpp"

#include <cmath>
#include <numeric>

namespace msc {

ThinQR thin_qr(const Eigen::MatrixXd& A) {
    const Eigen::Index m = A.rows(), k = A.cols();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    ThinQR out;
    out.R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    out.Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
    for (Eigen::Index j = 0; j < k; ++j)
        if (out.R(j, j) < 0) {
            out.R.row(j) *= -1.0;
            out.Q.col(j) *= -1.0;
        }
    return out;
}

Eigen::MatrixXd qr_backward(const ThinQR& qr, const Eigen::MatrixXd& dQ) {
    // With dR = 0: M = -dQ^T Q, copyltu(M) mirrors the lower triangle,
    // dA = (dQ + Q copyltu(M)) R^{-T}.
    const Eigen::MatrixXd M = -dQ.transpose() * qr.Q;
    Eigen::MatrixXd C = M.triangularView<Eigen::Lower>();
    C.triangularView<Eigen::StrictlyUpper>() = M.transpose().triangularView<Eigen::StrictlyUpper>();
    const Eigen::MatrixXd lhs = dQ + qr.Q * C;
    // Solve X R^T = lhs, i.e. R X^T = lhs^T.
    return qr.R.triangularView<Eigen::Upper>().solve(lhs.transpose()).transpose();
}

bool das_converged(const std::vector<double>& trace, double final_orth_residual) {
    if (!(final_orth_residual < kOrthTol)) return false;
    if (trace.size() < 50) return false;
    const auto end = trace.end();
    const double recent = std::accumulate(end - 25, end, 0.0) / 25.0;
    const double before = std::accumulate(end - 50, end - 25, 0.0) / 25.0;
    return recent <= before + 1e-9;
}

namespace {

double full_objective(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                      const Subspace& u) {
    return -evaluate_hooked(model, X, labels, u).mean_nll();
}

} // namespace

DasFitResult das_fit(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                     const DasConfig& cfg) {
    const int d = model.d();
    if (X.cols() != d) throw ValidationError("activation width does not match model d");
    if (cfg.k < 0 || cfg.k > d) throw ValidationError("DAS rank must satisfy 0 <= k <= d");
    if (cfg.steps < 0 || cfg.batch_size < 1) throw ValidationError("bad DAS schedule");
    if (X.rows() < 1) throw ValidationError("DAS needs prompts");
    if (static_cast<Eigen::Index>(labels.size()) != X.rows()) throw ValidationError("label count does not match rows");

    DasFitResult out;
    out.seed = cfg.seed;
    if (cfg.k == 0) {
        out.subspace = Subspace::empty(d);
        out.converged = true;
        out.final_objective = full_objective(model, X, labels, out.subspace);
        return out;
    }

    Rng init_rng = Rng::substream(cfg.seed, 0);
    Rng batch_rng = Rng::substream(cfg.seed, 1);
    Eigen::MatrixXd V(d, cfg.k);
    for (int j = 0; j < cfg.k; ++j)
        for (int i = 0; i < d; ++i) V(i, j) = init_rng.normal();
    V = thin_qr(V).Q;

    Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(d, cfg.k), m2 = Eigen::MatrixXd::Zero(d, cfg.k);
    Eigen::MatrixXd xb(cfg.batch_size, d);
    std::vector<int> yb(static_cast<std::size_t>(cfg.batch_size));
    out.nll_trace.reserve(static_cast<std::size_t>(cfg.steps));
    out.orth_residual_trace.reserve(static_cast<std::size_t>(cfg.steps));

    for (int step = 0; step < cfg.steps; ++step) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto i = static_cast<Eigen::Index>(batch_rng.below(static_cast<std::uint64_t>(X.rows())));
            xb.row(b) = X.row(i);
            yb[static_cast<std::size_t>(b)] = labels[static_cast<std::size_t>(i)];
        }
        const ThinQR qr = thin_qr(V);
        const Eigen::MatrixXd U = qr.Q.transpose();  // k x d
        const Eigen::MatrixXd coords = xb * qr.Q;    // B x k
        const Eigen::MatrixXd xa = xb - coords * U;
        const Evaluation ev = model.evaluate(xa, yb);
        const double objective = -ev.mean_nll();
        if (!std::isfinite(objective)) throw NumericalError("DAS: non-finite loss at step " + std::to_string(step));

        // d(-mean NLL)/dU = mean_i [(U x_i) g_i^T + (U g_i) x_i^T], g_i = dNLL/dx'.
        const Eigen::MatrixXd g = model.gradient(xa, yb);  // B x d
        const Eigen::MatrixXd dU = (coords.transpose() * g + (g * qr.Q).transpose() * xb) / cfg.batch_size;
        Eigen::MatrixXd grad = qr_backward(qr, dU.transpose());
        if (cfg.weight_decay > 0) grad += cfg.weight_decay * V;
        if (cfg.clip_norm > 0) {
            const double nrm = grad.norm();
            if (nrm > cfg.clip_norm) grad *= cfg.clip_norm / nrm;
        }
        if (!grad.allFinite()) throw NumericalError("DAS: non-finite gradient at step " + std::to_string(step));

        m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * grad;
        m2 = cfg.beta2 * m2 + (1 - cfg.beta2) * grad.cwiseProduct(grad);
        const double c1 = 1 - std::pow(cfg.beta1, step + 1), c2 = 1 - std::pow(cfg.beta2, step + 1);
        V -= cfg.lr * ((m1 / c1).array() / ((m2 / c2).array().sqrt() + cfg.adam_eps)).matrix();

        out.nll_trace.push_back(objective);
        out.orth_residual_trace.push_back(orth_residual(thin_qr(V).Q.transpose()));
    }

    out.subspace = Subspace(thin_qr(V).Q.transpose());
    out.steps = cfg.steps;
    out.final_objective = full_objective(model, X, labels, out.subspace);
    out.converged = das_converged(out.nll_trace, out.subspace.orth_residual());
    return out;
}

DasFitResult das_fit_best(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                          DasConfig cfg, const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ValidationError("need at least one seed");
    std::vector<DasFitResult> runs(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        DasConfig c = cfg;
        c.seed = seeds[i];
        runs[i] = das_fit(model, X, labels, c);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (runs[i].final_objective < runs[best].final_objective) best = i;
    return std::move(runs[best]);
}

void DasFitResult::save(ActivationCache& cache, const std::string& role) const {
    cache.put(subspace.to_record(role));
    Eigen::VectorXd nll = Eigen::Map<const Eigen::VectorXd>(nll_trace.data(), static_cast<Eigen::Index>(nll_trace.size()));
    Eigen::VectorXd orth = Eigen::Map<const Eigen::VectorXd>(orth_residual_trace.data(),
                                                             static_cast<Eigen::Index>(orth_residual_trace.size()));
    if (nll.size() > 0) {
        cache.put(TensorRecord::from_vector(role + ".nll_trace", nll));
        cache.put(TensorRecord::from_vector(role + ".orth_residual_trace", orth));
    }
    cache.meta()[role] = {{"k", subspace.k()}, {"d", subspace.d()}, {"role", role}, {"seed", seed}, {"steps", steps},
                          {"converged", converged}, {"final_objective", final_objective}};
}

GradientSubspace gradient_subspace(const Eigen::MatrixXd& G, int k) {
    if (G.rows() < k) throw ValidationError("gradient_subspace needs n >= k");
    if (G.cwiseAbs().maxCoeff() == 0.0) throw ValidationError("all-zero gradients");
    const Eigen::MatrixXd Gc = G.rowwise() - G.colwise().mean();
    auto frame = top_right_singular(Gc, k);
    GradientSubspace out{std::move(frame.frame), frame.singular_values, 0.0};
    const Eigen::ArrayXd s2 = out.singular_values.array().square();
    const double denom = s2.square().sum();
    out.participation_ratio = denom > 0 ? s2.sum() * s2.sum() / denom : 0.0;
    return out;
}

GradientSubspace gradient_subspace(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                   int k) {
    return gradient_subspace(model.gradient(X, labels), k);
}

std::vector<double> subspace_cca(const Subspace& a, const Subspace& b) {
    const PrincipalAngleSet pa = principal_angles(a, b);
    std::vector<double> out;
    for (double t : pa.angles) out.push_back(std::cos(t));
    return out;
}

PerturbationCurve perturbation_response(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                        const Subspace& u, const std::vector<double>& eps, std::uint64_t seed) {
    if (u.k() < 1 || u.k() >= u.d()) throw ValidationError("perturbation_response needs 1 <= k < d");
    if (X.cols() != u.d()) throw ValidationError("dimension mismatch in perturbation_response");
    for (double e : eps)
        if (!std::isfinite(e)) throw ValidationError("epsilons must be finite");
    const Eigen::Index n = X.rows(), d = X.cols();
    Eigen::MatrixXd Vin(n, d), Vout(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
        Eigen::VectorXd g(u.k());
        for (int j = 0; j < u.k(); ++j) g(j) = rng.normal();
        Vin.row(i) = (u.basis().transpose() * g).normalized().transpose();
        Eigen::VectorXd h(d);
        for (Eigen::Index j = 0; j < d; ++j) h(j) = rng.normal();
        Vout.row(i) = ablate(h, u).normalized().transpose();
    }
    const Eigen::VectorXd base = model.evaluate(X, labels).nll;
    PerturbationCurve out;
    out.eps = eps;
    for (double e : eps) {
        const Eigen::VectorXd a = model.evaluate(X + e * Vin, labels).nll;
        const Eigen::VectorXd b = model.evaluate(X + e * Vout, labels).nll;
        out.in_subspace.push_back((a - base).cwiseAbs().mean());
        out.orthogonal.push_back((b - base).cwiseAbs().mean());
    }
    return out;
}

double slope_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
    }
    if (sxx == 0) throw ValidationError("slope needs a nonzero abscissa");
    return sxy / sxx;
}

} // namespace msc
