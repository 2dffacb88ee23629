#include "msc/erasure.hpp"

#include "msc/error.hpp"
#include "msc/null_calibration.hpp"
#include "msc/probes.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace msc {

Eigen::MatrixXd one_hot(const std::vector<int>& labels) {
    std::map<int, Eigen::Index> col;
    for (int y : labels) col.emplace(y, 0);
    Eigen::Index c = 0;
    for (auto& [y, j] : col) j = c++;
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), c);
    for (std::size_t i = 0; i < labels.size(); ++i) Y(static_cast<Eigen::Index>(i), col[labels[i]]) = 1.0;
    return Y;
}

BaselineBasis pca_basis(const Eigen::MatrixXd& X, int k) {
    if (X.rows() <= k) throw ValidationError("pca_basis needs n > k");
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    auto f = top_right_singular(Xc, k);
    const auto& s = f.singular_values;
    if (k > 0 && !(s(k - 1) > 1e-10 * s(0))) throw ValidationError("pca_basis: data rank below k");
    BaselineBasis out{"pca", std::move(f.frame), {}};
    out.target_meta["explained_variance"] = std::vector<double>(s.data(), s.data() + k);
    return out;
}

namespace {

struct InlpState {
    Eigen::MatrixXd cur;
    Eigen::MatrixXd dirs;
    std::vector<double> norms;
};

void inlp_step(InlpState& st, const Eigen::MatrixXd& Y, double ridge_alpha) {
    const RidgeFit fit = ridge_fit(st.cur, Y, ridge_alpha);
    const double scale = fit.W.norm();
    if (!(scale > 1e-12))
        throw NumericalError("INLP probe is degenerate at iteration " + std::to_string(st.dirs.rows()));
    Eigen::RowVectorXd v = top_right_singular(fit.W, 1).frame.basis().row(0);
    // Keep the new direction exactly orthogonal to the ones collected.
    if (st.dirs.rows() > 0) v -= (v * st.dirs.transpose()) * st.dirs;
    v.normalize();
    st.dirs.conservativeResize(st.dirs.rows() + 1, Eigen::NoChange);
    st.dirs.row(st.dirs.rows() - 1) = v;
    st.cur -= (st.cur * v.transpose()) * v;
    st.norms.push_back(scale);
}

BaselineBasis inlp_result(const InlpState& st) {
    BaselineBasis out{"inlp", orthonormalize(st.dirs), {}};
    out.target_meta["probe_weight_norms"] = st.norms;
    return out;
}

} // namespace

BaselineBasis inlp_basis(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int k, double ridge_alpha) {
    if (k < 1 || k > X.cols()) throw ValidationError("inlp_basis needs 1 <= k <= d");
    if (Y.rows() != X.rows()) throw ValidationError("target rows do not match activations");
    InlpState st{X, Eigen::MatrixXd(0, X.cols()), {}};
    for (int it = 0; it < k; ++it) inlp_step(st, Y, ridge_alpha);
    return inlp_result(st);
}

double cv_ridge_r2(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<int>& fold, double ridge_alpha) {
    if (static_cast<Eigen::Index>(fold.size()) != X.rows() || Y.rows() != X.rows())
        throw ValidationError("fold, target and activation rows must agree");
    const int folds = fold.empty() ? 0 : *std::max_element(fold.begin(), fold.end()) + 1;
    if (folds < 2) throw ValidationError("need at least 2 folds");
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
        if (te.empty()) throw ValidationError("empty CV fold " + std::to_string(f));
        const RidgeFit fit = ridge_fit(X(tr, Eigen::all), Y(tr, Eigen::all), ridge_alpha);
        total += r2_score(Y(te, Eigen::all), fit.predict(X(te, Eigen::all)));
    }
    return total / folds;
}

InlpRun inlp_until_chance(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<int>& fold,
                          double r2_target, int max_iter, double ridge_alpha) {
    if (Y.rows() != X.rows()) throw ValidationError("target rows do not match activations");
    const int cap = max_iter > 0 ? std::min<int>(max_iter, static_cast<int>(X.cols()) - 1) : static_cast<int>(X.cols()) - 1;
    InlpState st{X, Eigen::MatrixXd(0, X.cols()), {}};
    InlpRun run;
    run.heldout_r2.push_back(cv_ridge_r2(st.cur, Y, fold, ridge_alpha));
    while (run.heldout_r2.back() >= r2_target && st.dirs.rows() < cap) {
        inlp_step(st, Y, ridge_alpha);
        run.heldout_r2.push_back(cv_ridge_r2(st.cur, Y, fold, ridge_alpha));
    }
    run.reached_target = run.heldout_r2.back() < r2_target;
    if (st.dirs.rows() == 0) throw ValidationError("targets are already unpredictable; nothing to erase");
    run.basis = inlp_result(st);
    run.basis.target_meta["heldout_r2"] = run.heldout_r2;
    return run;
}

BaselineBasis mean_projection_basis(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k) {
    if (static_cast<Eigen::Index>(labels.size()) != X.rows()) throw ValidationError("label count does not match rows");
    std::map<int, std::vector<Eigen::Index>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
    if (groups.size() < 2) throw ValidationError("mean_projection_basis needs at least 2 classes");
    if (k < 1 || k > static_cast<int>(groups.size()) - 1)
        throw ValidationError("mean_projection_basis needs 1 <= k <= classes - 1");
    const Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::MatrixXd D(static_cast<Eigen::Index>(groups.size()), X.cols());
    Eigen::Index r = 0;
    for (const auto& [c, idx] : groups) {
        Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(X.cols());
        for (auto i : idx) m += X.row(i);
        m /= static_cast<double>(idx.size());
        D.row(r++) = std::sqrt(static_cast<double>(idx.size())) * (m - mu);
    }
    auto f = top_right_singular(D, k);
    const auto& s = f.singular_values;
    const double scale = std::sqrt(static_cast<double>(X.rows())) * (X.rowwise() - mu).cwiseAbs().maxCoeff();
    if (!(s(0) > 1e-12 * std::max(scale, 1e-300))) throw ValidationError("class means are equal (zero between-class variance)");
    if (!(s(k - 1) > 1e-10 * s(0))) throw ValidationError("between-class scatter has rank below k");
    BaselineBasis out{"mean_projection", std::move(f.frame), {}};
    std::vector<double> var;
    for (int i = 0; i < k; ++i) var.push_back(s(i) * s(i) / static_cast<double>(X.rows()));
    out.target_meta["between_class_variance"] = var;
    return out;
}

Eigen::MatrixXd LeaceFit::erase(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd Xc = X.rowwise() - mean.transpose();
    // (W^{-1} P W x)^T = x^T W P^T W^{-1} with symmetric W, P = F^T F.
    const Eigen::MatrixXd proj = ((Xc * W) * P_frame.transpose()) * P_frame * W_inv;
    return X - proj;
}

LeaceFit leace_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int k) {
    if (Y.rows() != X.rows()) throw ValidationError("target rows do not match activations");
    if (k < 1) throw ValidationError("leace needs k >= 1");
    const Eigen::Index n = X.rows();
    const WhiteningTransform wt = whiten(X);
    const Eigen::MatrixXd Xc = X.rowwise() - wt.mean.transpose();
    const Eigen::MatrixXd Yc = Y.rowwise() - Y.colwise().mean();
    const Eigen::MatrixXd cross = wt.W * (Xc.transpose() * Yc) / static_cast<double>(n - 1);  // d x m

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || !(s(0) > 0)) throw ValidationError("leace: zero cross-covariance");
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > 1e-10 * s(0)) ++rank;
    if (k > rank) throw ValidationError("leace: k exceeds the rank of the cross-covariance");

    LeaceFit out;
    out.W = wt.W;
    out.W_inv = wt.W_inv;
    out.mean = wt.mean;
    Eigen::MatrixXd F = svd.matrixU().leftCols(k).transpose();
    for (int i = 0; i < k; ++i) {
        Eigen::Index j;
        F.row(i).cwiseAbs().maxCoeff(&j);
        if (F(i, j) < 0) F.row(i) *= -1.0;
    }
    out.P_frame = F;

    // Correlation-scale signal: whitened cross-covariance over target SD. Under
    // independence it is O(1/sqrt(n)) per entry.
    const Eigen::VectorXd ysd = (Yc.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
    double corr = 0.0;
    for (Eigen::Index j = 0; j < cross.cols(); ++j)
        if (ysd(j) > 0) corr = std::max(corr, cross.col(j).norm() / ysd(j));
    const double noise_level = std::sqrt(static_cast<double>(X.cols()) / static_cast<double>(n));
    out.weak_signal = corr < 2.0 * noise_level;

    out.basis = BaselineBasis{"leace", orthonormalize(F * wt.W_inv), {}};
    out.basis.target_meta["singular_values"] = std::vector<double>(s.data(), s.data() + rank);
    out.basis.target_meta["weak_signal"] = out.weak_signal;
    return out;
}

BaselineBasis leace_basis(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int k) { return leace_fit(X, Y, k).basis; }

} // namespace msc
