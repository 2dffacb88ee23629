#include "msc/probes.hpp"

#include "msc/error.hpp"
#include "msc/parallel.hpp"
#include "msc/rng.hpp"
#include "msc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace msc {

Eigen::MatrixXd RidgeFit::predict(const Eigen::MatrixXd& X) const {
    return (X * W.transpose()).rowwise() + b.transpose();
}

RidgeFit ridge_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha) {
    if (X.rows() != Y.rows()) throw ValidationError("ridge: row count mismatch");
    if (X.rows() < 2) throw ValidationError("ridge needs at least 2 rows");
    if (!(alpha > 0)) throw ValidationError("ridge alpha must be positive");
    const Eigen::RowVectorXd mx = X.colwise().mean();
    const Eigen::RowVectorXd my = Y.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - mx;
    const Eigen::MatrixXd Yc = Y.rowwise() - my;
    Eigen::MatrixXd G = Xc.transpose() * Xc;
    G.diagonal().array() += alpha;
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge normal equations are not positive definite");
    RidgeFit fit;
    fit.W = llt.solve(Xc.transpose() * Yc).transpose();
    fit.b = my.transpose() - fit.W * mx.transpose();
    if (!fit.W.allFinite()) throw NumericalError("ridge produced non-finite weights");
    return fit;
}

std::vector<int> stratified_folds(const std::vector<int>& strata, const std::vector<int>& sort_key, int folds) {
    if (folds < 2) throw ValidationError("need at least 2 folds");
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
    std::vector<int> fold(strata.size(), 0);
    for (auto& [s, idx] : groups) {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return sort_key[a] < sort_key[b]; });
        for (std::size_t r = 0; r < idx.size(); ++r) fold[idx[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
    }
    return fold;
}

double r2_score(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < Y.cols(); ++c) {
        const double m = Y.col(c).mean();
        const double ss_tot = (Y.col(c).array() - m).square().sum();
        const double ss_res = (Y.col(c) - Yhat.col(c)).squaredNorm();
        total += ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
    }
    return total / static_cast<double>(Y.cols());
}

Eigen::MatrixXd circular_targets(const std::vector<int>& doy, int harmonics) {
    if (harmonics < 1) throw ValidationError("harmonics must be >= 1");
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(doy.size()), 2 * harmonics);
    for (std::size_t i = 0; i < doy.size(); ++i)
        for (int m = 1; m <= harmonics; ++m) {
            const double a = 2.0 * std::numbers::pi * m * doy[i] / 365.0;
            Y(static_cast<Eigen::Index>(i), 2 * (m - 1)) = std::sin(a);
            Y(static_cast<Eigen::Index>(i), 2 * (m - 1) + 1) = std::cos(a);
        }
    return Y;
}

double CircularProbe::predict_doy(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd y = fit.W.topRows(2) * x + fit.b.head(2);
    double v = std::atan2(y(0), y(1)) * 365.0 / (2.0 * std::numbers::pi);
    v = std::fmod(v, 365.0);
    if (v <= 0) v += 365.0;
    return v;
}

std::vector<double> CircularProbe::predict_doy(const Eigen::MatrixXd& X) const {
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_doy(Eigen::VectorXd(X.row(i).transpose()));
    return out;
}

namespace {

template <class Idx>
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& M, const Idx& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), M.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

void check_months(const std::vector<int>& doy) {
    std::vector<int> per(13, 0);
    for (int d : doy) ++per[static_cast<std::size_t>(month_of_doy(d))];
    for (int m = 1; m <= 12; ++m)
        if (per[static_cast<std::size_t>(m)] < 2) throw ValidationError("month stratum " + std::to_string(m) + " has fewer than 2 samples");
}

} // namespace

CircularProbeFit fit_circular_probe(const Eigen::MatrixXd& X, const std::vector<int>& doy, double ridge_alpha,
                                    int folds, int harmonics, int k_extract) {
    if (static_cast<Eigen::Index>(doy.size()) != X.rows()) throw ValidationError("doy count does not match rows");
    check_months(doy);
    const Eigen::MatrixXd Y = circular_targets(doy, harmonics);

    CircularProbeFit out;
    out.split.folds = folds;
    if (folds > 0) {
        std::vector<int> months(doy.size());
        for (std::size_t i = 0; i < doy.size(); ++i) months[i] = month_of_doy(doy[i]);
        const auto fold = stratified_folds(months, doy, folds);
        std::vector<double> scores(static_cast<std::size_t>(folds));
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> tr, te;
            for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
            const RidgeFit fit = ridge_fit(take_rows(X, tr), take_rows(Y, tr), ridge_alpha);
            scores[static_cast<std::size_t>(f)] = r2_score(take_rows(Y, te), fit.predict(take_rows(X, te)));
        }
        out.cv_r2 = mean(scores);
    }

    out.probe.fit = ridge_fit(X, Y, ridge_alpha);
    out.probe.ridge_alpha = ridge_alpha;
    out.probe.harmonics = harmonics;
    const int k = k_extract > 0 ? k_extract : 2 * harmonics;
    auto frame = top_right_singular(out.probe.fit.W, k);
    out.subspace = std::move(frame.frame);
    out.singular_values = std::move(frame.singular_values);
    return out;
}

std::vector<int> ClassifierProbe::predict(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd S = fit.predict(X);
    std::vector<int> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < S.rows(); ++i) out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(argmax(S.row(i).transpose()))];
    return out;
}

double balanced_accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    std::map<int, std::pair<int, int>> per;  // class -> (hits, total)
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& p = per[truth[i]];
        p.first += truth[i] == pred[i];
        ++p.second;
    }
    if (per.empty()) throw ValidationError("balanced accuracy of empty sample");
    double total = 0.0;
    for (const auto& [c, p] : per) total += static_cast<double>(p.first) / p.second;
    return total / static_cast<double>(per.size());
}

namespace {

ClassifierProbe fit_classifier(const Eigen::MatrixXd& X, const std::vector<int>& labels, const std::vector<int>& classes,
                               double alpha) {
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(X.rows(), static_cast<Eigen::Index>(classes.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), labels[i]);
        Y(static_cast<Eigen::Index>(i), it - classes.begin()) = 1.0;
    }
    return {ridge_fit(X, Y, alpha), classes};
}

} // namespace

ClassifierProbeFit fit_classifier_probe(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k_extract,
                                        double ridge_alpha, int folds) {
    if (static_cast<Eigen::Index>(labels.size()) != X.rows()) throw ValidationError("label count does not match rows");
    std::map<int, int> counts;
    for (int y : labels) ++counts[y];
    if (counts.size() < 2) throw ValidationError("classifier probe needs at least 2 classes");
    for (const auto& [c, n] : counts)
        if (n < 2) throw ValidationError("class " + std::to_string(c) + " has fewer than 2 samples");
    std::vector<int> classes;
    for (const auto& [c, n] : counts) classes.push_back(c);

    ClassifierProbeFit out;
    out.split.folds = folds;
    out.split.stratify = "label";
    if (folds > 0) {
        const auto fold = stratified_folds(labels, labels, folds);
        std::vector<int> pred(labels.size());
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> tr, te;
            for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
            if (te.empty()) continue;
            std::vector<int> ytr;
            for (auto i : tr) ytr.push_back(labels[i]);
            const ClassifierProbe p = fit_classifier(take_rows(X, tr), ytr, classes, ridge_alpha);
            const auto pr = p.predict(take_rows(X, te));
            for (std::size_t j = 0; j < te.size(); ++j) pred[te[j]] = pr[j];
        }
        out.balanced_accuracy = balanced_accuracy(labels, pred);
    }
    out.probe = fit_classifier(X, labels, classes, ridge_alpha);
    const int k = std::min<int>(k_extract, static_cast<int>(classes.size()));
    if (k < 1) throw ValidationError("k_extract must be >= 1");
    out.subspace = top_right_singular(out.probe.fit.W, k).frame;
    return out;
}

BootstrapAngleCI bootstrap_angle_ci(const Eigen::MatrixXd& X, const std::vector<int>& doy, const Subspace& reference,
                                    int B, std::uint64_t seed, double ridge_alpha, int harmonics) {
    if (B < 100) throw ValidationError("bootstrap needs B >= 100");
    const std::size_t n = doy.size();
    BootstrapAngleCI out;
    out.draws.resize(static_cast<std::size_t>(B));
    parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        Rng rng = Rng::substream(seed, b);
        std::vector<std::size_t> idx(n);
        std::vector<int> rdoy(n);
        for (int attempt = 0;; ++attempt) {
            if (attempt == 100) throw NumericalError("bootstrap could not draw a resample covering every month");
            std::vector<int> per(13, 0);
            for (std::size_t i = 0; i < n; ++i) {
                idx[i] = static_cast<std::size_t>(rng.below(n));
                rdoy[i] = doy[idx[i]];
                ++per[static_cast<std::size_t>(month_of_doy(rdoy[i]))];
            }
            if (std::all_of(per.begin() + 1, per.end(), [](int c) { return c >= 2; })) break;
        }
        const auto fit = fit_circular_probe(take_rows(X, idx), rdoy, ridge_alpha, 0, harmonics);
        out.draws[b] = principal_angles(fit.subspace, reference).mean_angle_deg();
    });
    out.mean = mean(out.draws);
    out.sd = stddev(out.draws);
    out.lo = quantile(out.draws, 0.025);
    out.hi = quantile(out.draws, 0.975);
    return out;
}

} // namespace msc
