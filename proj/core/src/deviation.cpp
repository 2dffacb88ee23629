#include "msc/deviation.hpp"

#include "msc/error.hpp"
#include "msc/parallel.hpp"
#include "msc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msc {

ReferenceManifold reference_basis(const Eigen::MatrixXd& means, int k) {
    if (k < 1 || k > std::min<Eigen::Index>(means.rows(), means.cols()))
        throw ValidationError("reference basis k must be in [1, min(rows, d)]");
    ReferenceManifold m;
    m.center = means.colwise().mean().transpose();
    const Eigen::MatrixXd centered = means.rowwise() - m.center.transpose();
    m.basis = top_right_singular(centered, k).frame;
    m.k = k;
    return m;
}

DeviationScore manifold_deviation(const Eigen::MatrixXd& acts, const std::vector<int>& positions,
                                  const ReferenceManifold& m, bool centered) {
    if (positions.empty()) throw ValidationError("no date positions");
    if (acts.cols() != m.basis.d()) throw ValidationError("activation width does not match manifold");
    DeviationScore out;
    out.per_position.reserve(positions.size());
    const Eigen::MatrixXd& B = m.basis.basis();
    for (int t : positions) {
        if (t < 0 || t >= acts.rows()) throw ValidationError("date position out of range");
        Eigen::VectorXd h = acts.row(t).transpose();
        if (centered) h -= m.center;
        const double norm = h.norm();
        if (norm == 0.0) throw ValidationError("zero-norm activation at a date position");
        const Eigen::VectorXd r = h - B.transpose() * (B * h);
        out.per_position.push_back(std::clamp(r.norm() / norm, 0.0, 1.0));
    }
    out.delta = *std::max_element(out.per_position.begin(), out.per_position.end());
    return out;
}

std::vector<double> score_queries(const Eigen::MatrixXd& acts, int per_query,
                                  const std::vector<std::vector<int>>& positions, const ReferenceManifold& m,
                                  bool centered) {
    if (per_query < 1 || acts.rows() != per_query * static_cast<Eigen::Index>(positions.size()))
        throw ValidationError("query activations do not match positions");
    std::vector<double> out(positions.size());
    parallel_for(positions.size(), [&](std::size_t q) {
        const Eigen::MatrixXd rows = acts.middleRows(static_cast<Eigen::Index>(q) * per_query, per_query);
        out[q] = manifold_deviation(rows, positions[q], m, centered).delta;
    });
    return out;
}

namespace {

void check_binary(const std::vector<double>& scores, const std::vector<int>& labels, int& pos, int& neg) {
    if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
    pos = 0;
    neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ValidationError("labels must be 0 or 1");
        if (!std::isfinite(scores[i])) throw ValidationError("non-finite score");
        (labels[i] ? pos : neg)++;
    }
    if (pos < 2 || neg < 2) throw ValidationError("need at least 2 positives and 2 negatives");
}

std::vector<std::size_t> order_desc(const std::vector<double>& s) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    return idx;
}

} // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    int pos = 0, neg = 0;
    check_binary(scores, labels, pos, neg);
    const auto ranks = average_ranks(scores);
    double sum = 0.0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (labels[i]) sum += ranks[i];
    const double np = pos, nn = neg;
    return (sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
    int pos = 0, neg = 0;
    check_binary(scores, labels, pos, neg);
    const auto idx = order_desc(scores);
    double ap = 0.0, prev_recall = 0.0;
    int tp = 0, seen = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            tp += labels[idx[j]];
            ++seen;
            ++j;
        }
        const double recall = static_cast<double>(tp) / pos;
        ap += (recall - prev_recall) * static_cast<double>(tp) / seen;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

NetBenefitPoint rates_at(const std::vector<double>& scores, const std::vector<int>& labels, double t) {
    int tp = 0, fp = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        (labels[i] ? pos : neg)++;
        if (scores[i] >= t) (labels[i] ? tp : fp)++;
    }
    NetBenefitPoint p;
    p.threshold = t;
    p.tpr = pos ? static_cast<double>(tp) / pos : 0.0;
    p.fpr = neg ? static_cast<double>(fp) / neg : 0.0;
    p.net_benefit = t < 1.0 ? p.tpr - t / (1.0 - t) * p.fpr : p.tpr;
    return p;
}

CalibrationReport calibration_report(const std::vector<double>& scores, const std::vector<int>& labels, int n_bins,
                                     std::vector<double> nb_thresholds) {
    CalibrationReport r;
    int pos = 0, neg = 0;
    check_binary(scores, labels, pos, neg);
    if (n_bins < 1) throw ValidationError("need at least one reliability bin");
    const std::size_t n = scores.size();
    r.n = static_cast<int>(n);
    r.positives = pos;
    r.prevalence = static_cast<double>(pos) / n;
    r.auroc = auroc(scores, labels);
    r.auprc = auprc(scores, labels);
    r.auprc_skill = (r.auprc - r.prevalence) / (1.0 - r.prevalence);

    // Equal-count bins over ascending scores.
    std::vector<std::size_t> asc(n);
    std::iota(asc.begin(), asc.end(), 0);
    std::stable_sort(asc.begin(), asc.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    for (int b = 0; b < n_bins; ++b) {
        const std::size_t lo = n * b / n_bins, hi = n * (b + 1) / n_bins;
        if (hi == lo) continue;
        ReliabilityBin bin;
        bin.count = static_cast<int>(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
            bin.mean_score += scores[asc[i]];
            bin.positive_rate += labels[asc[i]];
        }
        bin.mean_score /= bin.count;
        bin.positive_rate /= bin.count;
        r.ece += static_cast<double>(bin.count) / n * std::abs(bin.mean_score - bin.positive_rate);
        r.bins.push_back(bin);
    }

    // Youden J over the distinct observed scores; ties keep the higher threshold.
    std::vector<double> distinct(scores);
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    double best = -2.0;
    for (double t : distinct) {
        const auto p = rates_at(scores, labels, t);
        if (p.tpr - p.fpr > best) {
            best = p.tpr - p.fpr;
            r.youden_threshold = t;
            r.youden_tpr = p.tpr;
            r.youden_fpr = p.fpr;
        }
    }

    if (nb_thresholds.empty())
        for (int i = 1; i <= 19; ++i) nb_thresholds.push_back(0.05 * i);
    for (double t : nb_thresholds) {
        if (!(t > 0.0 && t < 1.0)) throw ValidationError("net-benefit thresholds must lie in (0, 1)");
        r.net_benefit.push_back(rates_at(scores, labels, t));
    }
    return r;
}

nlohmann::json CalibrationReport::to_json() const {
    nlohmann::json bins_j = nlohmann::json::array(), nb = nlohmann::json::array();
    for (const auto& b : bins)
        bins_j.push_back({{"count", b.count}, {"mean_score", b.mean_score}, {"positive_rate", b.positive_rate}});
    for (const auto& p : net_benefit)
        nb.push_back({{"threshold", p.threshold}, {"tpr", p.tpr}, {"fpr", p.fpr}, {"net_benefit", p.net_benefit}});
    return {
        {"n", n},
        {"positives", positives},
        {"prevalence", prevalence},
        {"auroc", auroc},
        {"auprc", auprc},
        {"auprc_skill", auprc_skill},
        {"ece", ece},
        {"reliability_bins", bins_j},
        {"youden", {{"threshold", youden_threshold}, {"tpr", youden_tpr}, {"fpr", youden_fpr}}},
        {"net_benefit", nb},
    };
}

} // namespace msc
