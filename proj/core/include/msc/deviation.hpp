#pragma once

#include "msc/subspace.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace msc {

struct ReferenceManifold {
    Subspace basis;
    Eigen::VectorXd center;
    int k = 0;
};

// Top-k right singular frame of the row-centered per-day means.
ReferenceManifold reference_basis(const Eigen::MatrixXd& means, int k);

struct DeviationScore {
    double delta = 0.0;              // max over positions
    std::vector<double> per_position;
};

// Residual fraction ||r|| / ||h|| of each listed row after projection onto the
// basis. With centered = true, h is the row minus the manifold center;
// otherwise the raw row is projected.
DeviationScore manifold_deviation(const Eigen::MatrixXd& acts, const std::vector<int>& positions,
                                  const ReferenceManifold& m, bool centered = true);

// One score per query. acts holds n_queries * positions_per_query rows;
// positions is n_queries x p of within-query indices.
std::vector<double> score_queries(const Eigen::MatrixXd& acts, int positions_per_query,
                                  const std::vector<std::vector<int>>& positions, const ReferenceManifold& m,
                                  bool centered = true);

struct ReliabilityBin {
    int count = 0;
    double mean_score = 0.0;
    double positive_rate = 0.0;
};

struct NetBenefitPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double net_benefit = 0.0;
};

struct CalibrationReport {
    int n = 0;
    int positives = 0;
    double prevalence = 0.0;
    double auroc = 0.0;
    double auprc = 0.0;
    double auprc_skill = 0.0;
    double ece = 0.0;
    std::vector<ReliabilityBin> bins;
    double youden_threshold = 0.0;
    double youden_tpr = 0.0;
    double youden_fpr = 0.0;
    std::vector<NetBenefitPoint> net_benefit;

    nlohmann::json to_json() const;
};

// Rank AUROC with tie-averaged ranks.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);
// Average precision over distinct thresholds (step-wise, tied scores grouped).
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// Rates at "score >= threshold".
NetBenefitPoint rates_at(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);

// Labels are 0/1. The NB grid defaults to 0.05, 0.10, ..., 0.95.
CalibrationReport calibration_report(const std::vector<double>& scores, const std::vector<int>& labels, int n_bins = 10,
                                     std::vector<double> nb_thresholds = {});

} // namespace msc
