#pragma once

#include "msc/subspace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace msc {

// Closed-form ridge on centered data: W = (Xc^T Xc + alpha I)^{-1} Xc^T Yc,
// bias = mean(Y) - W mean(X). Weights are rows (outputs x d).
struct RidgeFit {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;
};
RidgeFit ridge_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha);

// Fold index per sample: within each stratum, samples sorted by (label, index)
// are dealt round-robin over folds.
std::vector<int> stratified_folds(const std::vector<int>& strata, const std::vector<int>& sort_key, int folds);

// Held-out R^2 per output column, averaged over columns.
double r2_score(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat);

// sin/cos targets at harmonics 1..h: columns sin(2 pi m d / 365), cos(...).
Eigen::MatrixXd circular_targets(const std::vector<int>& doy, int harmonics = 1);

struct SplitSpec {
    int folds = 5;
    std::string stratify = "month";
};

struct CircularProbe {
    RidgeFit fit;  // 2h x d rows: sin, cos per harmonic
    double ridge_alpha = 1.0;
    int harmonics = 1;

    // First-harmonic readout mapped to a day in (0, 365].
    double predict_doy(const Eigen::VectorXd& x) const;
    std::vector<double> predict_doy(const Eigen::MatrixXd& X) const;
};

struct CircularProbeFit {
    CircularProbe probe;
    double cv_r2 = 0.0;
    Subspace subspace;
    Eigen::VectorXd singular_values;
    SplitSpec split;
};

// CV folds stratified by calendar month, then a refit on all rows. The probe
// subspace is the top-k right singular frame of the weights (k = 2h when
// k_extract <= 0). folds = 0 skips cross-validation.
CircularProbeFit fit_circular_probe(const Eigen::MatrixXd& X, const std::vector<int>& doy, double ridge_alpha = 1.0,
                                    int folds = 5, int harmonics = 1, int k_extract = 0);

struct ClassifierProbe {
    RidgeFit fit;  // C x d one-vs-rest
    std::vector<int> classes;

    std::vector<int> predict(const Eigen::MatrixXd& X) const;
};

struct ClassifierProbeFit {
    ClassifierProbe probe;
    double balanced_accuracy = 0.0;
    Subspace subspace;
    SplitSpec split;
};

ClassifierProbeFit fit_classifier_probe(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k_extract,
                                        double ridge_alpha = 1.0, int folds = 5);

double balanced_accuracy(const std::vector<int>& truth, const std::vector<int>& pred);

struct BootstrapAngleCI {
    double mean = 0.0;  // degrees
    double sd = 0.0;
    double lo = 0.0;    // 2.5 percentile
    double hi = 0.0;    // 97.5 percentile
    std::vector<double> draws;
};

// Resamples rows with replacement (redrawing resamples that empty a month),
// refits the circular probe and measures mean angle to the reference.
BootstrapAngleCI bootstrap_angle_ci(const Eigen::MatrixXd& X, const std::vector<int>& doy, const Subspace& reference,
                                    int B, std::uint64_t seed, double ridge_alpha = 1.0, int harmonics = 1);

} // namespace msc
