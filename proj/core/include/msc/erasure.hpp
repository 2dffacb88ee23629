#pragma once

#include "msc/subspace.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace msc {

struct BaselineBasis {
    std::string method;  // inlp | mean_projection | leace | pca
    Subspace subspace;
    nlohmann::json target_meta = nlohmann::json::object();
};

// One-hot encoding of integer labels (columns in ascending label order).
Eigen::MatrixXd one_hot(const std::vector<int>& labels);

BaselineBasis pca_basis(const Eigen::MatrixXd& X, int k);

// k rounds of: ridge-fit Y on the current data, keep the top right singular
// direction of the weights, project it out of the data.
BaselineBasis inlp_basis(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int k, double ridge_alpha = 1.0);

// INLP iterated until a fresh ridge probe on the erased data scores held-out
// R^2 below r2_target. fold[i] assigns row i to a CV fold. max_iter <= 0
// means d - 1.
struct InlpRun {
    BaselineBasis basis;
    std::vector<double> heldout_r2;  // after 0, 1, ... iterations
    bool reached_target = false;
};
InlpRun inlp_until_chance(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<int>& fold,
                          double r2_target = 0.05, int max_iter = 0, double ridge_alpha = 1.0);

// Held-out R^2 of ridge probes over the given folds, averaged.
double cv_ridge_r2(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<int>& fold, double ridge_alpha);

// Top-k directions of the between-class scatter, ordered by variance.
BaselineBasis mean_projection_basis(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k);

// Closed-form LEACE. The eraser is x -> x - W^{-1} P W (x - mean) with W the
// ridge-floored whitening map and P the projector onto the top-k left singular
// vectors of the whitened cross-covariance.
struct LeaceFit {
    BaselineBasis basis;  // span of W^{-1} P, orthonormalized
    Eigen::MatrixXd W, W_inv;
    Eigen::MatrixXd P_frame;  // k x d in whitened coordinates
    Eigen::VectorXd mean;
    bool weak_signal = false;

    Eigen::MatrixXd erase(const Eigen::MatrixXd& X) const;
};

LeaceFit leace_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int k);
BaselineBasis leace_basis(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int k);

} // namespace msc
