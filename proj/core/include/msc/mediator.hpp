#pragma once

#include "msc/subspace.hpp"
#include "msc/task_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace msc {

class ActivationCache;

struct DasConfig {
    int k = 4;
    int steps = 400;
    double lr = 1e-3;
    int batch_size = 8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    double clip_norm = 0.0;  // 0 disables gradient clipping
    std::uint64_t seed = 0;
};

struct DasFitResult {
    Subspace subspace;
    std::vector<double> nll_trace;  // per-step objective: -(mean ablated NLL) on the minibatch
    std::vector<double> orth_residual_trace;
    std::uint64_t seed = 0;
    int steps = 0;
    bool converged = false;
    double final_objective = 0.0;   // -(mean ablated NLL) on all prompts

    void save(ActivationCache& cache, const std::string& role = "das") const;
};

// Thin QR with positive R diagonal.
struct ThinQR {
    Eigen::MatrixXd Q;  // m x k
    Eigen::MatrixXd R;  // k x k
};
ThinQR thin_qr(const Eigen::MatrixXd& A);

// Reverse-mode derivative of A -> Q (thin, R diagonal positive) given dL/dQ.
Eigen::MatrixXd qr_backward(const ThinQR& qr, const Eigen::MatrixXd& dQ);

// Trains U = first k columns of QR(V)^T to maximize the mean NLL of the
// hooked model, with Adam on V. Deterministic in cfg.seed.
DasFitResult das_fit(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                     const DasConfig& cfg);

// Independent fits per seed (run in parallel); returns the run with the lowest
// final objective.
DasFitResult das_fit_best(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                          DasConfig cfg, const std::vector<std::uint64_t>& seeds);

bool das_converged(const std::vector<double>& trace, double final_orth_residual);

struct GradientSubspace {
    Subspace frame;
    Eigen::VectorXd singular_values;
    double participation_ratio = 0.0;  // (sum s^2)^2 / sum s^4
};

// Column-centered SVD of stacked per-prompt gradients.
GradientSubspace gradient_subspace(const Eigen::MatrixXd& G, int k);
GradientSubspace gradient_subspace(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                   int k);

// Canonical correlations between frames: cosines of the principal angles,
// descending.
std::vector<double> subspace_cca(const Subspace& a, const Subspace& b);

struct PerturbationCurve {
    std::vector<double> eps;
    std::vector<double> in_subspace;  // mean |dNLL| for unit v in row(u)
    std::vector<double> orthogonal;   // mean |dNLL| for unit v orthogonal to row(u)
};

// One random direction of each kind per prompt, from substream (seed, i).
PerturbationCurve perturbation_response(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                        const Subspace& u, const std::vector<double>& eps, std::uint64_t seed);

// Least-squares slope of y on x through the origin.
double slope_through_origin(const std::vector<double>& x, const std::vector<double>& y);

} // namespace msc
