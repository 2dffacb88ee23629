#pragma once

#include "msc/probes.hpp"
#include "msc/subspace.hpp"
#include "msc/task_model.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace msc {

// Two-component injection parameters. The probe complement must be orthogonal
// to the mediator (largest principal cosine <= 1e-6); the constructor checks.
class AdversarialSpec {
public:
    AdversarialSpec(double alpha, double beta, int src_doy, int tgt_doy, Subspace mediator, Subspace probe_complement);

    double alpha, beta;
    int src_doy, tgt_doy;
    const Subspace& mediator() const { return mediator_; }
    const Subspace& probe_complement() const { return complement_; }

private:
    Subspace mediator_;
    Subspace complement_;
};

// x + alpha U_M^T U_M (mu_src - mu_tgt) + beta P^T (y_src - yhat(x)), with P the
// probe complement and yhat the probe's sin/cos output on x.
Eigen::VectorXd adversarial_inject(const Eigen::VectorXd& x, const AdversarialSpec& spec, const Eigen::MatrixXd& means,
                                   const CircularProbe& probe);

// Day whose mean is closest to x in mediator coordinates.
int mediator_nearest_day(const Eigen::VectorXd& x, const Subspace& mediator, const Eigen::MatrixXd& means);

struct AdversarialResult {
    double alpha = 0.0, beta = 0.0;
    double mediator_shift_days = 0.0;  // mean NN displacement
    double probe_rmse_days = 0.0;      // circular error of the probe against the source day
};

// Injects every row of X with its own day as the source and day + shift_days
// as the target, over the alpha x beta grid.
std::vector<AdversarialResult> adversarial_sweep(const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                                 const Eigen::MatrixXd& means, const Subspace& mediator,
                                                 const Subspace& probe_complement, const CircularProbe& probe,
                                                 const std::vector<double>& alphas, const std::vector<double>& betas,
                                                 int shift_days = 182);

struct MIEstimate {
    double mi_nats = 0.0;
    int k_neighbors = 5;
    int n = 0;
    double p_phase_shuffle = 1.0;
    bool constant_input = false;  // MI undefined, reported as 0
};

// Kraskov estimator (variant 1) with max-norm neighbourhoods.
MIEstimate ksg_mutual_information(const std::vector<double>& a, const std::vector<double>& b, int k = 5);

// Surrogate of x with its amplitude spectrum and uniformly random phases.
std::vector<double> phase_randomized(const std::vector<double>& x, std::uint64_t seed);

// Add-one-smoothed share of surrogate MI values >= the observed MI, with
// surrogates of b drawn from substreams (seed, j).
double phase_shuffle_pvalue(const std::vector<double>& a, const std::vector<double>& b, int n_shuffles = 200,
                            std::uint64_t seed = 0, int k = 5);

struct LogisticFit {
    Eigen::VectorXd w;
    double b = 0.0;
    int iterations = 0;

    Eigen::VectorXd decision(const Eigen::MatrixXd& X) const;
};

// L2-penalized logistic regression (intercept unpenalized) by Newton steps
// until the largest update is below tol.
LogisticFit logistic_fit(const Eigen::MatrixXd& X, const std::vector<int>& y, double lambda = 1.0,
                         int max_iter = 100, double tol = 1e-8);

struct MockMonitor {
    LogisticFit fit;
    double cv_accuracy = 0.0;
    Subspace direction;  // rank-1 frame of the weights

    double angle_to_deg(const Subspace& u) const;
};

// Labels prompts confident when their NLL is below the median.
MockMonitor mock_monitor(const Eigen::MatrixXd& X, const Eigen::VectorXd& nll, double lambda = 1.0, int folds = 5);

struct AblationInvisibility {
    double probe_shift_days = 0.0;    // mean circular shift of the probe readout
    double delta_nll = 0.0;           // mean NLL increase, NaN without a model
    std::vector<double> random_shifts;
    double random_mean = 0.0, random_sd = 0.0, random_p95 = 0.0;
};

AblationInvisibility ablation_invisibility(const CircularProbe& probe, const Subspace& mediator, const Eigen::MatrixXd& X,
                                           const TaskModel* model, const std::vector<int>& labels, int n_random,
                                           std::uint64_t seed);

struct SafetyConfig {
    double alpha = 3.0;
    double beta = 2.0;
    int shift_days = 182;
    int ksg_k = 5;
    int n_shuffles = 200;
    int n_random = 25;
    double monitor_lambda = 1.0;
    std::uint64_t seed = 0;
};

struct SafetyRow {
    std::string experiment;
    std::string metric;
    std::string result;
    std::string verdict;
};

struct SafetyReport {
    AdversarialResult adversarial;
    MIEstimate energy_mi;
    double monitor_cv_accuracy = 0.0;
    double monitor_angle_deg = 0.0;
    AblationInvisibility invisibility;
    std::vector<SafetyRow> rows;

    nlohmann::json to_json() const;
};

// Adversarial injection, probe-vs-mediator energy MI, confidence monitor and
// ablation invisibility, with a summary row for each.
SafetyReport run_safety_battery(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                const std::vector<int>& labels, const Eigen::MatrixXd& means, const Subspace& mediator,
                                const CircularProbeFit& probe, const SafetyConfig& cfg);

} // namespace msc
