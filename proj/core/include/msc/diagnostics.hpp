#pragma once

#include "msc/mediator.hpp"
#include "msc/subspace.hpp"
#include "msc/task_model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msc {

enum class FiellerKind { interval, exterior, unbounded };
const char* fieller_kind_name(FiellerKind k);

// Interval: [lo, hi]. Exterior: (-inf, lo] U [hi, inf). Unbounded: whole line.
struct FiellerInterval {
    FiellerKind kind = FiellerKind::unbounded;
    double lo = 0.0;
    double hi = 0.0;
};

// Ratio a / b with a fixed and b ~ N(b_hat, se^2).
FiellerInterval fieller_interval(double numerator, double denominator, double denominator_se, double z = 1.959963984540054);

struct SpecificityInterval {
    std::optional<double> rho;  // empty when the random mean is zero
    FiellerInterval fieller;
    double delta_add = 0.0;
    double random_mean = 0.0;
    double random_se = 0.0;
};

// Drops in percentage points. Needs at least 5 random drops.
SpecificityInterval specificity_interval(double das_drop, const std::vector<double>& random_drops);
// Same from summary statistics of the random controls.
SpecificityInterval specificity_interval(double das_drop, double random_mean, double random_se);

struct DiagnosticConfig {
    int k = 4;
    int n_null = 25;
    std::uint64_t seed = 0;
    double ridge_alpha = 1.0;
    int folds = 5;
    DasConfig das;               // k and seed are overwritten from the fields above
    int das_restarts = 1;        // seeds seed, seed+1, ...
    int null_draws = 2000;       // Haar draws for the angle band
};

struct DiagnosticReport {
    int d = 0, k = 0, k_probe = 0, n = 0;
    double probe_cv_r2 = 0.0;
    double theta_bar = 0.0;                // degrees, probe vs DAS
    double null_lo = 0.0, null_hi = 0.0;   // 5 and 95 percent of the Haar mean-angle null, degrees
    double null_mean = 0.0;
    bool theta_in_null_band = false;
    double clean_accuracy = 0.0;
    double delta_P = 0.0;                  // pp
    double delta_M = 0.0;                  // pp
    std::vector<double> random_drops;      // pp
    double random_lo = 0.0, random_hi = 0.0;
    SpecificityInterval specificity;
    bool zero_signal = false;
    bool das_converged = false;
    std::uint64_t seed = 0;
    int n_null = 0;
    Subspace probe_subspace;
    Subspace das_subspace;

    nlohmann::json to_json() const;
};

// Probe fit, DAS fit, principal angles, clean / probe / DAS / random ablations,
// specificity interval.
DiagnosticReport run_diagnostic(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                const std::vector<int>& labels, const DiagnosticConfig& cfg);

// Accuracy drop (pp) of the hooked model relative to clean.
double ablation_drop_pp(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                        const Subspace& u);

// Drops for n Haar frames of rank k from substreams (seed, j).
std::vector<double> random_control_drops(const TaskModel& model, const Eigen::MatrixXd& X,
                                         const std::vector<int>& labels, int k, int n, std::uint64_t seed);

struct SubsetAblationSweep {
    std::vector<std::vector<int>> subsets;  // by size, then lexicographic
    std::vector<double> delta_nll;          // mean NLL increase per subset
    double cooperation_ratio = 0.0;         // full / sum of singles; NaN when singles sum to 0

    nlohmann::json to_json() const;
};

SubsetAblationSweep subset_ablation_sweep(const TaskModel& model, const Eigen::MatrixXd& X,
                                          const std::vector<int>& labels, const Subspace& u);

struct SpectrumRow {
    std::string method;
    int k = 0;
    double delta_nll = 0.0;
    double drop_pp = 0.0;
    double angle_to_das_deg = 0.0;
};

// Ablation effect of each candidate basis at rank k: DAS, PCA, class-mean
// projection, the circular probe, INLP and LEACE on the day-of-year targets,
// and the mean over n_random Haar frames.
std::vector<SpectrumRow> spectrum_report(const TaskModel& model, const Eigen::MatrixXd& X, const std::vector<int>& doy,
                                         const std::vector<int>& labels, const Subspace& das, int n_random,
                                         std::uint64_t seed);
nlohmann::json spectrum_json(const std::vector<SpectrumRow>& rows);

} // namespace msc
