#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace msc {

class ActivationCache;
class Rng;

inline constexpr int kDays = 365;
inline constexpr int kMaxOffset = 182;
inline constexpr int kOffsets = 2 * kMaxOffset + 1;

struct HeadTensors {
    int layer = 0;
    int head = 0;
    Eigen::MatrixXd Wq;  // d_head x d
    Eigen::MatrixXd Wk;  // d_head x d

    int d_head() const { return static_cast<int>(Wq.rows()); }
};

struct OffsetProfile {
    std::vector<double> S;  // S[c + 182] for c in [-182, 182]
    std::vector<double> z;  // standardized over c != 0
    int c_star = 0;
    double peak_z = 0.0;    // signed z at c_star
    bool degenerate = false;

    double S_at(int c) const { return S[static_cast<std::size_t>(c + kMaxOffset)]; }
    double z_at(int c) const { return z[static_cast<std::size_t>(c + kMaxOffset)]; }
};

// M[d, d'] = (Wq x_d) . (Wk x_d') / sqrt(d_head) over the 365 mean rows.
Eigen::MatrixXd qk_matrix(const Eigen::MatrixXd& mean_acts, const HeadTensors& head);

// Offset profile of M, optionally reading M through a row/column relabeling
// perm (row i plays day perm[i]). circular wraps offsets mod 365.
OffsetProfile profile_from_matrix(const Eigen::MatrixXd& M, bool circular = false,
                                  const std::vector<int>* perm = nullptr);

OffsetProfile offset_profile(const Eigen::MatrixXd& mean_acts, const HeadTensors& head, bool circular = false);

struct HeadScanResult {
    int layer = 0;
    int head = 0;
    OffsetProfile profile;
    int c_star = 0;
    double peak_z = 0.0;
    double p_perm = 1.0;
    double q_bh = 1.0;
    bool significant = false;
};

// Heads from "qk.wq" and "qk.wk" (H x d_head x d) and "qk.layer_head" (H x 2).
std::vector<HeadTensors> load_heads(const ActivationCache& cache);

// Per-head permutation p-values from shuffled day labels, then BH across heads.
std::vector<HeadScanResult> scan_heads(const Eigen::MatrixXd& mean_acts, const std::vector<HeadTensors>& heads,
                                       int n_perm, double q, std::uint64_t seed, bool circular = false);

// CSV with header L,h,c_star,z,p,q.
std::string scan_csv(const std::vector<HeadScanResult>& results);

struct GmmFit {
    int k = 0;
    std::vector<double> means, variances, weights;  // sorted by mean
    double log_lik = 0.0;
    double bic = 0.0;
};

struct ModeFit {
    GmmFit best;
    std::vector<GmmFit> table;  // k = 1..max_components
};

inline constexpr double kGmmVarianceFloor = 0.25;
inline constexpr int kGmmRestarts = 8;

ModeFit offset_modes(const std::vector<double>& offsets, int max_components = 4, std::uint64_t seed = 0);

// Modes matched within tolerance, counted from whichever side matches more.
// Offsets are compared by absolute value.
int matched_modes(const std::vector<double>& a, const std::vector<double>& b, double tolerance);

// Null: independent mode sets of the same sizes drawn from Uniform{1..182}.
double mode_coincidence_test(const std::vector<double>& modes_a, const std::vector<double>& modes_b,
                             double tolerance_days, int n_mc, std::uint64_t seed);

// Random head whose Wk is shifted so that the profile peaks at offset c with
// z-score target_z; Wk is fitted through a least-squares day-shift map on
// mean_acts.
HeadTensors plant_offset_head(const Eigen::MatrixXd& mean_acts, int c, double target_z, int d_head, Rng& rng);
HeadTensors random_head(int d, int d_head, Rng& rng);

} // namespace msc
