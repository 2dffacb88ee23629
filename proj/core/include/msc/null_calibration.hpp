#pragma once

#include "msc/subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace msc {

class ActivationCache;

struct AnalyticNull {
    double mean_angle;  // radians, arccos(sqrt(k_max / d))
    double sum_cos2;    // k1 * k2 / d
};

AnalyticNull analytic_null(int d, int k1, int k2);

enum class NullStatistic { mean_angle, sum_cos2 };
enum class Tail { above, below };

struct NullCalibration {
    int d = 0, k1 = 0, k2 = 0;
    int n_draws = 0;
    std::uint64_t seed = 0;
    AnalyticNull analytic{};
    std::vector<double> mean_angle;  // radians, sorted
    std::vector<double> sum_cos2;    // sorted

    double mc_mean(NullStatistic s) const;
    double mc_sd(NullStatistic s) const;
    double mc_quantile(NullStatistic s, double q) const;
    const std::vector<double>& draws(NullStatistic s) const;

    // Writes "null.draws" (n x 2: sorted mean angle in radians, sorted sum_cos2)
    // plus meta into a cache directory.
    void save(const std::filesystem::path& dir) const;
    static NullCalibration load(const std::filesystem::path& dir);
};

// Draw j pairs a Haar frame from substream (seed, j) with either a second
// Haar frame from the same substream or the fixed frame.
NullCalibration monte_carlo_null(int d, int k1, int k2, int n_draws, std::uint64_t seed,
                                 const std::optional<Subspace>& fixed = std::nullopt);

// (1 + #draws at or beyond observed) / (n + 1).
double empirical_p(const NullCalibration& cal, double observed, NullStatistic stat, Tail side);

struct WhiteningTransform {
    Eigen::MatrixXd W;      // Sigma^{-1/2}
    Eigen::MatrixXd W_inv;  // Sigma^{1/2}
    Eigen::VectorXd mean;
    double ridge = 0.0;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;  // (x - mean) W
    // Maps a frame's directions v -> W v and re-orthonormalizes.
    Subspace transform(const Subspace& u) const;
};

// Covariance of rows, ridge = 1e-3 tr(Sigma) / d, eigenvalues floored at the
// ridge after adding it.
WhiteningTransform whiten(const Eigen::MatrixXd& rows);
// Uses the "activations" tensor, or "doy_means" when activations are absent.
WhiteningTransform whiten(const ActivationCache& cache);

} // namespace msc
