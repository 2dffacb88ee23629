#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace msc {

struct TensorRecord;

inline constexpr double kOrthTol = 1e-6;

double rad2deg(double r);
double deg2rad(double d);

// Rank-k orthonormal frame in R^d stored as a k x d matrix with orthonormal
// rows. k = 0 is the empty frame: ablating it is the identity.
class Subspace {
public:
    Subspace() = default;
    // Checks ||B B^T - I||_F < tol.
    explicit Subspace(Eigen::MatrixXd basis, double tol = kOrthTol);
    static Subspace empty(int d);

    int k() const { return static_cast<int>(basis_.rows()); }
    int d() const { return static_cast<int>(basis_.cols()); }
    const Eigen::MatrixXd& basis() const { return basis_; }

    double orth_residual() const;
    // Frame made of a subset of rows (already orthonormal).
    Subspace rows(const std::vector<int>& idx) const;

    TensorRecord to_record(const std::string& role) const;
    static Subspace from_record(const TensorRecord& rec);

private:
    Eigen::MatrixXd basis_{0, 0};
};

struct PrincipalAngleSet {
    std::vector<double> angles;  // radians, nondecreasing
    double mean_angle = 0.0;     // radians
    double sum_cos2 = 0.0;

    std::vector<double> angles_deg() const;
    double mean_angle_deg() const { return rad2deg(mean_angle); }
};

double orth_residual(const Eigen::MatrixXd& basis);

// Householder QR of rows^T with positive R diagonal. Throws on numerical rank
// below k (smallest singular value <= 1e-10 * largest).
Subspace orthonormalize(const Eigen::MatrixXd& rows);

// Principal angles from the SVD of u B_v^T with cosines clamped to [0, 1].
// Cross-rank comparisons use min(k1, k2) angles.
PrincipalAngleSet principal_angles(const Subspace& u, const Subspace& v);

Subspace haar_sample(int d, int k, std::uint64_t seed);
class Rng;
Subspace haar_sample(int d, int k, Rng& rng);

Eigen::VectorXd ablate(const Eigen::VectorXd& x, const Subspace& u);
// Row-wise ablation of an n x d matrix.
Eigen::MatrixXd ablate_rows(const Eigen::MatrixXd& X, const Subspace& u);

// Projects rows onto the complement of u, then orthonormalizes. Two passes
// keep the result orthogonal to u to round-off.
Subspace orthogonalize_against(const Eigen::MatrixXd& rows, const Subspace& u);

double energy_fraction(const Eigen::VectorXd& x, const Subspace& u);

struct TfaSplit {
    Eigen::VectorXd predictable;
    Eigen::VectorXd novel;
};
// t is 1-based. For t = 1 the past is empty and everything is novel.
TfaSplit tfa_split(const Eigen::MatrixXd& sequence, int t);

// Top-k right singular frame of M (rows are observations). Each row's
// largest-magnitude entry is made positive. Returns singular values too.
struct SvdFrame {
    Subspace frame;
    Eigen::VectorXd singular_values;
};
SvdFrame top_right_singular(const Eigen::MatrixXd& M, int k);

} // namespace msc
