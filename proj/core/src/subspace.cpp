#include "msc/subspace.hpp"

#include "msc/error.hpp"
#include "msc/rng.hpp"
#include "msc/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace msc {

double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }
double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

double orth_residual(const Eigen::MatrixXd& basis) {
    if (basis.rows() == 0) return 0.0;
    return (basis * basis.transpose() - Eigen::MatrixXd::Identity(basis.rows(), basis.rows())).norm();
}

Subspace::Subspace(Eigen::MatrixXd basis, double tol) : basis_(std::move(basis)) {
    if (basis_.rows() > basis_.cols()) throw ValidationError("subspace rank exceeds ambient dimension");
    if (!basis_.allFinite()) throw NumericalError("subspace basis has non-finite entries");
    const double r = msc::orth_residual(basis_);
    if (!(r < tol)) throw ValidationError("basis rows are not orthonormal (residual " + std::to_string(r) + ")");
}

Subspace Subspace::empty(int d) { return Subspace(Eigen::MatrixXd(0, d)); }

double Subspace::orth_residual() const { return msc::orth_residual(basis_); }

Subspace Subspace::rows(const std::vector<int>& idx) const {
    Eigen::MatrixXd b(static_cast<Eigen::Index>(idx.size()), basis_.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= k()) throw ValidationError("row index out of range");
        b.row(static_cast<Eigen::Index>(i)) = basis_.row(idx[i]);
    }
    return Subspace(std::move(b));
}

TensorRecord Subspace::to_record(const std::string& role) const {
    return TensorRecord::from_matrix(role + ".basis", basis_);
}

Subspace Subspace::from_record(const TensorRecord& rec) {
    if (rec.dims.size() != 2) throw ValidationError("subspace tensor '" + rec.name + "' must be 2-D");
    return Subspace(rec.to_matrix());
}

std::vector<double> PrincipalAngleSet::angles_deg() const {
    std::vector<double> out;
    out.reserve(angles.size());
    for (double a : angles) out.push_back(rad2deg(a));
    return out;
}

Subspace orthonormalize(const Eigen::MatrixXd& rows) {
    const Eigen::Index k = rows.rows(), d = rows.cols();
    if (k == 0) return Subspace::empty(static_cast<int>(d));
    if (k > d) throw ValidationError("rank-deficient input: more rows than columns");
    if (!rows.allFinite()) throw NumericalError("orthonormalize: non-finite input");

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(rows.transpose());
    Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
    const auto& s = svd.singularValues();
    if (!(s(k - 1) > 1e-10 * s(0))) throw ValidationError("rank-deficient input");

    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
    for (Eigen::Index j = 0; j < k; ++j)
        if (R(j, j) < 0) Q.col(j) *= -1.0;
    return Subspace(Q.transpose());
}

PrincipalAngleSet principal_angles(const Subspace& u, const Subspace& v) {
    if (u.d() != v.d()) throw ValidationError("dimension mismatch in principal_angles");
    if (u.k() == 0 || v.k() == 0) throw ValidationError("principal angles need nonempty frames");
    const Eigen::MatrixXd M = u.basis() * v.basis().transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& s = svd.singularValues();  // descending
    const Eigen::Index kmin = std::min(u.k(), v.k());

    PrincipalAngleSet out;
    out.angles.reserve(static_cast<std::size_t>(kmin));
    for (Eigen::Index i = 0; i < kmin; ++i) {
        const double c = std::clamp(s(i), 0.0, 1.0);
        out.angles.push_back(std::acos(c));
        out.sum_cos2 += c * c;
    }
    std::sort(out.angles.begin(), out.angles.end());
    double total = 0.0;
    for (double a : out.angles) total += a;
    out.mean_angle = total / static_cast<double>(kmin);
    return out;
}

Subspace haar_sample(int d, int k, Rng& rng) {
    if (k < 0 || k > d) throw ValidationError("haar_sample needs 0 <= k <= d");
    Eigen::MatrixXd G(k, d);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j) G(i, j) = rng.normal();
    return orthonormalize(G);
}

Subspace haar_sample(int d, int k, std::uint64_t seed) {
    Rng rng(seed);
    return haar_sample(d, k, rng);
}

Eigen::VectorXd ablate(const Eigen::VectorXd& x, const Subspace& u) {
    if (x.size() != u.d()) throw ValidationError("dimension mismatch in ablate");
    if (u.k() == 0) return x;
    return x - u.basis().transpose() * (u.basis() * x);
}

Eigen::MatrixXd ablate_rows(const Eigen::MatrixXd& X, const Subspace& u) {
    if (X.cols() != u.d()) throw ValidationError("dimension mismatch in ablate");
    if (u.k() == 0) return X;
    return X - (X * u.basis().transpose()) * u.basis();
}

Subspace orthogonalize_against(const Eigen::MatrixXd& rows, const Subspace& u) {
    if (rows.cols() != u.d()) throw ValidationError("dimension mismatch in orthogonalize_against");
    if (rows.rows() == 0) throw ValidationError("no rows to orthogonalize");
    const Eigen::MatrixXd resid = ablate_rows(rows, u);
    Eigen::JacobiSVD<Eigen::MatrixXd> in_svd(rows), out_svd(resid);
    const double scale = in_svd.singularValues()(0);
    const auto& s = out_svd.singularValues();
    if (!(scale > 0) || !(s(s.size() - 1) > 1e-8 * scale)) throw ValidationError("rows lie inside subspace");
    const Subspace first = orthonormalize(resid);
    return orthonormalize(ablate_rows(first.basis(), u));
}

double energy_fraction(const Eigen::VectorXd& x, const Subspace& u) {
    if (x.size() != u.d()) throw ValidationError("dimension mismatch in energy_fraction");
    const double total = x.squaredNorm();
    if (!(total > 0)) throw ValidationError("energy_fraction of zero vector");
    if (u.k() == 0) return 0.0;
    return std::clamp((u.basis() * x).squaredNorm() / total, 0.0, 1.0);
}

TfaSplit tfa_split(const Eigen::MatrixXd& sequence, int t) {
    const auto T = static_cast<int>(sequence.rows());
    if (t < 1 || t > T) throw ValidationError("tfa_split position out of range");
    const Eigen::VectorXd x = sequence.row(t - 1).transpose();
    TfaSplit out{Eigen::VectorXd::Zero(x.size()), x};
    if (t == 1) return out;

    const Eigen::MatrixXd past = sequence.topRows(t - 1).transpose();  // d x (t-1)
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(past);
    const double maxabs = past.cwiseAbs().maxCoeff();
    if (maxabs == 0.0) return out;
    qr.setThreshold(1e-12);
    const Eigen::Index r = qr.rank();
    if (r == 0) return out;
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(past.rows(), r);
    out.predictable = Q * (Q.transpose() * x);
    out.novel = x - out.predictable;
    return out;
}

SvdFrame top_right_singular(const Eigen::MatrixXd& M, int k) {
    if (k < 0 || k > std::min(M.rows(), M.cols())) throw ValidationError("requested rank exceeds matrix rank bound");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinV);
    Eigen::MatrixXd V = svd.matrixV().leftCols(k).transpose();
    for (int i = 0; i < k; ++i) {
        Eigen::Index j;
        V.row(i).cwiseAbs().maxCoeff(&j);
        if (V(i, j) < 0) V.row(i) *= -1.0;
    }
    // Re-orthonormalize to absorb SVD round-off.
    Subspace frame = k == 0 ? Subspace::empty(static_cast<int>(M.cols())) : orthonormalize(V);
    return {std::move(frame), svd.singularValues()};
}

} // namespace msc
