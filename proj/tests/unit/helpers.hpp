#pragma once

#include <msc/cache.hpp>
#include <msc/subspace.hpp>
#include <msc/synthetic.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline std::filesystem::path tmp_dir(const std::string& name) {
    const char* root = std::getenv("MSC_TEST_TMP");
    std::filesystem::path base = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "msc_tests";
    auto p = base / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Gaussian matrix from the standard library engine, independent of msc::Rng.
inline Eigen::MatrixXd std_gaussian(int rows, int cols, std::mt19937_64& eng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd G(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) G(i, j) = n(eng);
    return G;
}

// Modified Gram-Schmidt over rows.
inline Eigen::MatrixXd gram_schmidt(Eigen::MatrixXd A) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) A.row(i) -= A.row(i).dot(A.row(j)) * A.row(j);
        A.row(i) /= A.row(i).norm();
    }
    return A;
}

inline Eigen::MatrixXd haar_rows(int d, int k, std::mt19937_64& eng) { return gram_schmidt(std_gaussian(k, d, eng)); }

// Principal-angle cosines from the eigenvalues of C C^T, descending.
inline std::vector<double> cosines_by_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd C = a * b.transpose();
    if (C.rows() > C.cols()) C.transposeInPlace();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C * C.transpose());
    std::vector<double> out;
    for (Eigen::Index i = es.eigenvalues().size() - 1; i >= 0; --i)
        out.push_back(std::sqrt(std::clamp(es.eigenvalues()(i), 0.0, 1.0)));
    return out;
}

inline double mean_angle_deg_by_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double s = 0.0;
    const auto c = cosines_by_eig(a, b);
    for (double x : c) s += std::acos(x);
    return s / static_cast<double>(c.size()) * 180.0 / std::numbers::pi;
}

inline Eigen::MatrixXd unit_rows(int d, std::initializer_list<int> idx) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), d);
    int r = 0;
    for (int i : idx) m(r++, i) = 1.0;
    return m;
}

// Small suite for fast tests: d=32, k_med=2, two years of prompts.
inline msc::SyntheticSuiteSpec small_spec(std::uint64_t seed = 11) {
    msc::SyntheticSuiteSpec s;
    s.d = 32;
    s.k_med = 2;
    s.n_classes = 4;
    s.n_prompts = 730;
    s.seed = seed;
    s.n_heads = 0;
    s.n_queries = 0;
    return s;
}

inline std::vector<int> to_int(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

} // namespace testutil
