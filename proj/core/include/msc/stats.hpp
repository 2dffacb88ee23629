#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace msc {

double mean(const std::vector<double>& v);
// Sample standard deviation (n - 1 denominator). Zero for n < 2.
double stddev(const std::vector<double>& v);
// Linear-interpolation quantile (type 7) of unsorted data.
double quantile(std::vector<double> v, double q);
// Same, for data already sorted ascending.
double quantile_sorted(const std::vector<double>& sorted, double q);

// Ranks starting at 1 with ties averaged.
std::vector<double> average_ranks(const std::vector<double>& v);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Benjamini-Hochberg adjusted q-values, same order as the input.
std::vector<double> bh_adjust(const std::vector<double>& p);

// Row-major argmax with ties going to the lowest index.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& v);

// Kolmogorov-Smirnov statistic of a sample against Uniform(0, 1).
double ks_uniform_statistic(std::vector<double> v);
// Asymptotic KS p-value for statistic D at sample size n.
double ks_pvalue(double D, std::size_t n);

// Circular distance between two day-of-year values, in [0, 182.5].
double circular_day_distance(double a, double b);

// Calendar month (1..12) of a day-of-year in a non-leap year.
int month_of_doy(int doy);

} // namespace msc
