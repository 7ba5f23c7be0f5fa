#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bbmld {

/// Exactly rounded floating-point summation (Shewchuk partials, as in Python's fsum).
/// value() depends only on the multiset of added numbers, so merges are associative.
class ExactSum {
public:
    void add(double x);
    void merge(const ExactSum& other);
    [[nodiscard]] double value() const;

private:
    std::vector<double> partials_;
};

/// Count, sum and sum of squares of a stream of values.
struct Tally {
    std::int64_t n = 0;
    ExactSum sum;
    ExactSum sumsq;

    void add(double x);
    void merge(const Tally& other);
    [[nodiscard]] double mean() const;
    [[nodiscard]] double variance() const;  // unbiased
    [[nodiscard]] double stderr_iid() const;
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n = 0;
    std::string method;
    std::uint64_t seed = 0;

    [[nodiscard]] double lo95() const noexcept { return value - 1.959963984540054 * std_error; }
    [[nodiscard]] double hi95() const noexcept { return value + 1.959963984540054 * std_error; }
};

inline constexpr int kDefaultBatches = 32;

double exact_mean(const std::vector<double>& xs);
/// Standard error of the mean from `batches` contiguous batch means.
double batch_means_stderr(const std::vector<double>& xs, int batches = kDefaultBatches);
Estimate mean_estimate(const std::vector<double>& xs, std::string method, std::uint64_t seed,
                       int batches = kDefaultBatches);
Estimate binomial_estimate(std::int64_t successes, std::int64_t n, std::string method,
                           std::uint64_t seed);
/// Sum of independent estimates.
Estimate sum_estimates(const std::vector<Estimate>& parts, std::string method,
                       std::uint64_t seed);

/// Whether the 95% intervals of two estimates intersect.
bool ci95_overlap(const Estimate& a, const Estimate& b) noexcept;

struct WeightedMoments {
    double mean = 0.0;
    double variance = 0.0;  // weighted population variance
    double ess = 0.0;
    double weight_sum = 0.0;
};

double effective_sample_size(const std::vector<double>& ws);
WeightedMoments weighted_moments(const std::vector<double>& xs, const std::vector<double>& ws);
/// P_w(X > threshold): weight fraction strictly above the threshold.
double weighted_exceedance(const std::vector<double>& xs, const std::vector<double>& ws,
                           double threshold);

struct KsResult {
    double statistic = 0.0;
    double pvalue = 0.0;
    double n_eff = 0.0;
};

/// Weighted one-sample Kolmogorov-Smirnov test; empty ws means equal weights.
/// The p-value uses the asymptotic law at the effective sample size with Stephens' correction.
KsResult ks_test(const std::vector<double>& xs, const std::vector<double>& ws,
                 const std::function<double(double)>& cdf);

/// Weighted Hill estimator of the tail index from the k largest samples, with the
/// (k+1)-th largest as threshold. Empty ws means equal weights.
double hill(const std::vector<double>& xs, const std::vector<double>& ws, std::size_t k);
/// Top 10% of the sample, at least 50 (and at most n - 1).
std::size_t default_hill_k(std::size_t n) noexcept;
/// Weighted version: the largest samples carrying 10% of the total weight, at least 50
/// (and at most n - 1). Equal or empty weights give default_hill_k(n).
std::size_t default_hill_k(const std::vector<double>& xs, const std::vector<double>& ws);

/// KS test against Pareto(index): P(X > y) = y^{-index}, y >= 1.
KsResult pareto_ks(const std::vector<double>& xs, const std::vector<double>& ws, double index);

}  // namespace bbmld
