#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bbmld/params.hpp"
#include "bbmld/spine.hpp"
#include "bbmld/stats.hpp"
#include "bbmld/tree.hpp"

namespace bbmld {

// Replica domains: every estimator draws its replicas from its own family of streams.
inline constexpr std::uint64_t kDomainNaive = 0x4E41495645ULL;
inline constexpr std::uint64_t kDomainTail = 0x5441494CULL;
inline constexpr std::uint64_t kDomainOverlap = 0x4F4C4150ULL;
inline constexpr std::uint64_t kDomainPairs = 0x50414952ULL;
inline constexpr std::uint64_t kDomainSimulate = 0x53494D55ULL;

/// ℒ_t(xt) for n standard BBM replicas, streamed without storing trees.
std::vector<std::int64_t> naive_level_counts(double x, double t, std::int64_t n,
                                             const SimConfig& cfg, int workers = 1);

/// Frequency of {count >= threshold} with binomial standard error.
Estimate naive_from_counts(const std::vector<std::int64_t>& counts, double threshold,
                           std::uint64_t seed);

/// P(ℒ_t(xt) >= y e^{at} / sqrt t) by plain Monte Carlo.
Estimate naive_ldp(double x, double a, double t, double y, std::int64_t n, const SimConfig& cfg,
                   int workers = 1);

/// W_T(beta) for n replicas.
std::vector<double> martingale_samples(double beta, double T, std::int64_t n,
                                       const SimConfig& cfg, int workers = 1);

struct TailFit {
    double kappa_hat = 0.0;
    double c_w_hat = 0.0;
    double y_lo = 0.0;
    double y_hi = 0.0;
    std::int64_t n = 0;
    double kappa_theory = 0.0;
    double mean_w = 0.0;
    double mean_w_stderr = 0.0;
    double frac_positive = 0.0;
    double envelope_max = 0.0;  // max of y^kappa P(W > y) over the window
    double envelope_min = 0.0;
};

inline constexpr std::int64_t kMinTailExceedances = 200;

/// Power-law fit of the upper tail of the samples: least-squares slope of log P(W > y)
/// against log y on a log grid from the upper decile to the 200th largest value.
TailFit fit_tail(const std::vector<double>& samples, double theta);

TailFit martingale_tail(double theta, double T, std::int64_t n, const SimConfig& cfg,
                        int workers = 1);

struct ConditionedSummary {
    double pareto_index_hat = 0.0;
    std::size_t hill_k = 0;
    double pareto_ks_pvalue = 0.0;
    double overlap_time_mean = 0.0;  // of R itself
    double overlap_mean = 0.0;       // of (R - pt) / sqrt(pt)
    double overlap_var = 0.0;
    double jump_pos_mean = 0.0;      // of (X_R - bpt) / sqrt(pt)
    double jump_pos_var = 0.0;
    double max_mean = 0.0;           // of (M_t - vt) / sqrt t
    double max_var = 0.0;
    double s_argmin_mean = 0.0;      // of (s_argmin - pt) / sqrt(pt)
    double s_argmin_var = 0.0;
    double prob_s_tau_far = 0.0;     // P(|s_argmin - tau| > 5)
    double prob_argmin_near_horizon = 0.0;
    double effective_sample_size = 0.0;
    double pair_ess = 0.0;           // ESS of the pairs with distinct particles
    std::int64_t n = 0;              // replicas scored
    std::int64_t n_contributing = 0; // replicas with positive weight
    bool low_ess = false;
};

/// Self-normalised statistics of the conditioned ensemble from scored window samples.
ConditionedSummary conditioned_summary(const LdpParams& params, double t, double y,
                                       const std::vector<WindowPlan>& plans,
                                       const std::vector<std::vector<WindowSample>>& samples);

/// Runs the windows z in [z_lo, z_hi) with n_per_z replicas each and summarises.
ConditionedSummary conditioned_stats(const LdpParams& params, double t, double y, int z_lo,
                                     int z_hi, std::int64_t n_per_z, const SimConfig& cfg,
                                     int workers = 1);

/// Scored spine windows, reusable for several y and for the conditioned statistics.
struct WindowRun {
    std::vector<WindowPlan> plans;
    std::vector<std::vector<WindowSample>> samples;
};

WindowRun run_windows(const LdpParams& params, double t, int z_lo, int z_hi,
                      std::int64_t n_per_z, double detail_y, const SimConfig& cfg,
                      int workers = 1);

struct TrendRow {
    double t = 0.0;
    Estimate estimate;
    double scaled = 0.0;         // e^{rate t} P(t)
    double scaled_stderr = 0.0;
    double ratio = 0.0;          // scaled / previous scaled (0 for the first row)
    double ratio_stderr = 0.0;
};

/// e^{rate t} P̂(t) over t_list. rate <= 0 means the exact I(x,a).
std::vector<TrendRow> trend_e_it(const LdpParams& params, const std::vector<double>& t_list,
                                 double y, const std::string& method, std::int64_t n,
                                 int z_lo, int z_hi, const SimConfig& cfg, int workers = 1,
                                 double rate = 0.0);

/// Rows from estimates already computed at each t.
std::vector<TrendRow> trend_rows(const std::vector<double>& t_list,
                                 const std::vector<Estimate>& estimates, double rate);

/// Ratio a/b with a delta-method standard error that ignores correlation.
struct Ratio {
    double value = 0.0;
    double std_error = 0.0;
};
Ratio ratio_of(const Estimate& a, const Estimate& b) noexcept;

/// Monte Carlo OL(r, beta) with W_inf replaced by W_T.
Estimate overlap_limit(double r, double beta, double T, std::int64_t n, const SimConfig& cfg,
                       int workers = 1);

struct OverlapReport {
    Estimate at_T;
    Estimate at_T_minus_2;
    double relative_drift = 0.0;
    bool converged = false;  // drift < 2%
};

OverlapReport overlap_limit_with_diagnostic(double r, double beta, double T, std::int64_t n,
                                            const SimConfig& cfg, int workers = 1);

/// Empirical P(R(u1, u2) >= r) for a uniform pair from the xt-level set at time t;
/// replicas with an empty level set are skipped.
Estimate pair_overlap_exceedance(double x, double t, double r, std::int64_t n,
                                 const SimConfig& cfg, int workers = 1);

}  // namespace bbmld
