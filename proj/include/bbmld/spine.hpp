#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bbmld/params.hpp"
#include "bbmld/stats.hpp"
#include "bbmld/tree.hpp"

namespace bbmld {

enum class StopKind { fixed_time, first_passage };

struct SpineRealization {
    ParticleTree tree;
    std::vector<ParticleId> spine_ids;
    std::vector<std::pair<double, double>> spine_path;  // (time, X) at spine knots
    std::vector<double> spine_branch_times;             // before the stop
    double stop_time = 0.0;
    double tilt_beta = 0.0;
    StopKind stop_kind = StopKind::fixed_time;
    double z_offset = 0.0;
    double level = 0.0;  // V-level of the stop (first_passage only)

    [[nodiscard]] ParticleId spine_tip() const { return spine_ids.back(); }
};

/// Spine with drift beta on [0, t] branching at rate 2; siblings root standard BBMs.
SpineRealization sample_spine_fixed(double beta, double t, const SimConfig& cfg);

/// The inverse-Gaussian passage time of the tilted spine to -psi'(kappa) p t + z.
/// Same draw as the stop_time of sample_spine_fpt with the same cfg.
double sample_stop_time(const LdpParams& params, double t, double z, const SimConfig& cfg);

/// Spine tilted by b until its V-value first reaches -psi'(kappa) p t + z, then ordinary.
/// The pre-stop V-path is a Bessel(3) bridge down to the level at the sampled passage time.
SpineRealization sample_spine_fpt(const LdpParams& params, double t, double z,
                                  const SimConfig& cfg);

/// No particle off the spine reaches the stop level strictly before the stop time.
bool is_global_first_passage(const SpineRealization& r);

// ---- windowed large-deviation estimator ----

enum class WindowRoute {
    importance,  // spine stopped at the window's upper edge, weight e^{-It + kappa (z+1)}
    direct,      // upper edge >= 0: plain BBM restricted to I >= lower edge, weight 1
    empty,       // lower edge >= 0: I <= 0 always, contributes 0
};

struct WindowPlan {
    double z = 0.0;
    double lower = 0.0;  // V-level -psi' s + z
    double upper = 0.0;  // V-level -psi' s + z + 1, clipped to 0 on the direct route
    WindowRoute route = WindowRoute::empty;
    double weight = 0.0;
};

WindowPlan plan_window(const LdpParams& params, double t, double z);

/// Outcome of one replica of one window.
struct WindowSample {
    bool passage = false;        // spine stop before t (always true on the direct route)
    bool accepted = false;       // passage and tau^w = tau
    std::int64_t level_count = 0;
    bool evaluated = false;      // I computed (only when level_count >= the detail threshold)
    bool in_window = false;
    double weight = 0.0;         // route weight; multiply by the indicator
    double I = 0.0;
    double s_argmin = 0.0;
    double stop_time = 0.0;      // first passage to the window's upper edge
    double max_position = 0.0;
    double overlap = 0.0;        // mrca time of a level-set pair
    double overlap_position = 0.0;
    bool pair_same = false;
};

/// Threshold of the level set: y e^{at} / sqrt t.
double level_threshold(const LdpParams& params, double t, double y) noexcept;

/// Runs one replica. The tree is only scored further (I, pair, max) when the level count
/// reaches `detail_threshold`; below it the replica contributes 0 for every y of interest.
WindowSample score_window(const LdpParams& params, double t, const WindowPlan& plan,
                          const SimConfig& cfg, double detail_threshold);

/// Replica value for a given level threshold.
double window_value(const WindowSample& s, double threshold) noexcept;

struct WindowEstimate {
    WindowPlan plan;
    Estimate estimate;
    double acceptance = 0.0;  // mean of 1{tau^w = tau < t} on the importance route
};

struct SpineLdpResult {
    std::vector<WindowEstimate> windows;
    Estimate combined;
    double tail_bound = 0.0;  // upper bound on the mass of windows below z_min
    double acceptance = 0.0;
};

inline constexpr std::uint64_t kDomainSpine = 0x5350494E45ULL;

/// Replica i of window z uses replica_id(kDomainSpine, window index from z, i) on cfg.seed.
std::uint64_t window_replica(double z, std::uint64_t i) noexcept;

WindowEstimate ldp_window_estimator(const LdpParams& params, double t, double y, double z,
                                    std::int64_t n, const SimConfig& cfg, int workers = 1);

SpineLdpResult ldp_spine_estimate(const LdpParams& params, double t, double y, int z_min,
                                  int z_max, std::int64_t n_per_window, const SimConfig& cfg,
                                  int workers = 1);

/// Windows estimate from already scored samples (one vector per window).
SpineLdpResult combine_windows(const LdpParams& params, double t, double y, int z_min,
                               const std::vector<WindowPlan>& plans,
                               const std::vector<std::vector<WindowSample>>& samples,
                               std::uint64_t seed);

}  // namespace bbmld
