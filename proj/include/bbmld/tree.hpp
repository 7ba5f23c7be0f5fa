#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "bbmld/bridge.hpp"
#include "bbmld/rng.hpp"

namespace bbmld {

using ParticleId = std::int64_t;
inline constexpr ParticleId kNoParticle = -1;

struct SimConfig {
    double horizon = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t replica_index = 0;
    std::int64_t max_particles = std::int64_t{1} << 22;
    double bridge_grid_dt = 1e-3;
    CrossingMode crossing_mode = CrossingMode::segment_exact;
};

void validate(const SimConfig& cfg);

struct Segment {
    ParticleId particle_id = 0;
    ParticleId parent_id = kNoParticle;
    double t_birth = 0.0;
    double x_birth = 0.0;
    double t_end = 0.0;
    double x_end = 0.0;
    bool is_leaf_at_horizon = false;

    [[nodiscard]] bool has_parent() const noexcept { return parent_id != kNoParticle; }
    [[nodiscard]] double length() const noexcept { return t_end - t_birth; }
};

// Cached path of one segment.
//
// Knots pin the path at increasing times. The span between two knots is either free
// (a Brownian bridge of X) or belongs to a conditioned group: V = base + |W| where W is a
// 3-d Brownian bridge with per-coordinate variance theta^2, so that V - base is a Bessel(3)
// bridge. A group whose W vanishes at a knot attains its base there; this is how an exactly
// sampled minimum (and the pre-passage spine path) is stored.
struct PathKnot {
    double t = 0.0;
    double x = 0.0;
    std::array<double, 3> wl{};  // W seen from the span on the left
    std::array<double, 3> wr{};  // W seen from the span on the right
};

struct PathGroup {
    double base = 0.0;
    double zero_time = 0.0;
    bool attained = false;
};

struct SegmentPath {
    std::vector<PathKnot> knots;
    std::vector<int> span_group;  // size knots-1, -1 for free spans
    std::vector<PathGroup> groups;
};

struct SegmentMin {
    double value = 0.0;
    double time = 0.0;
    bool exact = true;
};

class TreeBuilder;

/// Branch-event skeleton of one BBM realisation plus a lazily refined path cache.
///
/// Particle ids are indices into segments(); parents always precede children.
/// The cache is mutable: a tree must be confined to one thread while it is queried.
class ParticleTree {
public:
    ParticleTree() = default;

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }
    [[nodiscard]] std::size_t size() const noexcept { return segments_.size(); }
    [[nodiscard]] const Segment& segment(ParticleId id) const;
    [[nodiscard]] std::uint64_t lineage_key(ParticleId id) const;
    [[nodiscard]] std::array<ParticleId, 2> children(ParticleId id) const;
    [[nodiscard]] const std::vector<ParticleId>& leaves() const noexcept { return leaves_; }
    [[nodiscard]] std::uint64_t rng_state_digest() const noexcept { return digest_; }
    [[nodiscard]] const StreamFactory& streams() const noexcept { return streams_; }
    [[nodiscard]] const SimConfig& config() const noexcept { return cfg_; }

    /// Alive at r: t_birth <= r < t_end, or r == horizon for leaves.
    [[nodiscard]] bool alive_at(ParticleId id, double r) const;
    [[nodiscard]] std::vector<ParticleId> alive_at(double r) const;

    /// Position at time t, sampled from the bridge given every knot already on the segment.
    double position_at(ParticleId id, double t) const;

    /// Fix the theta of the V-process; conditioned spans depend on it.
    void bind_theta(double theta) const;
    [[nodiscard]] std::optional<double> theta() const noexcept { return theta_; }

    /// V_r = (theta^2/2 + 1) r - theta X_r at time t.
    double v_at(ParticleId id, double t) const;

    /// Minimum of V over the whole segment. Conditioned groups that never reach their base
    /// (a spine cut by the horizon) are refined to the grid only if the base is below
    /// `refine_below`; otherwise they are skipped as they cannot go below it.
    SegmentMin v_min(ParticleId id,
                     double refine_below = std::numeric_limits<double>::infinity()) const;

    /// Whether min V on the segment can be <= level. A false answer is exact and costs one
    /// uniform for an untouched free segment; true answers may need v_min to confirm.
    bool v_may_reach(ParticleId id, double level) const;

    /// Whether X reaches the affine boundary on the segment. Free spans use the bridge
    /// crossing formula driven by the same uniform that fixes the span minimum, so for
    /// boundaries that are V-levels this agrees path-by-path with v_min.
    bool crosses_line(ParticleId id, const AffineBoundary& boundary) const;

    /// Earliest time in [t_birth, min(t_to, t_end)] at which V <= level.
    std::optional<double> v_first_hit(ParticleId id, double level, double t_to) const;

    [[nodiscard]] std::size_t knot_count(ParticleId id) const;
    /// Whether the segment has a cached path (conditioned, refined or materialized).
    [[nodiscard]] bool has_path(ParticleId id) const { return paths_.count(id) != 0; }
    [[nodiscard]] const SegmentPath& path(ParticleId id) const;

private:
    friend class TreeBuilder;

    SegmentPath& path_ref(ParticleId id) const;
    double v_const() const;
    double knot_v_left(const SegmentPath& p, std::size_t k) const;
    double knot_v_right(const SegmentPath& p, std::size_t k) const;
    std::uint64_t span_subject(ParticleId id, double ta, double tb) const;
    std::size_t span_index(const SegmentPath& p, double ta) const;
    std::size_t insert_knot(ParticleId id, SegmentPath& p, std::size_t span, double t) const;
    void materialize(ParticleId id, SegmentPath& p) const;
    std::optional<double> hit_in_span(ParticleId id, SegmentPath& p, double ta, double tb,
                                      double h) const;
    double refine_min(ParticleId id, SegmentPath& p, double ta, double tb, double& at) const;
    void check_time(ParticleId id, double t) const;

    double horizon_ = 0.0;
    SimConfig cfg_{};
    StreamFactory streams_{};
    std::vector<Segment> segments_;
    std::vector<std::uint64_t> keys_;
    std::vector<std::array<ParticleId, 2>> children_;
    std::vector<ParticleId> leaves_;
    std::uint64_t digest_ = 0;

    mutable std::optional<double> theta_;
    mutable std::unordered_map<ParticleId, SegmentPath> paths_;
};

/// Incremental construction of a ParticleTree.
class TreeBuilder {
public:
    explicit TreeBuilder(const SimConfig& cfg);

    [[nodiscard]] const StreamFactory& streams() const noexcept { return tree_.streams_; }
    [[nodiscard]] const SimConfig& config() const noexcept { return tree_.cfg_; }
    [[nodiscard]] std::int64_t leaf_count() const noexcept {
        return static_cast<std::int64_t>(tree_.leaves_.size());
    }

    /// Appends a segment; `side` is 0 or 1 among the parent's children.
    ParticleId add(ParticleId parent, int side, double t0, double x0, double t1, double x1,
                   bool leaf, std::uint64_t key);
    void set_path(ParticleId id, SegmentPath path);
    void bind_theta(double theta);

    ParticleTree finish();

private:
    ParticleTree tree_;
};

/// Lineage key of the root of every replica; child keys are hash_combine(key, side + 1).
inline constexpr std::uint64_t kRootKey = 0x51ED270B27A4F3C1ULL;
std::uint64_t child_key(std::uint64_t key, int side) noexcept;

}  // namespace bbmld
