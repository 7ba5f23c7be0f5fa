#include "bbmld/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bbmld/errors.hpp"

namespace bbmld {

namespace {

double position_or_end(const ParticleTree& tree, ParticleId id, double t) {
    const Segment& s = tree.segment(id);
    return t == s.t_end ? s.x_end : tree.position_at(id, t);
}

double log_weight(double x, double t, double beta) {
    return beta * x - (beta * beta / 2.0 + 1.0) * t;
}

void check_horizon(const ParticleTree& tree, double t) {
    if (!(t >= 0.0 && t <= tree.horizon())) throw RangeError("time outside [0, horizon]");
}

}  // namespace

std::vector<ParticleId> level_set(const ParticleTree& tree, double t, double y) {
    check_horizon(tree, t);
    std::vector<ParticleId> out;
    for (ParticleId id : tree.alive_at(t))
        if (position_or_end(tree, id, t) >= y) out.push_back(id);
    return out;
}

std::int64_t level_set_count(const ParticleTree& tree, double t, double y) {
    return static_cast<std::int64_t>(level_set(tree, t, y).size());
}

double additive_martingale(const ParticleTree& tree, double t, double beta) {
    check_horizon(tree, t);
    double w = 0.0;
    for (ParticleId id : tree.alive_at(t))
        w += std::exp(log_weight(position_or_end(tree, id, t), t, beta));
    return w;
}

double max_position(const ParticleTree& tree, double t) {
    check_horizon(tree, t);
    double m = -std::numeric_limits<double>::infinity();
    for (ParticleId id : tree.alive_at(t)) m = std::max(m, position_or_end(tree, id, t));
    return m;
}

namespace {

// Index of the ancestor alive at r for every segment born after r (parents precede children).
std::vector<ParticleId> ancestors_at(const ParticleTree& tree, double r) {
    const auto& segs = tree.segments();
    std::vector<ParticleId> anc(segs.size(), kNoParticle);
    for (const Segment& s : segs) {
        const auto i = static_cast<std::size_t>(s.particle_id);
        if (tree.alive_at(s.particle_id, r))
            anc[i] = s.particle_id;
        else if (s.has_parent() && s.t_birth > r)
            anc[i] = anc[static_cast<std::size_t>(s.parent_id)];
    }
    return anc;
}

}  // namespace

double martingale_decomposition(const ParticleTree& tree, double r, double beta) {
    const double T = tree.horizon();
    check_horizon(tree, r);
    const auto anc = ancestors_at(tree, r);
    std::vector<double> sub(tree.size(), 0.0);
    for (ParticleId leaf : tree.leaves()) {
        const ParticleId v = anc[static_cast<std::size_t>(leaf)];
        const double xr = position_or_end(tree, v, r);
        sub[static_cast<std::size_t>(v)] +=
            std::exp(log_weight(tree.segment(leaf).x_end - xr, T - r, beta));
    }
    double w = 0.0;
    for (ParticleId v : tree.alive_at(r))
        w += std::exp(log_weight(position_or_end(tree, v, r), r, beta)) *
             sub[static_cast<std::size_t>(v)];
    return w;
}

double overlap_square_sum(const ParticleTree& tree, double r, double beta) {
    const double T = tree.horizon();
    if (!(r >= 0.0 && r < T)) throw RangeError("overlap time r must lie in [0, horizon)");
    const auto anc = ancestors_at(tree, r);
    double top = -std::numeric_limits<double>::infinity();
    for (ParticleId leaf : tree.leaves())
        top = std::max(top, log_weight(tree.segment(leaf).x_end, T, beta));
    std::vector<double> mass(tree.size(), 0.0);
    double total = 0.0;
    for (ParticleId leaf : tree.leaves()) {
        const double w = std::exp(log_weight(tree.segment(leaf).x_end, T, beta) - top);
        mass[static_cast<std::size_t>(anc[static_cast<std::size_t>(leaf)])] += w;
        total += w;
    }
    double ol = 0.0;
    for (double m : mass) {
        const double share = m / total;
        ol += share * share;
    }
    return ol;
}

MinRecord v_process_min(const ParticleTree& tree, const LdpParams& params) {
    tree.bind_theta(params.theta);
    MinRecord rec{std::numeric_limits<double>::infinity(), 0.0, 0, 0.0};
    // First pass skips conditioned groups without an attained base; the second refines
    // only those that could still beat the running minimum.
    for (int pass = 0; pass < 2; ++pass) {
        const double refine_below =
            pass == 0 ? -std::numeric_limits<double>::infinity() : rec.value_I;
        for (const Segment& s : tree.segments()) {
            // Untouched free segments hold no conditioned group, so pass 1 has nothing to add.
            if (pass == 1 && !tree.has_path(s.particle_id)) continue;
            if (rec.value_I < std::numeric_limits<double>::infinity() &&
                !tree.v_may_reach(s.particle_id, rec.value_I))
                continue;
            const SegmentMin m = tree.v_min(s.particle_id, refine_below);
            if (m.value < rec.value_I) {
                rec.value_I = m.value;
                rec.argmin_time = m.time;
                rec.minimizer_id = s.particle_id;
            }
            if (!m.exact) rec.resolution = tree.config().bridge_grid_dt;
        }
    }
    return rec;
}

namespace {

std::optional<FirstPassage> first_passage_grid(const ParticleTree& tree, const LdpParams& params,
                                               double level) {
    const double dt = tree.config().bridge_grid_dt;
    const double c = params.theta * params.theta / 2.0 + 1.0;
    std::optional<FirstPassage> best;
    for (const Segment& s : tree.segments()) {
        if (best && s.t_birth >= best->time) continue;
        auto k = static_cast<long>(std::ceil(s.t_birth / dt));
        for (double tk = static_cast<double>(k) * dt; tk <= s.t_end; tk = static_cast<double>(++k) * dt) {
            if (best && tk >= best->time) break;
            if (c * tk - params.theta * tree.position_at(s.particle_id, tk) <= level) {
                best = FirstPassage{tk, s.particle_id};
                break;
            }
        }
    }
    return best;
}

}  // namespace

std::optional<FirstPassage> first_passage_to_level(const ParticleTree& tree,
                                                   const LdpParams& params, double level) {
    tree.bind_theta(params.theta);
    if (level >= 0.0) return FirstPassage{0.0, 0};
    if (tree.config().crossing_mode == CrossingMode::grid_only)
        return first_passage_grid(tree, params, level);
    std::optional<FirstPassage> best;
    std::vector<ParticleId> stack{0};
    while (!stack.empty()) {
        const ParticleId id = stack.back();
        stack.pop_back();
        const Segment& s = tree.segment(id);
        if (best && s.t_birth >= best->time) continue;
        if (tree.v_may_reach(id, level) && tree.v_min(id).value <= level) {
            if (auto hit = tree.v_first_hit(id, level, s.t_end)) {
                if (!best || *hit < best->time) best = FirstPassage{*hit, id};
                continue;
            }
        }
        for (ParticleId c : tree.children(id))
            if (c != kNoParticle) stack.push_back(c);
    }
    return best;
}

std::optional<FirstPassage> first_passage_tau(const ParticleTree& tree, const LdpParams& params,
                                              double t, double z) {
    return first_passage_to_level(tree, params, params.hit_level(t) + z);
}

bool hits_line(const ParticleTree& tree, const LdpParams& params, double t) {
    tree.bind_theta(params.theta);
    const double slope = line_slope(params);
    const AffineBoundary line{params.b * params.p * t - slope * params.p * t, slope};
    if (tree.config().crossing_mode == CrossingMode::grid_only) {
        const double dt = tree.config().bridge_grid_dt;
        for (const Segment& s : tree.segments()) {
            auto k = static_cast<long>(std::ceil(s.t_birth / dt));
            for (double tk = static_cast<double>(k) * dt; tk <= s.t_end;
                 tk = static_cast<double>(++k) * dt)
                if (tree.position_at(s.particle_id, tk) >= line(tk)) return true;
        }
        return false;
    }
    for (const Segment& s : tree.segments())
        if (tree.crosses_line(s.particle_id, line)) return true;
    return false;
}

LevelPair sample_level_pair(const ParticleTree& tree, double t, double y, Stream& rng) {
    const auto members = level_set(tree, t, y);
    if (members.empty()) throw EmptyLevelSet("level set is empty");
    const auto n = static_cast<double>(members.size());
    auto pick = [&]() {
        auto i = static_cast<std::size_t>(rng.uniform() * n);
        return members[std::min(i, members.size() - 1)];
    };
    LevelPair pair;
    pair.u1 = pick();
    pair.u2 = pick();
    if (pair.u1 == pair.u2) {
        pair.same_particle = true;
        pair.mrca_time = t;
        pair.mrca_position = position_or_end(tree, pair.u1, t);
        return pair;
    }
    std::vector<char> mark(tree.size(), 0);
    for (ParticleId v = pair.u1; v != kNoParticle; v = tree.segment(v).parent_id)
        mark[static_cast<std::size_t>(v)] = 1;
    ParticleId v = pair.u2;
    while (!mark[static_cast<std::size_t>(v)]) v = tree.segment(v).parent_id;
    pair.mrca_time = tree.segment(v).t_end;
    pair.mrca_position = tree.segment(v).x_end;
    return pair;
}

}  // namespace bbmld
