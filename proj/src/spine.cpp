#include "bbmld/spine.hpp"

#include <cmath>
#include <sstream>

#include "bbmld/errors.hpp"
#include "bbmld/inverse_gaussian.hpp"
#include "bbmld/observables.hpp"
#include "bbmld/parallel.hpp"
#include "bbmld/simulator.hpp"

namespace bbmld {

namespace {

SimConfig with_horizon(SimConfig cfg, double t) {
    cfg.horizon = t;
    return cfg;
}

int spine_child(const StreamFactory& f, std::uint64_t key) {
    return Stream(f, key, Purpose::spine_choice).uniform() < 0.5 ? 0 : 1;
}

}  // namespace

SpineRealization sample_spine_fixed(double beta, double t, const SimConfig& cfg) {
    if (!(t > 0.0)) throw DomainError("spine horizon must be > 0");
    TreeBuilder builder(with_horizon(cfg, t));
    const StreamFactory& f = builder.streams();
    SpineRealization r;
    r.tilt_beta = beta;
    r.stop_kind = StopKind::fixed_time;
    r.stop_time = t;
    r.spine_path.emplace_back(0.0, 0.0);

    std::uint64_t key = kRootKey;
    ParticleId parent = kNoParticle;
    int side = 0;
    double t0 = 0.0;
    double x0 = 0.0;
    for (;;) {
        Stream clock(f, key, Purpose::spine_clock);
        Stream path(f, key, Purpose::spine_path);
        const double tb = t0 + clock.exponential(2.0);
        const bool leaf = tb >= t;
        const double t1 = leaf ? t : tb;
        const double x1 = x0 + beta * (t1 - t0) + std::sqrt(t1 - t0) * path.normal();
        const ParticleId id = builder.add(parent, side, t0, x0, t1, x1, leaf, key);
        r.spine_ids.push_back(id);
        r.spine_path.emplace_back(t1, x1);
        if (leaf) break;
        r.spine_branch_times.push_back(t1);
        const int next = spine_child(f, key);
        grow_bbm(builder, child_key(key, 1 - next), id, 1 - next, t1, x1);
        key = child_key(key, next);
        parent = id;
        side = next;
        t0 = t1;
        x0 = x1;
    }
    r.tree = builder.finish();
    return r;
}

namespace {

double stop_level(const LdpParams& params, double t, double z) {
    const double level = params.hit_level(t) + z;
    if (level >= 0.0) {
        std::ostringstream msg;
        msg << "stop level " << level << " is not below V_0 = 0 (z too large)";
        throw DegenerateLevel(msg.str());
    }
    return level;
}

}  // namespace

double sample_stop_time(const LdpParams& params, double t, double z, const SimConfig& cfg) {
    const double level = stop_level(params, t, z);
    // Under the tilt b the V-drift is theta^2/2 + 1 - theta b = -psi'(kappa) since theta b = 2.
    const IgParams igp{-level, params.dpsi_kappa, params.ddpsi_kappa};
    const StreamFactory f(cfg.seed, cfg.replica_index);
    Stream rng(f, kRootKey, Purpose::stop_time);
    return ig_sample(igp, rng);
}

SpineRealization sample_spine_fpt(const LdpParams& params, double t, double z,
                                  const SimConfig& cfg) {
    if (!(t > 0.0)) throw DomainError("spine horizon must be > 0");
    const double level = stop_level(params, t, z);
    const double tau = sample_stop_time(params, t, z, cfg);
    const double th = params.theta;
    const double s2 = th * th;
    const double c = s2 / 2.0 + 1.0;

    TreeBuilder builder(with_horizon(cfg, t));
    builder.bind_theta(th);
    const StreamFactory& f = builder.streams();
    SpineRealization r;
    r.tilt_beta = params.b;
    r.stop_kind = StopKind::first_passage;
    r.stop_time = tau;
    r.z_offset = z;
    r.level = level;
    r.spine_path.emplace_back(0.0, 0.0);

    // W is a 3-d Brownian bridge from (alpha, 0, 0) at time 0 to the origin at tau,
    // and the spine's V-path before the stop is level + |W|.
    std::array<double, 3> w{-level, 0.0, 0.0};
    auto norm = [](const std::array<double, 3>& v) {
        return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    };
    auto x_of = [&](double time, const std::array<double, 3>& v) {
        return (c * time - (level + norm(v))) / th;
    };

    std::uint64_t key = kRootKey;
    ParticleId parent = kNoParticle;
    int side = 0;
    double t0 = 0.0;
    double x0 = 0.0;
    for (;;) {
        Stream clock(f, key, Purpose::spine_clock);
        Stream path(f, key, Purpose::spine_path);
        const double tb = t0 + clock.exponential(2.0);
        const double pre_end = std::min(tau, t);

        SegmentPath sp;
        sp.knots.push_back(PathKnot{t0, x0, {}, w});
        sp.span_group.push_back(0);

        if (tb < pre_end) {
            std::array<double, 3> w1{};
            for (int k = 0; k < 3; ++k) w1[k] = bridge_point(t0, w[k], tau, 0.0, tb, s2, path.normal());
            const double x1 = x_of(tb, w1);
            sp.knots.push_back(PathKnot{tb, x1, w1, {}});
            sp.groups.push_back(PathGroup{level, tau, false});
            const ParticleId id = builder.add(parent, side, t0, x0, tb, x1, false, key);
            builder.set_path(id, std::move(sp));
            r.spine_ids.push_back(id);
            r.spine_path.emplace_back(tb, x1);
            r.spine_branch_times.push_back(tb);
            const int next = spine_child(f, key);
            grow_bbm(builder, child_key(key, 1 - next), id, 1 - next, tb, x1);
            key = child_key(key, next);
            parent = id;
            side = next;
            t0 = tb;
            x0 = x1;
            w = w1;
            continue;
        }

        if (tau < t) {
            // The stop falls inside this lifetime. From tau on the particle is ordinary:
            // a fresh Exp(1) residual lifetime by memorylessness, no drift.
            const double x_tau = (c * tau - level) / th;
            const double residual = clock.exponential(1.0);
            const bool leaf = tau + residual >= t;
            const double t1 = leaf ? t : tau + residual;
            const double x1 = x_tau + std::sqrt(t1 - tau) * path.normal();
            sp.knots.push_back(PathKnot{tau, x_tau, {}, {}});
            sp.knots.push_back(PathKnot{t1, x1, {}, {}});
            sp.span_group.push_back(-1);
            sp.groups.push_back(PathGroup{level, tau, true});
            const ParticleId id = builder.add(parent, side, t0, x0, t1, x1, leaf, key);
            builder.set_path(id, std::move(sp));
            r.spine_ids.push_back(id);
            r.spine_path.emplace_back(tau, x_tau);
            r.spine_path.emplace_back(t1, x1);
            if (!leaf) {
                grow_bbm(builder, child_key(key, 0), id, 0, t1, x1);
                grow_bbm(builder, child_key(key, 1), id, 1, t1, x1);
            }
            break;
        }

        // Horizon reached before the stop: the bridge is cut at t.
        std::array<double, 3> w1{};
        for (int k = 0; k < 3; ++k) w1[k] = bridge_point(t0, w[k], tau, 0.0, t, s2, path.normal());
        const double x1 = x_of(t, w1);
        sp.knots.push_back(PathKnot{t, x1, w1, {}});
        sp.groups.push_back(PathGroup{level, tau, tau == t});
        const ParticleId id = builder.add(parent, side, t0, x0, t, x1, true, key);
        builder.set_path(id, std::move(sp));
        r.spine_ids.push_back(id);
        r.spine_path.emplace_back(t, x1);
        break;
    }
    r.tree = builder.finish();
    return r;
}

bool is_global_first_passage(const SpineRealization& r) {
    if (r.stop_kind != StopKind::first_passage)
        throw std::logic_error("global first passage needs a first-passage spine");
    const ParticleTree& tree = r.tree;
    std::vector<char> on_spine(tree.size(), 0);
    for (ParticleId id : r.spine_ids) on_spine[static_cast<std::size_t>(id)] = 1;
    for (const Segment& s : tree.segments()) {
        if (on_spine[static_cast<std::size_t>(s.particle_id)] || s.t_birth >= r.stop_time) continue;
        if (auto hit = tree.v_first_hit(s.particle_id, r.level, r.stop_time))
            if (*hit < r.stop_time) return false;
    }
    return true;
}

WindowPlan plan_window(const LdpParams& params, double t, double z) {
    WindowPlan w;
    w.z = z;
    w.lower = params.hit_level(t) + z;
    w.upper = w.lower + 1.0;
    if (w.lower >= 0.0) {
        w.route = WindowRoute::empty;
        w.weight = 0.0;
    } else if (w.upper >= 0.0) {
        w.route = WindowRoute::direct;
        w.upper = 0.0;
        w.weight = 1.0;
    } else {
        w.route = WindowRoute::importance;
        w.weight = std::exp(-params.rate_I * t + params.kappa * (z + 1.0));
    }
    return w;
}

double level_threshold(const LdpParams& params, double t, double y) noexcept {
    return y * std::exp(params.a * t) / std::sqrt(t);
}

namespace {

void score_details(const ParticleTree& tree, const LdpParams& params, double t,
                   WindowSample& s) {
    const MinRecord mr = v_process_min(tree, params);
    s.evaluated = true;
    s.I = mr.value_I;
    s.s_argmin = mr.argmin_time;
    s.max_position = max_position(tree, t);
    Stream rng(tree.streams(), kRootKey, Purpose::pair);
    const LevelPair pair = sample_level_pair(tree, t, params.x * t, rng);
    s.overlap = pair.mrca_time;
    s.overlap_position = pair.mrca_position;
    s.pair_same = pair.same_particle;
}

}  // namespace

WindowSample score_window(const LdpParams& params, double t, const WindowPlan& plan,
                          const SimConfig& cfg, double detail_threshold) {
    WindowSample s;
    if (plan.route == WindowRoute::empty) return s;
    const double level = params.x * t;
    const double threshold = std::max(detail_threshold, 1.0);
    s.weight = plan.weight;

    if (plan.route == WindowRoute::direct) {
        const ParticleTree tree = simulate(with_horizon(cfg, t));
        s.passage = true;
        s.accepted = true;
        s.stop_time = 0.0;  // V starts at the clipped upper edge 0
        s.level_count = level_set_count(tree, t, level);
        if (static_cast<double>(s.level_count) >= threshold) {
            score_details(tree, params, t, s);
            s.in_window = s.I >= plan.lower;
        }
        return s;
    }

    const double z_stop = plan.z + 1.0;
    s.stop_time = sample_stop_time(params, t, z_stop, cfg);
    if (s.stop_time >= t) return s;
    s.passage = true;
    const SpineRealization r = sample_spine_fpt(params, t, z_stop, cfg);
    s.accepted = is_global_first_passage(r);
    if (!s.accepted) return s;
    s.level_count = level_set_count(r.tree, t, level);
    if (static_cast<double>(s.level_count) >= threshold) {
        score_details(r.tree, params, t, s);
        s.in_window = s.I >= plan.lower;
    }
    return s;
}

double window_value(const WindowSample& s, double threshold) noexcept {
    const bool hit = s.accepted && s.evaluated && s.in_window &&
                     static_cast<double>(s.level_count) >= threshold;
    return hit ? s.weight : 0.0;
}

std::uint64_t window_replica(double z, std::uint64_t i) noexcept {
    return replica_id(kDomainSpine, hash_double(z), i);
}

namespace {

std::vector<WindowSample> run_window(const LdpParams& params, double t, const WindowPlan& plan,
                                     std::int64_t n, const SimConfig& cfg, double threshold,
                                     int workers) {
    return parallel_map<WindowSample>(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        SimConfig c = cfg;
        c.replica_index = window_replica(plan.z, i);
        return score_window(params, t, plan, c, threshold);
    });
}

WindowEstimate summarize_window(const WindowPlan& plan, const std::vector<WindowSample>& samples,
                                double threshold, std::uint64_t seed) {
    WindowEstimate we;
    we.plan = plan;
    std::vector<double> values;
    values.reserve(samples.size());
    std::int64_t accepted = 0;
    for (const WindowSample& s : samples) {
        values.push_back(window_value(s, threshold));
        accepted += s.accepted ? 1 : 0;
    }
    const char* method = plan.route == WindowRoute::importance ? "spine"
                         : plan.route == WindowRoute::direct   ? "spine-direct"
                                                               : "spine-empty";
    if (values.empty()) {
        we.estimate = Estimate{0.0, 0.0, 0, method, seed};
    } else {
        we.estimate = mean_estimate(values, method, seed);
        we.acceptance = static_cast<double>(accepted) / static_cast<double>(values.size());
    }
    return we;
}

}  // namespace

WindowEstimate ldp_window_estimator(const LdpParams& params, double t, double y, double z,
                                    std::int64_t n, const SimConfig& cfg, int workers) {
    if (n < 1) throw DomainError("replica count must be >= 1");
    const WindowPlan plan = plan_window(params, t, z);
    const double threshold = level_threshold(params, t, y);
    const auto samples = run_window(params, t, plan, n, cfg, threshold, workers);
    return summarize_window(plan, samples, threshold, cfg.seed);
}

SpineLdpResult combine_windows(const LdpParams& params, double t, double y, int z_min,
                               const std::vector<WindowPlan>& plans,
                               const std::vector<std::vector<WindowSample>>& samples,
                               std::uint64_t seed) {
    SpineLdpResult res;
    const double threshold = level_threshold(params, t, y);
    std::vector<Estimate> parts;
    std::int64_t is_count = 0;
    std::int64_t is_accepted = 0;
    for (std::size_t k = 0; k < plans.size(); ++k) {
        res.windows.push_back(summarize_window(plans[k], samples[k], threshold, seed));
        parts.push_back(res.windows.back().estimate);
        if (plans[k].route == WindowRoute::importance) {
            for (const WindowSample& s : samples[k]) {
                ++is_count;
                is_accepted += s.accepted ? 1 : 0;
            }
        }
    }
    res.combined = sum_estimates(parts, "spine", seed);
    res.tail_bound = std::exp(-params.rate_I * t + params.kappa * static_cast<double>(z_min));
    res.acceptance = is_count > 0 ? static_cast<double>(is_accepted) / static_cast<double>(is_count) : 0.0;
    return res;
}

SpineLdpResult ldp_spine_estimate(const LdpParams& params, double t, double y, int z_min,
                                  int z_max, std::int64_t n_per_window, const SimConfig& cfg,
                                  int workers) {
    if (z_max <= z_min) throw DomainError("z_max must exceed z_min");
    if (n_per_window < 1) throw DomainError("replicas per window must be >= 1");
    const double threshold = level_threshold(params, t, y);
    std::vector<WindowPlan> plans;
    std::vector<std::vector<WindowSample>> samples;
    for (int z = z_min; z < z_max; ++z) {
        plans.push_back(plan_window(params, t, z));
        samples.push_back(run_window(params, t, plans.back(), n_per_window, cfg, threshold, workers));
    }
    return combine_windows(params, t, y, z_min, plans, samples, cfg.seed);
}

}  // namespace bbmld
