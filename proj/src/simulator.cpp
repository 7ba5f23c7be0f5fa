#include "bbmld/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "bbmld/errors.hpp"

namespace bbmld {

namespace {

struct Pending {
    std::uint64_t key;
    ParticleId parent;
    int side;
    double t0;
    double x0;
};

// One particle's lifetime and end point. Both draws come from the particle's own block.
struct Life {
    double t_end;
    double x_end;
    bool leaf;
};

Life live(const StreamFactory& f, std::uint64_t key, double t0, double x0, double horizon) {
    Stream rng(f, key, Purpose::particle);
    const double lifetime = rng.exponential();
    const double z = rng.normal();
    const bool leaf = t0 + lifetime >= horizon;
    const double t1 = leaf ? horizon : t0 + lifetime;
    return {t1, x0 + std::sqrt(t1 - t0) * z, leaf};
}

}  // namespace

void grow_bbm(TreeBuilder& builder, std::uint64_t key, ParticleId parent, int side, double t0,
              double x0) {
    const double horizon = builder.config().horizon;
    std::vector<Pending> stack{{key, parent, side, t0, x0}};
    while (!stack.empty()) {
        const Pending cur = stack.back();
        stack.pop_back();
        const Life l = live(builder.streams(), cur.key, cur.t0, cur.x0, horizon);
        const ParticleId id =
            builder.add(cur.parent, cur.side, cur.t0, cur.x0, l.t_end, l.x_end, l.leaf, cur.key);
        if (l.leaf) continue;
        stack.push_back({child_key(cur.key, 1), id, 1, l.t_end, l.x_end});
        stack.push_back({child_key(cur.key, 0), id, 0, l.t_end, l.x_end});
    }
}

ParticleTree simulate(const SimConfig& cfg) {
    TreeBuilder builder(cfg);
    grow_bbm(builder, kRootKey, kNoParticle, 0, 0.0, 0.0);
    return builder.finish();
}

std::int64_t for_each_leaf(const SimConfig& cfg, const std::function<void(double)>& visit) {
    validate(cfg);
    const StreamFactory f(cfg.seed, cfg.replica_index);
    struct Item {
        std::uint64_t key;
        double t0;
        double x0;
    };
    std::vector<Item> stack{{kRootKey, 0.0, 0.0}};
    std::int64_t leaves = 0;
    while (!stack.empty()) {
        const Item cur = stack.back();
        stack.pop_back();
        const Life l = live(f, cur.key, cur.t0, cur.x0, cfg.horizon);
        if (l.leaf) {
            if (++leaves > cfg.max_particles) {
                std::ostringstream msg;
                msg << "population exceeded max_particles=" << cfg.max_particles;
                throw PopulationCapExceeded(msg.str());
            }
            visit(l.x_end);
            continue;
        }
        stack.push_back({child_key(cur.key, 1), l.t_end, l.x_end});
        stack.push_back({child_key(cur.key, 0), l.t_end, l.x_end});
    }
    return leaves;
}

namespace {

// First hit of 0 by the clearance d = g - X on [ta, tb], given that it does hit there.
// Midpoints are drawn from the bridge law conditioned on the crossing by rejection.
double locate_hit(double ta, double da, double tb, double db, Stream& rng, double dt) {
    if (da <= 0.0) return ta;
    while (tb - ta > dt) {
        const double tm = 0.5 * (ta + tb);
        double dm = 0.0;
        double pl = 1.0;
        double pc = 1.0;
        for (int tries = 0; tries < 100000; ++tries) {
            dm = bridge_point(ta, da, tb, db, tm, 1.0, rng.normal());
            pl = bridge_crossing_probability(da, dm, tm - ta);
            const double pr = bridge_crossing_probability(dm, db, tb - tm);
            pc = 1.0 - (1.0 - pl) * (1.0 - pr);
            if (pc >= 1.0 || rng.uniform() < pc) break;
        }
        if (rng.uniform() * pc < pl) {
            tb = tm;
            db = dm;
        } else {
            ta = tm;
            da = dm;
        }
    }
    return 0.5 * (ta + tb);
}

}  // namespace

CrossingResult segment_crosses_line(const Segment& segment, const AffineBoundary& boundary,
                                    Stream& rng, CrossingMode mode, double dt) {
    const double t0 = segment.t_birth;
    const double t1 = segment.t_end;
    const double d0 = boundary(t0) - segment.x_birth;
    const double d1 = boundary(t1) - segment.x_end;
    if (d0 <= 0.0) return {true, t0};
    if (!(t1 > t0)) return {false, std::nullopt};

    if (mode == CrossingMode::grid_only) {
        const auto steps = static_cast<long>(std::ceil((t1 - t0) / dt));
        double tp = t0;
        double xp = segment.x_birth;
        for (long k = 1; k <= steps; ++k) {
            const double tk = k == steps ? t1 : t0 + static_cast<double>(k) * dt;
            const double xk = k == steps
                                  ? segment.x_end
                                  : bridge_point(tp, xp, t1, segment.x_end, tk, 1.0, rng.normal());
            if (boundary(tk) - xk <= 0.0) return {true, tk};
            tp = tk;
            xp = xk;
        }
        return {false, std::nullopt};
    }

    const double u = rng.uniform();
    if (d1 > 0.0 && u >= bridge_crossing_probability(d0, d1, t1 - t0)) return {false, std::nullopt};
    return {true, locate_hit(t0, d0, t1, d1, rng, dt)};
}

}  // namespace bbmld
