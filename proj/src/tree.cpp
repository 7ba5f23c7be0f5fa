#include "bbmld/tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bbmld/errors.hpp"

namespace bbmld {

namespace {

double norm3(const std::array<double, 3>& w) noexcept {
    return std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
}

}  // namespace

void validate(const SimConfig& cfg) {
    if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon))
        throw DomainError("horizon must be a finite number >= 0");
    if (cfg.max_particles < 1) throw DomainError("max_particles must be >= 1");
    if (!(cfg.bridge_grid_dt > 0.0)) throw DomainError("bridge_grid_dt must be > 0");
}

std::uint64_t child_key(std::uint64_t key, int side) noexcept {
    return hash_combine(key, static_cast<std::uint64_t>(side + 1));
}

const Segment& ParticleTree::segment(ParticleId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= segments_.size()) {
        std::ostringstream msg;
        msg << "unknown particle " << id;
        throw UnknownParticle(msg.str());
    }
    return segments_[static_cast<std::size_t>(id)];
}

std::uint64_t ParticleTree::lineage_key(ParticleId id) const {
    (void)segment(id);
    return keys_[static_cast<std::size_t>(id)];
}

std::array<ParticleId, 2> ParticleTree::children(ParticleId id) const {
    (void)segment(id);
    return children_[static_cast<std::size_t>(id)];
}

bool ParticleTree::alive_at(ParticleId id, double r) const {
    const Segment& s = segment(id);
    if (s.is_leaf_at_horizon && r == horizon_) return s.t_birth <= r;
    return s.t_birth <= r && r < s.t_end;
}

std::vector<ParticleId> ParticleTree::alive_at(double r) const {
    std::vector<ParticleId> out;
    if (r == horizon_) return leaves_;
    for (const Segment& s : segments_)
        if (s.t_birth <= r && r < s.t_end) out.push_back(s.particle_id);
    return out;
}

void ParticleTree::check_time(ParticleId id, double t) const {
    const Segment& s = segment(id);
    if (!(t >= s.t_birth && t <= s.t_end)) {
        std::ostringstream msg;
        msg << "time " << t << " outside segment [" << s.t_birth << ", " << s.t_end
            << "] of particle " << id;
        throw TimeOutsideSegment(msg.str());
    }
}

SegmentPath& ParticleTree::path_ref(ParticleId id) const {
    const Segment& s = segment(id);
    auto it = paths_.find(id);
    if (it != paths_.end()) return it->second;
    SegmentPath p;
    p.knots.push_back(PathKnot{s.t_birth, s.x_birth, {}, {}});
    p.knots.push_back(PathKnot{s.t_end, s.x_end, {}, {}});
    p.span_group.push_back(-1);
    return paths_.emplace(id, std::move(p)).first->second;
}

const SegmentPath& ParticleTree::path(ParticleId id) const { return path_ref(id); }

std::size_t ParticleTree::knot_count(ParticleId id) const {
    auto it = paths_.find(id);
    return it == paths_.end() ? 2 : it->second.knots.size();
}

void ParticleTree::bind_theta(double theta) const {
    if (!(theta > 0.0)) throw DomainError("theta must be > 0");
    if (theta_ && *theta_ != theta)
        throw std::logic_error("tree already bound to a different theta");
    theta_ = theta;
}

double ParticleTree::v_const() const {
    if (!theta_) throw std::logic_error("V-process query on a tree without theta");
    return *theta_ * *theta_ / 2.0 + 1.0;
}

double ParticleTree::knot_v_left(const SegmentPath& p, std::size_t k) const {
    if (k > 0) {
        const int g = p.span_group[k - 1];
        if (g >= 0) return p.groups[static_cast<std::size_t>(g)].base + norm3(p.knots[k].wl);
    }
    return v_const() * p.knots[k].t - *theta_ * p.knots[k].x;
}

double ParticleTree::knot_v_right(const SegmentPath& p, std::size_t k) const {
    if (k + 1 < p.knots.size()) {
        const int g = p.span_group[k];
        if (g >= 0) return p.groups[static_cast<std::size_t>(g)].base + norm3(p.knots[k].wr);
    }
    return knot_v_left(p, k);
}

std::uint64_t ParticleTree::span_subject(ParticleId id, double ta, double tb) const {
    return hash_combine(hash_combine(keys_[static_cast<std::size_t>(id)], hash_double(ta)),
                        hash_double(tb));
}

std::size_t ParticleTree::span_index(const SegmentPath& p, double ta) const {
    auto it = std::lower_bound(p.knots.begin(), p.knots.end(), ta,
                               [](const PathKnot& k, double t) { return k.t < t; });
    return static_cast<std::size_t>(it - p.knots.begin());
}

std::size_t ParticleTree::insert_knot(ParticleId id, SegmentPath& p, std::size_t span,
                                      double t) const {
    const PathKnot& a = p.knots[span];
    const PathKnot& b = p.knots[span + 1];
    Stream rng(streams_, hash_combine(span_subject(id, a.t, b.t), hash_double(t)),
               Purpose::bridge);
    PathKnot k;
    k.t = t;
    const int g = p.span_group[span];
    if (g < 0) {
        k.x = bridge_point(a.t, a.x, b.t, b.x, t, 1.0, rng.normal());
    } else {
        const double th = *theta_;
        for (int c = 0; c < 3; ++c)
            k.wl[c] = bridge_point(a.t, a.wr[c], b.t, b.wl[c], t, th * th, rng.normal());
        k.wr = k.wl;
        const double v = p.groups[static_cast<std::size_t>(g)].base + norm3(k.wl);
        k.x = (v_const() * t - v) / th;
    }
    p.knots.insert(p.knots.begin() + static_cast<std::ptrdiff_t>(span + 1), k);
    p.span_group.insert(p.span_group.begin() + static_cast<std::ptrdiff_t>(span + 1), g);
    return span + 1;
}

double ParticleTree::position_at(ParticleId id, double t) const {
    check_time(id, t);
    const Segment& s = segments_[static_cast<std::size_t>(id)];
    if (t == s.t_birth) return s.x_birth;
    if (t == s.t_end) return s.x_end;
    SegmentPath& p = path_ref(id);
    const std::size_t k = span_index(p, t);
    if (k < p.knots.size() && p.knots[k].t == t) return p.knots[k].x;
    const std::size_t idx = insert_knot(id, p, k - 1, t);
    return p.knots[idx].x;
}

double ParticleTree::v_at(ParticleId id, double t) const {
    check_time(id, t);
    const double x = position_at(id, t);
    SegmentPath& p = path_ref(id);
    const std::size_t k = span_index(p, t);
    if (k < p.knots.size() && p.knots[k].t == t) return knot_v_right(p, k);
    return v_const() * t - *theta_ * x;
}

void ParticleTree::materialize(ParticleId id, SegmentPath& p) const {
    const double c = v_const();
    const double th = *theta_;
    const double s2 = th * th;
    std::size_t i = 0;
    while (i + 1 < p.knots.size()) {
        if (p.span_group[i] >= 0) {
            ++i;
            continue;
        }
        const double ta = p.knots[i].t;
        const double tb = p.knots[i + 1].t;
        const double dt = tb - ta;
        if (!(dt > 0.0)) {
            ++i;
            continue;
        }
        const double v0 = c * ta - th * p.knots[i].x;
        const double v1 = c * tb - th * p.knots[i + 1].x;
        const std::uint64_t subject = span_subject(id, ta, tb);
        const double u = Stream(streams_, subject, Purpose::extremum).uniform();
        const double m = std::min(bridge_minimum(v0, v1, dt, s2, u), std::min(v0, v1));
        Stream arg(streams_, subject, Purpose::argmin);
        const double rho = ta + bridge_argmin(v0, v1, m, dt, s2, arg);

        const int g = static_cast<int>(p.groups.size());
        p.groups.push_back(PathGroup{m, rho, true});
        p.span_group[i] = g;
        p.knots[i].wr = {v0 - m, 0.0, 0.0};
        p.knots[i + 1].wl = {v1 - m, 0.0, 0.0};
        if (rho > ta && rho < tb) {
            PathKnot z;
            z.t = rho;
            z.x = (c * rho - m) / th;
            p.knots.insert(p.knots.begin() + static_cast<std::ptrdiff_t>(i + 1), z);
            p.span_group.insert(p.span_group.begin() + static_cast<std::ptrdiff_t>(i + 1), g);
            i += 2;
        } else {
            if (rho <= ta) p.knots[i].wr = {};
            else p.knots[i + 1].wl = {};
            ++i;
        }
    }
}

double ParticleTree::refine_min(ParticleId id, SegmentPath& p, double ta, double tb,
                                double& at) const {
    const std::size_t i = span_index(p, ta);
    const double va = knot_v_right(p, i);
    const double vb = knot_v_left(p, i + 1);
    if (tb - ta <= cfg_.bridge_grid_dt) {
        at = va <= vb ? ta : tb;
        return std::min(va, vb);
    }
    const double mid = 0.5 * (ta + tb);
    insert_knot(id, p, i, mid);
    double at_l = ta;
    double at_r = tb;
    const double l = refine_min(id, p, ta, mid, at_l);
    const double r = refine_min(id, p, mid, tb, at_r);
    at = l <= r ? at_l : at_r;
    return std::min(l, r);
}

SegmentMin ParticleTree::v_min(ParticleId id, double refine_below) const {
    v_const();
    const Segment& s = segment(id);
    SegmentPath& p = path_ref(id);
    materialize(id, p);
    SegmentMin best{knot_v_right(p, 0), s.t_birth, true};
    for (std::size_t k = 1; k < p.knots.size(); ++k) {
        const double v = knot_v_left(p, k);
        if (v < best.value) best = {v, p.knots[k].t, true};
    }
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
        const PathGroup& grp = p.groups[g];
        if (grp.attained) {
            if (grp.base < best.value) best = {grp.base, grp.zero_time, best.exact};
            continue;
        }
        if (!(grp.base < refine_below)) continue;
        std::vector<std::pair<double, double>> spans;
        for (std::size_t i = 0; i + 1 < p.knots.size(); ++i)
            if (p.span_group[i] == static_cast<int>(g))
                spans.emplace_back(p.knots[i].t, p.knots[i + 1].t);
        for (auto [ta, tb] : spans) {
            double at = ta;
            const double v = refine_min(id, p, ta, tb, at);
            best.exact = false;
            if (v < best.value) best = {v, at, false};
        }
    }
    return best;
}

bool ParticleTree::v_may_reach(ParticleId id, double level) const {
    const double c = v_const();
    const double th = *theta_;
    if (paths_.find(id) != paths_.end()) return true;
    const Segment& s = segment(id);
    const double v0 = c * s.t_birth - th * s.x_birth;
    const double v1 = c * s.t_end - th * s.x_end;
    if (v0 <= level || v1 <= level) return true;
    const double dt = s.t_end - s.t_birth;
    if (!(dt > 0.0)) return false;
    const double u =
        Stream(streams_, span_subject(id, s.t_birth, s.t_end), Purpose::extremum).uniform();
    return u <= bridge_crossing_probability(v0 - level, v1 - level, dt, th * th);
}

bool ParticleTree::crosses_line(ParticleId id, const AffineBoundary& boundary) const {
    SegmentPath& p = path_ref(id);
    for (std::size_t i = 0; i + 1 < p.knots.size(); ++i) {
        const PathKnot& a = p.knots[i];
        const PathKnot& b = p.knots[i + 1];
        const double da = boundary(a.t) - a.x;
        const double db = boundary(b.t) - b.x;
        if (da <= 0.0 || db <= 0.0) return true;
        const double dt = b.t - a.t;
        if (!(dt > 0.0)) continue;
        const int g = p.span_group[i];
        if (g < 0) {
            const double u = Stream(streams_, span_subject(id, a.t, b.t), Purpose::extremum).uniform();
            if (u <= bridge_crossing_probability(da, db, dt, 1.0)) return true;
            continue;
        }
        const double c = v_const();
        const double th = *theta_;
        const double slope = c / th;
        if (std::fabs(boundary.slope - slope) > 1e-12 * std::fabs(slope))
            throw std::logic_error("conditioned spans only support boundaries that are V-levels");
        const double level = -th * boundary.intercept;
        const PathGroup& grp = p.groups[static_cast<std::size_t>(g)];
        if (grp.base > level) continue;
        if (grp.attained) return true;
        const double ta = a.t;
        const double tb = b.t;
        double at = ta;
        if (refine_min(id, p, ta, tb, at) <= level) return true;
        // refine_min inserted knots; step over them.
        i = span_index(p, tb) - 1;
    }
    return false;
}

std::optional<double> ParticleTree::hit_in_span(ParticleId id, SegmentPath& p, double ta,
                                                double tb, double h) const {
    const std::size_t i = span_index(p, ta);
    const double ha = norm3(p.knots[i].wr);
    const double hb = norm3(p.knots[i + 1].wl);
    if (ha <= h) return ta;
    const bool certain = hb <= h;
    const double dt = tb - ta;
    double prob = 1.0;
    if (!certain) {
        const double th = *theta_;
        prob = bes3_crossing_probability(ha, hb, h, dt, th * th);
        if (prob < 1e-12) return std::nullopt;
    }
    if (dt <= cfg_.bridge_grid_dt) {
        if (certain) return tb;
        const double u = Stream(streams_, span_subject(id, ta, tb), Purpose::refine).uniform();
        if (u < prob) return 0.5 * (ta + tb);
        return std::nullopt;
    }
    const double mid = 0.5 * (ta + tb);
    insert_knot(id, p, i, mid);
    if (auto left = hit_in_span(id, p, ta, mid, h)) return left;
    return hit_in_span(id, p, mid, tb, h);
}

std::optional<double> ParticleTree::v_first_hit(ParticleId id, double level, double t_to) const {
    v_const();
    const Segment& s = segment(id);
    t_to = std::min(t_to, s.t_end);
    if (t_to < s.t_birth) return std::nullopt;
    if (t_to > s.t_birth && t_to < s.t_end) position_at(id, t_to);
    SegmentPath& p = path_ref(id);
    materialize(id, p);

    std::size_t i = 0;
    while (i + 1 < p.knots.size() && p.knots[i + 1].t <= t_to) {
        const double ta = p.knots[i].t;
        const double tb = p.knots[i + 1].t;
        if (knot_v_right(p, i) <= level) return ta;
        const int g = p.span_group[i];
        if (g >= 0 && tb > ta) {
            const double base = p.groups[static_cast<std::size_t>(g)].base;
            if (base <= level) {
                if (auto hit = hit_in_span(id, p, ta, tb, level - base)) return hit;
            }
        }
        i = span_index(p, tb);
    }
    const std::size_t last = span_index(p, t_to);
    if (last < p.knots.size() && p.knots[last].t == t_to && knot_v_left(p, last) <= level)
        return t_to;
    return std::nullopt;
}

TreeBuilder::TreeBuilder(const SimConfig& cfg) {
    validate(cfg);
    tree_.cfg_ = cfg;
    tree_.horizon_ = cfg.horizon;
    tree_.streams_ = StreamFactory(cfg.seed, cfg.replica_index);
    tree_.digest_ = hash_combine(cfg.seed, cfg.replica_index);
}

ParticleId TreeBuilder::add(ParticleId parent, int side, double t0, double x0, double t1,
                            double x1, bool leaf, std::uint64_t key) {
    const auto id = static_cast<ParticleId>(tree_.segments_.size());
    tree_.segments_.push_back(Segment{id, parent, t0, x0, t1, x1, leaf});
    tree_.keys_.push_back(key);
    tree_.children_.push_back({kNoParticle, kNoParticle});
    if (parent != kNoParticle) tree_.children_[static_cast<std::size_t>(parent)][side] = id;
    if (leaf) {
        tree_.leaves_.push_back(id);
        if (static_cast<std::int64_t>(tree_.leaves_.size()) > tree_.cfg_.max_particles) {
            std::ostringstream msg;
            msg << "population exceeded max_particles=" << tree_.cfg_.max_particles
                << " (expected population is e^t)";
            throw PopulationCapExceeded(msg.str());
        }
    }
    std::uint64_t h = hash_combine(static_cast<std::uint64_t>(parent), hash_double(t0));
    h = hash_combine(h, hash_double(x0));
    h = hash_combine(h, hash_double(t1));
    h = hash_combine(h, hash_double(x1));
    tree_.digest_ = hash_combine(tree_.digest_, h);
    return id;
}

void TreeBuilder::set_path(ParticleId id, SegmentPath path) {
    tree_.paths_[id] = std::move(path);
}

void TreeBuilder::bind_theta(double theta) { tree_.bind_theta(theta); }

ParticleTree TreeBuilder::finish() { return std::move(tree_); }

}  // namespace bbmld
