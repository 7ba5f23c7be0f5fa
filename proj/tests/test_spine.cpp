#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bbmld/errors.hpp"
#include "bbmld/inverse_gaussian.hpp"
#include "bbmld/observables.hpp"
#include "bbmld/simulator.hpp"
#include "bbmld/spine.hpp"
#include "bbmld/stats.hpp"

using namespace bbmld;
using doctest::Approx;

namespace {

SimConfig config(std::uint64_t replica, std::uint64_t seed) {
    SimConfig c;
    c.seed = seed;
    c.replica_index = replica;
    return c;
}

const LdpParams kP = derive(1.0, 0.55);

}  // namespace

TEST_CASE("tilted spine moves with drift beta and branches at rate 2") {
    Tally disp, branches;
    for (std::uint64_t r = 0; r < 10000; ++r) {
        const SpineRealization s = sample_spine_fixed(0.9, 5.0, config(r, 41));
        disp.add(s.spine_path.back().second);
        branches.add(static_cast<double>(s.spine_branch_times.size()));
        CHECK(s.spine_path.back().first == 5.0);
        CHECK(s.tree.segment(s.spine_tip()).is_leaf_at_horizon);
    }
    CHECK(std::fabs(disp.mean() - 4.5) < 3.0 * disp.stderr_iid());
    CHECK(disp.variance() == Approx(5.0).epsilon(0.05));
    CHECK(std::fabs(branches.mean() - 10.0) < 3.0 * branches.stderr_iid());
}

TEST_CASE("change of measure: E_P[W_t f] = E_Q[f]") {
    // f = 1{M_t >= sqrt2 t} at beta = 0.9, t = 6.
    const double t = 6.0, beta = 0.9, level = std::numbers::sqrt2 * t;
    const int n = 20000;
    Tally p_side, q_side;
    for (int i = 0; i < n; ++i) {
        SimConfig c = config(static_cast<std::uint64_t>(i), 42);
        c.horizon = t;
        const ParticleTree tree = simulate(c);
        const bool hit = max_position(tree, t) >= level;
        p_side.add(hit ? additive_martingale(tree, t, beta) : 0.0);
        const SpineRealization s = sample_spine_fixed(beta, t, config(static_cast<std::uint64_t>(i), 43));
        q_side.add(max_position(s.tree, t) >= level ? 1.0 : 0.0);
    }
    const double se = std::hypot(p_side.stderr_iid(), q_side.stderr_iid());
    CHECK(std::fabs(p_side.mean() - q_side.mean()) < 3.0 * se);
    CHECK(q_side.mean() > 0.05);
}

TEST_CASE("V-drift of the spine tilted by b") {
    const LdpParams q = derive(1.3, 0.4);
    for (const LdpParams& p : {kP, q})
        CHECK(p.theta * p.theta / 2.0 + 1.0 - p.theta * p.b == Approx(-p.dpsi_kappa).epsilon(1e-13));
}

TEST_CASE("stop time is the inverse-Gaussian passage") {
    const double t = 10.0, s = kP.p * t;
    std::vector<double> taus;
    Tally tally;
    for (std::uint64_t r = 0; r < 100000; ++r) {
        const double tau = sample_stop_time(kP, t, 0.0, config(r, 44));
        taus.push_back(tau);
        tally.add((tau - s) / std::sqrt(s));
    }
    Tally raw;
    for (double v : taus) raw.add(v);
    CHECK(std::fabs(raw.mean() - s) < 3.0 * raw.stderr_iid());
    CHECK(tally.variance() == Approx(kP.ddpsi_kappa / (kP.dpsi_kappa * kP.dpsi_kappa)).epsilon(0.1));
    CHECK(kP.ddpsi_kappa / (kP.dpsi_kappa * kP.dpsi_kappa) == Approx(2.2879740131).epsilon(1e-9));
    const IgParams igp{kP.dpsi_kappa * s, kP.dpsi_kappa, kP.ddpsi_kappa};
    CHECK(ks_test(taus, {}, [&](double x) { return ig_cdf(igp, x); }).pvalue > 0.01);
    CHECK_THROWS_AS(sample_stop_time(kP, t, 1.0, config(0, 44)), DegenerateLevel);
}

TEST_CASE("first-passage spine") {
    const double t = 10.0;
    int global = 0, before = 0;
    for (std::uint64_t r = 0; r < 300; ++r) {
        const double z = -1.0;
        const SpineRealization s = sample_spine_fpt(kP, t, z, config(r, 45));
        CHECK(s.stop_time == sample_stop_time(kP, t, z, config(r, 45)));
        CHECK(s.level == Approx(kP.hit_level(t) + z).epsilon(1e-14));
        // Before the stop the spine's V stays above the level.
        for (const auto& [time, x] : s.spine_path) {
            const double v = (kP.theta * kP.theta / 2.0 + 1.0) * time - kP.theta * x;
            if (time < s.stop_time) CHECK(v > s.level);
            if (time == s.stop_time) CHECK(v == Approx(s.level).epsilon(1e-9));
        }
        for (double b : s.spine_branch_times) CHECK(b < s.stop_time);
        if (s.stop_time >= t) continue;
        ++before;
        if (!is_global_first_passage(s)) continue;
        ++global;
        const auto fp = first_passage_tau(s.tree, kP, t, z);
        REQUIRE(fp.has_value());
        CHECK(fp->time == Approx(s.stop_time).epsilon(1e-9));
        CHECK(std::find(s.spine_ids.begin(), s.spine_ids.end(), fp->particle) != s.spine_ids.end());
    }
    CHECK(before > 100);
    CHECK(global > 0);
    CHECK(global <= before);
}

TEST_CASE("spine without side trees before the stop is a global first passage") {
    for (std::uint64_t r = 0; r < 2000; ++r) {
        const SpineRealization s = sample_spine_fpt(kP, 10.0, -1.0, config(r, 46));
        if (!s.spine_branch_times.empty()) continue;
        CHECK(is_global_first_passage(s));
    }
    const SpineRealization fixed = sample_spine_fixed(0.9, 1.0, config(0, 46));
    CHECK_THROWS(is_global_first_passage(fixed));
}

TEST_CASE("window plans") {
    const double t = 10.0;
    const WindowPlan imp = plan_window(kP, t, -1.0);
    CHECK(imp.route == WindowRoute::importance);
    CHECK(imp.weight == Approx(std::exp(-kP.rate_I * t + kP.kappa * 0.0)).epsilon(1e-14));
    CHECK(imp.upper - imp.lower == Approx(1.0).epsilon(1e-14));
    const WindowPlan deep = plan_window(kP, t, -4.0);
    CHECK(deep.weight == Approx(std::exp(-kP.rate_I * t - 3.0 * kP.kappa)).epsilon(1e-13));
    const WindowPlan direct = plan_window(kP, t, 0.0);
    CHECK(direct.route == WindowRoute::direct);
    CHECK(direct.weight == 1.0);
    CHECK(direct.upper == 0.0);
    CHECK(plan_window(kP, t, 1.0).route == WindowRoute::empty);
    CHECK(plan_window(kP, t, 1.0).weight == 0.0);
}

TEST_CASE("window replicas carry the deterministic weight") {
    const double t = 10.0;
    for (double z : {-2.0, 0.0}) {
        const WindowPlan plan = plan_window(kP, t, z);
        for (std::uint64_t i = 0; i < 30; ++i) {
            SimConfig c = config(window_replica(z, i), 47);
            const WindowSample s = score_window(kP, t, plan, c, level_threshold(kP, t, 1.0));
            CHECK(s.weight == plan.weight);
            const double v = window_value(s, level_threshold(kP, t, 1.0));
            CHECK((v == 0.0 || v == plan.weight));
            if (s.evaluated && s.in_window) {
                CHECK(s.I <= plan.upper);
                CHECK(s.I > plan.lower);
            }
        }
    }
}

TEST_CASE("an unreachable level set has probability 0") {
    SimConfig c = config(0, 48);
    const WindowEstimate w = ldp_window_estimator(kP, 10.0, 1e12, 0.0, 50, c);
    CHECK(w.estimate.value == 0.0);
    const WindowEstimate imp = ldp_window_estimator(kP, 10.0, 1e12, -1.0, 50, c);
    CHECK(imp.estimate.value == 0.0);
}
