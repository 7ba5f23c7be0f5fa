#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bbmld/errors.hpp"
#include "bbmld/simulator.hpp"
#include "bbmld/stats.hpp"

using namespace bbmld;
using doctest::Approx;

namespace {

SimConfig config(double horizon, std::uint64_t replica, std::uint64_t seed = 1) {
    SimConfig c;
    c.horizon = horizon;
    c.seed = seed;
    c.replica_index = replica;
    return c;
}

}  // namespace

TEST_CASE("zero horizon is a single root") {
    const ParticleTree tree = simulate(config(0.0, 0));
    REQUIRE(tree.size() == 1);
    CHECK(tree.segment(0).length() == 0.0);
    CHECK(tree.segment(0).x_end == 0.0);
    CHECK(tree.leaves().size() == 1);
    CHECK_FALSE(tree.segment(0).has_parent());
}

TEST_CASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(simulate(config(-1.0, 0)), DomainError);
    SimConfig c = config(1.0, 0);
    c.max_particles = 0;
    CHECK_THROWS_AS(simulate(c), DomainError);
}

TEST_CASE("same coordinates give bit-identical trees") {
    const ParticleTree a = simulate(config(6.0, 3));
    const ParticleTree b = simulate(config(6.0, 3));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Segment& s = a.segments()[i];
        const Segment& u = b.segments()[i];
        CHECK(s.particle_id == u.particle_id);
        CHECK(s.parent_id == u.parent_id);
        CHECK(s.t_birth == u.t_birth);
        CHECK(s.t_end == u.t_end);
        CHECK(s.x_end == u.x_end);
    }
    CHECK(a.rng_state_digest() == b.rng_state_digest());
    CHECK(simulate(config(6.0, 4)).rng_state_digest() != a.rng_state_digest());
    CHECK(simulate(config(6.0, 3, 2)).rng_state_digest() != a.rng_state_digest());
}

TEST_CASE("tree structure") {
    const ParticleTree tree = simulate(config(5.0, 11));
    for (const Segment& s : tree.segments()) {
        if (s.has_parent()) {
            const Segment& parent = tree.segment(s.parent_id);
            CHECK(s.parent_id < s.particle_id);
            CHECK(parent.t_end == s.t_birth);
            CHECK(parent.x_end == s.x_birth);
        }
        CHECK(s.is_leaf_at_horizon == (s.t_end == tree.horizon()));
    }
    for (ParticleId id : tree.leaves()) CHECK(tree.alive_at(id, tree.horizon()));
    CHECK(tree.alive_at(tree.horizon()).size() == tree.leaves().size());
}

TEST_CASE("population cap") {
    SimConfig c = config(12.0, 0);
    c.max_particles = 50;
    CHECK_THROWS_AS(simulate(c), PopulationCapExceeded);
    CHECK_THROWS_AS(for_each_leaf(c, [](double) {}), PopulationCapExceeded);
}

TEST_CASE("leaf walk agrees with the stored tree") {
    for (std::uint64_t r = 0; r < 20; ++r) {
        const SimConfig c = config(6.0, r);
        const ParticleTree tree = simulate(c);
        std::vector<double> stored, walked;
        for (ParticleId id : tree.leaves()) stored.push_back(tree.segment(id).x_end);
        const auto n = for_each_leaf(c, [&](double x) { walked.push_back(x); });
        CHECK(n == static_cast<std::int64_t>(stored.size()));
        std::sort(stored.begin(), stored.end());
        std::sort(walked.begin(), walked.end());
        CHECK(stored == walked);
    }
}

TEST_CASE("mean population grows like e^t") {
    Tally pop;
    for (std::uint64_t r = 0; r < 10000; ++r)
        pop.add(static_cast<double>(for_each_leaf(config(5.0, r, 5), [](double) {})));
    CHECK(std::fabs(pop.mean() - std::exp(5.0)) < 3.0 * pop.stderr_iid());
}

TEST_CASE("lifetimes are exponential and increments Gaussian") {
    // Lifetimes of particles born before T - 3 are observed at least up to 3.
    const double T = 7.0, cut = 3.0;
    std::vector<double> lifetimes, increments;
    for (std::uint64_t r = 0; r < 200 && lifetimes.size() < 20000; ++r) {
        const ParticleTree tree = simulate(config(T, r, 6));
        for (const Segment& s : tree.segments()) {
            if (s.t_birth < T - cut) lifetimes.push_back(s.length());
            if (s.length() > 0.0) increments.push_back((s.x_end - s.x_birth) / std::sqrt(s.length()));
        }
    }
    REQUIRE(lifetimes.size() > 5000);
    // Uncensored lifetimes follow Exp(1) truncated at the cut; the censored fraction is e^{-cut}.
    std::vector<double> short_lives;
    for (double l : lifetimes)
        if (l < cut) short_lives.push_back(l);
    const double tail = std::exp(-cut);
    const double n = static_cast<double>(lifetimes.size());
    const double censored = 1.0 - static_cast<double>(short_lives.size()) / n;
    CHECK(std::fabs(censored - tail) < 3.0 * std::sqrt(tail * (1.0 - tail) / n));
    const KsResult life = ks_test(short_lives, {}, [tail, cut](double l) {
        return -std::expm1(-std::clamp(l, 0.0, cut)) / (1.0 - tail);
    });
    CHECK(life.pvalue > 0.01);
    const KsResult inc = ks_test(increments, {}, [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); });
    CHECK(inc.pvalue > 0.01);
}

TEST_CASE("positions inside a segment") {
    Tally mid;
    for (std::uint64_t r = 0; r < 100000; ++r) {
        TreeBuilder b(config(1.0, r, 7));
        b.add(kNoParticle, 0, 0.0, 0.0, 1.0, 0.0, true, kRootKey);
        const ParticleTree tree = b.finish();
        const double x = tree.position_at(0, 0.5);
        CHECK(tree.position_at(0, 0.5) == x);
        mid.add(x);
    }
    CHECK(std::fabs(mid.mean()) < 3.0 * mid.stderr_iid());
    CHECK(mid.variance() == Approx(0.25).epsilon(0.02));

    const ParticleTree tree = simulate(config(4.0, 2));
    const Segment& s = tree.segments().back();
    CHECK(tree.position_at(s.particle_id, s.t_birth) == s.x_birth);
    CHECK(tree.position_at(s.particle_id, s.t_end) == s.x_end);
    CHECK_THROWS_AS(tree.position_at(s.particle_id, s.t_end + 1.0), TimeOutsideSegment);
    CHECK_THROWS_AS(tree.position_at(static_cast<ParticleId>(tree.size()), 0.0), UnknownParticle);
}
