#pragma once

#include <cstdint>
#include <functional>

#include "bbmld/bridge.hpp"
#include "bbmld/tree.hpp"

namespace bbmld {

/// Standard binary BBM up to cfg.horizon, deterministic in (seed, replica_index).
ParticleTree simulate(const SimConfig& cfg);

/// Grows a standard BBM below `parent` (as child `side`) starting at (t0, x0) with lineage
/// key `key`. Passing kNoParticle as parent makes it the root.
void grow_bbm(TreeBuilder& builder, std::uint64_t key, ParticleId parent, int side, double t0,
              double x0);

/// Visits the horizon positions of the tree that simulate(cfg) would build, without
/// storing it. Returns the number of leaves.
std::int64_t for_each_leaf(const SimConfig& cfg, const std::function<void(double)>& visit);

/// Crossing of an affine boundary by the Brownian bridge on one segment.
/// segment_exact: Bernoulli with the closed-form probability, hit time by bisection on
/// conditioned bridge midpoints. grid_only: sign check on a dt grid (misses excursions).
CrossingResult segment_crosses_line(const Segment& segment, const AffineBoundary& boundary,
                                    Stream& rng, CrossingMode mode, double dt);

}  // namespace bbmld
