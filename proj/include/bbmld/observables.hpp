#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bbmld/params.hpp"
#include "bbmld/rng.hpp"
#include "bbmld/tree.hpp"

namespace bbmld {

struct MinRecord {
    double value_I = 0.0;
    double argmin_time = 0.0;
    ParticleId minimizer_id = 0;
    double resolution = 0.0;  // 0 when the argmin is sampled exactly
};

struct LevelPair {
    ParticleId u1 = 0;
    ParticleId u2 = 0;
    double mrca_time = 0.0;
    double mrca_position = 0.0;
    bool same_particle = false;  // u1 == u2: mrca_time is t by convention
};

struct FirstPassage {
    double time = 0.0;
    ParticleId particle = 0;
};

/// Particles alive at t with position >= y.
std::vector<ParticleId> level_set(const ParticleTree& tree, double t, double y);
std::int64_t level_set_count(const ParticleTree& tree, double t, double y);

double additive_martingale(const ParticleTree& tree, double t, double beta);

/// sum_{v alive at r} e^{beta X_r(v) - (beta^2/2+1) r} W^{(v)}_{T-r}(beta), with T the horizon.
/// Equals additive_martingale(tree, T, beta) by the branching property.
double martingale_decomposition(const ParticleTree& tree, double r, double beta);

double max_position(const ParticleTree& tree, double t);

/// Global minimum of V over [0, horizon] with its time and particle.
MinRecord v_process_min(const ParticleTree& tree, const LdpParams& params);

/// Earliest time any particle's V reaches `level`.
std::optional<FirstPassage> first_passage_to_level(const ParticleTree& tree,
                                                   const LdpParams& params, double level);

/// tau(z): first passage of V to -psi'(kappa) p t + z.
std::optional<FirstPassage> first_passage_tau(const ParticleTree& tree, const LdpParams& params,
                                              double t, double z);

/// Whether some particle reaches the tangent line L_t. In segment_exact mode this is
/// decided span by span in X-space.
bool hits_line(const ParticleTree& tree, const LdpParams& params, double t);

/// Two particles drawn uniformly with replacement from the y-level set at time t.
LevelPair sample_level_pair(const ParticleTree& tree, double t, double y, Stream& rng);

/// sum_v share_v^2 where share_v is the fraction of W_T(beta) carried by descendants of the
/// particle v alive at r; the per-tree summand of OL(r, beta) with W_inf replaced by W_T.
double overlap_square_sum(const ParticleTree& tree, double r, double beta);

}  // namespace bbmld
