#pragma once

// Brownian-bridge path functionals used by the tree's path cache.
// sigma2 is the diffusion coefficient of the bridged process (1 for X, theta^2 for V).

#include <optional>

#include "bbmld/rng.hpp"

namespace bbmld {

enum class CrossingMode { segment_exact, grid_only };

struct CrossingResult {
    bool crossed = false;
    std::optional<double> t_hit;
};

/// g(t) = intercept + slope * t.
struct AffineBoundary {
    double intercept = 0.0;
    double slope = 0.0;
    [[nodiscard]] double operator()(double t) const noexcept { return intercept + slope * t; }
};

/// P(a bridge with endpoint clearances d0, d1 over dt touches the boundary).
/// Returns 1 when either clearance is <= 0.
double bridge_crossing_probability(double d0, double d1, double dt, double sigma2 = 1.0) noexcept;

/// Minimum of a bridge from v0 to v1 over dt, as the deterministic transform of u ~ U(0,1)
/// that inverts P(min < m) = exp(-2 (v0-m)(v1-m) / (sigma2 dt)).
double bridge_minimum(double v0, double v1, double dt, double sigma2, double u) noexcept;

/// Offset in [0, dt] of the minimum m of a bridge from v0 to v1, sampled exactly.
double bridge_argmin(double v0, double v1, double m, double dt, double sigma2, Stream& rng) noexcept;

/// Probability that a 3-d Bessel bridge between radii ha and hb over dt gets down to
/// radius h <= min(ha, hb). Exact for the one-dimensional Bessel(3) bridge.
double bes3_crossing_probability(double ha, double hb, double h, double dt,
                                 double sigma2 = 1.0) noexcept;

/// Value at time t of a bridge pinned at (ta, xa) and (tb, xb), driven by a standard normal z.
double bridge_point(double ta, double xa, double tb, double xb, double t, double sigma2,
                    double z) noexcept;

}  // namespace bbmld
