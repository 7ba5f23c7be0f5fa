#include "bbmld/bridge.hpp"

#include <algorithm>
#include <cmath>

#include "bbmld/inverse_gaussian.hpp"

namespace bbmld {

double bridge_crossing_probability(double d0, double d1, double dt, double sigma2) noexcept {
    if (d0 <= 0.0 || d1 <= 0.0) return 1.0;
    if (dt <= 0.0) return 0.0;
    return std::exp(-2.0 * d0 * d1 / (sigma2 * dt));
}

double bridge_minimum(double v0, double v1, double dt, double sigma2, double u) noexcept {
    if (dt <= 0.0) return std::min(v0, v1);
    const double k = -0.5 * sigma2 * dt * std::log(u);
    const double d = v0 - v1;
    return 0.5 * ((v0 + v1) - std::sqrt(d * d + 4.0 * k));
}

double bridge_argmin(double v0, double v1, double m, double dt, double sigma2,
                     Stream& rng) noexcept {
    const double c2 = (v0 - m) * (v0 - m) / (2.0 * sigma2 * dt);
    const double c1 = (v1 - m) * (v1 - m) / (2.0 * sigma2 * dt);
    if (c2 <= 0.0) return 0.0;
    if (c1 <= 0.0) return dt;
    const double ratio = std::sqrt(c1 / c2);
    double w;
    if (rng.uniform() < 1.0 / (1.0 + ratio))
        w = ig_sample_mean_shape(ratio, 2.0 * c1, rng);
    else
        w = 1.0 / ig_sample_mean_shape(1.0 / ratio, 2.0 * c2, rng);
    return std::clamp(dt / (1.0 + w), 0.0, dt);
}

double bes3_crossing_probability(double ha, double hb, double h, double dt,
                                 double sigma2) noexcept {
    if (ha <= h || hb <= h) return 1.0;
    if (dt <= 0.0) return 0.0;
    const double s = sigma2 * dt;
    const double hit_h = std::exp(-2.0 * (ha - h) * (hb - h) / s);
    const double hit_0 = std::exp(-2.0 * ha * hb / s);
    const double den = -std::expm1(-2.0 * ha * hb / s);
    if (!(den > 0.0)) return 1.0;
    return std::clamp((hit_h - hit_0) / den, 0.0, 1.0);
}

double bridge_point(double ta, double xa, double tb, double xb, double t, double sigma2,
                    double z) noexcept {
    const double span = tb - ta;
    if (span <= 0.0) return xa;
    const double w = (t - ta) / span;
    return xa + w * (xb - xa) + std::sqrt(sigma2 * (t - ta) * (tb - t) / span) * z;
}

}  // namespace bbmld
