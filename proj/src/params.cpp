#include "bbmld/params.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "bbmld/errors.hpp"

namespace bbmld {

std::string admissibility_error(double x, double a, double eps) {
    std::ostringstream msg;
    if (!std::isfinite(x) || !std::isfinite(a)) {
        msg << "x and a must be finite";
    } else if (x <= 0.0) {
        msg << "x must be > 0 (got x=" << x << ")";
    } else if (a >= 1.0 - eps) {
        msg << "a must be < 1 (got a=" << a << ")";
    } else {
        const double lower = std::fmax(0.0, 1.0 - 0.5 * x * x);
        if (a <= lower + eps)
            msg << "a must be > (1 - x^2/2)_+ = " << lower << " (got a=" << a << ")";
    }
    return msg.str();
}

LdpParams derive(double x, double a, double eps) {
    if (auto err = admissibility_error(x, a, eps); !err.empty()) throw DomainError(err);
    LdpParams q;
    q.x = x;
    q.a = a;
    const double one_a = 1.0 - a;
    q.theta = 2.0 * one_a / x;
    q.p = one_a * (x * x - 2.0 * one_a) / (x * x - 2.0 * one_a * one_a);
    q.b = x / one_a;
    q.rate_I = x * x / (2.0 * one_a) - 1.0;
    const double th2 = q.theta * q.theta;
    q.kappa = 2.0 / th2;
    q.dpsi_kappa = 1.0 - th2 / 2.0;
    q.ddpsi_kappa = th2;
    q.sigma2_cond = (1.0 - q.p) / (1.0 - q.p + 2.0 * q.p / th2);
    q.v_speed = q.b * q.p + std::numbers::sqrt2 * (1.0 - q.p);
    return q;
}

double psi(const LdpParams& params, double lambda) noexcept {
    // theta^2/2 = 1/kappa, so this is (theta^2 lambda/2 - 1)(lambda - 1) with exact zeros.
    return (lambda - params.kappa) * (lambda - 1.0) / params.kappa;
}

namespace {

void check_window(double t, double r) {
    if (!(r >= 0.0 && r <= t)) {
        std::ostringstream msg;
        msg << "r=" << r << " outside [0, " << t << "]";
        throw RangeError(msg.str());
    }
}

}  // namespace

double curve_F(const LdpParams& params, double t, double r) {
    check_window(t, r);
    if (t == 0.0) return 0.0;
    const double lam = r / t;
    double f = params.x;
    if (params.a + lam <= 1.0) f -= std::sqrt(2.0 * (1.0 - lam) * (1.0 - lam - params.a));
    return t * f;
}

double line_slope(const LdpParams& params) noexcept {
    return (params.theta * params.theta / 2.0 + 1.0) / params.theta;
}

double line_L(const LdpParams& params, double t, double r) {
    check_window(t, r);
    return line_slope(params) * (r - params.p * t) + params.b * params.p * t;
}

double expected_level_count(double x, double t) noexcept {
    return std::exp((1.0 - x * x / 2.0) * t) / (x * std::sqrt(2.0 * std::numbers::pi * t));
}

double c_star(const LdpParams& params, double c_w) noexcept {
    const double base = params.theta * std::sqrt(2.0 * std::numbers::pi * (1.0 - params.p));
    return std::sqrt(params.sigma2_cond) * c_w / std::pow(base, params.kappa);
}

double ldp_prediction(const LdpParams& params, double t, double y, double c_w) noexcept {
    return c_star(params, c_w) * std::pow(y, -params.kappa) * std::exp(-params.rate_I * t);
}

double ldp_prediction_unscaled(const LdpParams& params, double t, double y, double c_w) noexcept {
    return c_star(params, c_w) * std::pow(y, -params.kappa) * std::pow(t, -params.kappa / 2.0) *
           std::exp(-params.rate_I * t);
}

double overlap_scale(const LdpParams& params) noexcept {
    return params.theta / (1.0 - params.theta * params.theta / 2.0);
}

double position_scale(const LdpParams& params) noexcept {
    const double h = params.theta * params.theta / 2.0;
    return (1.0 + h) / (1.0 - h);
}

double maximum_scale(const LdpParams& params) noexcept {
    return (std::numbers::sqrt2 - params.theta) / (std::numbers::sqrt2 + params.theta);
}

}  // namespace bbmld
