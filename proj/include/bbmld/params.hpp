#pragma once

#include <string>

namespace bbmld {

inline constexpr double kDefaultAdmissibleMargin = 1e-9;

struct LdpParams {
    double x = 0.0;
    double a = 0.0;
    double theta = 0.0;
    double p = 0.0;
    double b = 0.0;
    double rate_I = 0.0;
    double kappa = 0.0;
    double dpsi_kappa = 0.0;
    double ddpsi_kappa = 0.0;
    double sigma2_cond = 0.0;
    double v_speed = 0.0;

    /// Optimal time s = p t of the tangent point.
    [[nodiscard]] double s(double t) const noexcept { return p * t; }
    /// Level -psi'(kappa) p t that the V-process must reach to hit the tangent line.
    [[nodiscard]] double hit_level(double t) const noexcept { return -dpsi_kappa * p * t; }
};

/// Empty string when admissible, otherwise a description of the violated bound.
std::string admissibility_error(double x, double a, double eps = kDefaultAdmissibleMargin);

LdpParams derive(double x, double a, double eps = kDefaultAdmissibleMargin);

double psi(const LdpParams& params, double lambda) noexcept;

double curve_F(const LdpParams& params, double t, double r);
double line_L(const LdpParams& params, double t, double r);
/// Slope (theta^2/2 + 1)/theta of the tangent line.
double line_slope(const LdpParams& params) noexcept;

/// Leading-order mean of the xt level set: exp((1 - x^2/2) t) / (x sqrt(2 pi t)).
double expected_level_count(double x, double t) noexcept;

/// C_star for a given estimate c_w of lim y^kappa P(W_inf(theta) > y).
double c_star(const LdpParams& params, double c_w) noexcept;

/// C_star y^{-2/theta^2} e^{-I t}: predicted P(L_t(xt) >= (y / sqrt t) e^{at}).
double ldp_prediction(const LdpParams& params, double t, double y, double c_w) noexcept;

/// Same asymptotics without the sqrt(t) normalisation: predicted P(L_t(xt) >= y e^{at}).
double ldp_prediction_unscaled(const LdpParams& params, double t, double y, double c_w) noexcept;

/// Scale factors of the conditional limit laws.
double overlap_scale(const LdpParams& params) noexcept;   // theta / (1 - theta^2/2)
double position_scale(const LdpParams& params) noexcept;  // (1 + theta^2/2) / (1 - theta^2/2)
double maximum_scale(const LdpParams& params) noexcept;   // (sqrt2 - theta) / (sqrt2 + theta)

}  // namespace bbmld
