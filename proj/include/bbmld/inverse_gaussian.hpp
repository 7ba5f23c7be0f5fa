#pragma once

#include "bbmld/rng.hpp"

namespace bbmld {

/// A Brownian motion with drift -nu and diffusion
/// coefficient sigma2, started at alpha > 0, hits 0 at an inverse-Gaussian time.
struct IgParams {
    double alpha = 1.0;
    double nu = 1.0;
    double sigma2 = 1.0;

    [[nodiscard]] double mean() const noexcept { return alpha / nu; }
    [[nodiscard]] double shape() const noexcept { return alpha * alpha / sigma2; }
    [[nodiscard]] double variance() const noexcept { return alpha * sigma2 / (nu * nu * nu); }
};

void validate(const IgParams& igp);

double ig_pdf(const IgParams& igp, double T) noexcept;
double ig_cdf(const IgParams& igp, double T) noexcept;
double ig_sample(const IgParams& igp, Stream& rng) noexcept;

/// Inverse Gaussian with mean mu and shape lambda (Michael, Schucany & Haas 1976).
double ig_sample_mean_shape(double mu, double lambda, Stream& rng) noexcept;

}  // namespace bbmld
