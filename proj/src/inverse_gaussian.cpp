#include "bbmld/inverse_gaussian.hpp"

#include <cmath>
#include <numbers>

#include "bbmld/errors.hpp"
#include "bbmld/special.hpp"

namespace bbmld {

void validate(const IgParams& igp) {
    if (!(igp.alpha > 0.0) || !(igp.nu > 0.0) || !(igp.sigma2 > 0.0))
        throw DomainError("inverse Gaussian parameters must all be positive");
}

double ig_pdf(const IgParams& igp, double T) noexcept {
    if (!(T > 0.0) || !std::isfinite(T)) return 0.0;
    const double sigma = std::sqrt(igp.sigma2);
    const double dev = igp.alpha - igp.nu * T;
    return igp.alpha / (sigma * std::sqrt(2.0 * std::numbers::pi)) *
           std::exp(-dev * dev / (2.0 * igp.sigma2 * T) - 1.5 * std::log(T));
}

namespace {

// log Phi(-z) for z >= 0, switching to the asymptotic series once erfc underflows.
double log_normal_sf(double z) noexcept {
    if (z < 30.0) return std::log(normal_sf(z));
    const double z2 = z * z;
    return -0.5 * z2 - std::log(z * std::sqrt(2.0 * std::numbers::pi)) +
           std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

}  // namespace

double ig_cdf(const IgParams& igp, double T) noexcept {
    if (!(T > 0.0)) return 0.0;
    const double mu = igp.mean();
    const double lambda = igp.shape();
    const double r = std::sqrt(lambda / T);
    const double first = normal_cdf(r * (T / mu - 1.0));
    const double second = std::exp(2.0 * lambda / mu + log_normal_sf(r * (T / mu + 1.0)));
    return std::fmin(1.0, first + second);
}

double ig_sample_mean_shape(double mu, double lambda, Stream& rng) noexcept {
    const double n = rng.normal();
    const double q = mu * n * n / (2.0 * lambda);
    // mu (1 + q - sqrt(q^2 + 2q)) written without cancellation.
    const double x = mu / (1.0 + q + std::sqrt(q * q + 2.0 * q));
    return rng.uniform() * (mu + x) <= mu ? x : mu * mu / x;
}

double ig_sample(const IgParams& igp, Stream& rng) noexcept {
    return ig_sample_mean_shape(igp.mean(), igp.shape(), rng);
}

}  // namespace bbmld
