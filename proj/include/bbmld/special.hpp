#pragma once

namespace bbmld {

/// Standard normal CDF.
double normal_cdf(double z) noexcept;

/// Standard normal upper tail, accurate far into the tail.
double normal_sf(double z) noexcept;

/// Inverse standard normal CDF (Wichura AS241, ~1e-16 relative).
double normal_quantile(double p) noexcept;

/// Asymptotic Kolmogorov distribution P(K > x), where K is the limit of sqrt(n) D_n.
double kolmogorov_sf(double x) noexcept;

}  // namespace bbmld
