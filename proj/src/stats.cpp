#include "bbmld/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bbmld/errors.hpp"
#include "bbmld/special.hpp"

namespace bbmld {

void ExactSum::add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
        if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
        const double hi = x + y;
        const double lo = y - (hi - x);
        if (lo != 0.0) partials_[i++] = lo;
        x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
}

void ExactSum::merge(const ExactSum& other) {
    for (double p : other.partials_) add(p);
}

double ExactSum::value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials_[--n];
        hi = x + y;
        const double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
    }
    // Round half-even correction when the remaining partials push past a tie.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        const double yr = x - hi;
        if (y == yr) hi = x;
    }
    return hi;
}

void Tally::add(double x) {
    ++n;
    sum.add(x);
    sumsq.add(x * x);
}

void Tally::merge(const Tally& other) {
    n += other.n;
    sum.merge(other.sum);
    sumsq.merge(other.sumsq);
}

double Tally::mean() const { return n > 0 ? sum.value() / static_cast<double>(n) : 0.0; }

double Tally::variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double dn = static_cast<double>(n);
    return std::max(0.0, (sumsq.value() - dn * m * m) / (dn - 1.0));
}

double Tally::stderr_iid() const {
    return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

double exact_mean(const std::vector<double>& xs) {
    if (xs.empty()) throw EmptySample("mean of an empty sample");
    ExactSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

double batch_means_stderr(const std::vector<double>& xs, int batches) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(std::max(batches, 2)), n);
    Tally means;
    for (std::size_t k = 0; k < b; ++k) {
        const std::size_t lo = k * n / b;
        const std::size_t hi = (k + 1) * n / b;
        ExactSum s;
        for (std::size_t i = lo; i < hi; ++i) s.add(xs[i]);
        means.add(s.value() / static_cast<double>(hi - lo));
    }
    // Batches differ in size by at most one element, so the equal-size formula is used.
    return std::sqrt(means.variance() / static_cast<double>(b));
}

Estimate mean_estimate(const std::vector<double>& xs, std::string method, std::uint64_t seed,
                       int batches) {
    Estimate e;
    e.value = exact_mean(xs);
    e.std_error = batch_means_stderr(xs, batches);
    e.n = static_cast<std::int64_t>(xs.size());
    e.method = std::move(method);
    e.seed = seed;
    return e;
}

Estimate binomial_estimate(std::int64_t successes, std::int64_t n, std::string method,
                           std::uint64_t seed) {
    if (n < 1) throw EmptySample("binomial estimate needs n >= 1");
    Estimate e;
    e.value = static_cast<double>(successes) / static_cast<double>(n);
    e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n));
    e.n = n;
    e.method = std::move(method);
    e.seed = seed;
    return e;
}

Estimate sum_estimates(const std::vector<Estimate>& parts, std::string method,
                       std::uint64_t seed) {
    ExactSum v;
    ExactSum var;
    Estimate e;
    for (const Estimate& p : parts) {
        v.add(p.value);
        var.add(p.std_error * p.std_error);
        e.n += p.n;
    }
    e.value = v.value();
    e.std_error = std::sqrt(var.value());
    e.method = std::move(method);
    e.seed = seed;
    return e;
}

bool ci95_overlap(const Estimate& a, const Estimate& b) noexcept {
    return a.lo95() <= b.hi95() && b.lo95() <= a.hi95();
}

double effective_sample_size(const std::vector<double>& ws) {
    ExactSum s;
    ExactSum s2;
    for (double w : ws) {
        s.add(w);
        s2.add(w * w);
    }
    const double q = s2.value();
    return q > 0.0 ? s.value() * s.value() / q : 0.0;
}

WeightedMoments weighted_moments(const std::vector<double>& xs, const std::vector<double>& ws) {
    if (xs.empty()) throw EmptySample("weighted moments of an empty sample");
    if (!ws.empty() && ws.size() != xs.size())
        throw std::invalid_argument("sample and weight sizes differ");
    ExactSum sw;
    ExactSum swx;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = ws.empty() ? 1.0 : ws[i];
        sw.add(w);
        swx.add(w * xs[i]);
    }
    WeightedMoments m;
    m.weight_sum = sw.value();
    if (!(m.weight_sum > 0.0)) throw EmptySample("all weights are zero");
    m.mean = swx.value() / m.weight_sum;
    ExactSum sdev;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = ws.empty() ? 1.0 : ws[i];
        const double d = xs[i] - m.mean;
        sdev.add(w * d * d);
    }
    m.variance = sdev.value() / m.weight_sum;
    m.ess = ws.empty() ? static_cast<double>(xs.size()) : effective_sample_size(ws);
    return m;
}

double weighted_exceedance(const std::vector<double>& xs, const std::vector<double>& ws,
                           double threshold) {
    ExactSum all;
    ExactSum above;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = ws.empty() ? 1.0 : ws[i];
        all.add(w);
        if (xs[i] > threshold) above.add(w);
    }
    const double a = all.value();
    return a > 0.0 ? above.value() / a : 0.0;
}

namespace {

// Indices of xs sorted ascending, ties broken by index.
std::vector<std::size_t> order(const std::vector<double>& xs) {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    return idx;
}

}  // namespace

KsResult ks_test(const std::vector<double>& xs, const std::vector<double>& ws,
                 const std::function<double(double)>& cdf) {
    if (xs.empty()) throw EmptySample("KS test on an empty sample");
    const auto idx = order(xs);
    ExactSum total;
    for (std::size_t i = 0; i < xs.size(); ++i) total.add(ws.empty() ? 1.0 : ws[i]);
    const double wsum = total.value();
    if (!(wsum > 0.0)) throw EmptySample("all weights are zero");
    double d = 0.0;
    double below = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double x = xs[idx[i]];
        const double f = cdf(x);
        d = std::max(d, std::fabs(f - below / wsum));
        // Step over ties as one jump of the empirical CDF.
        while (i < idx.size() && xs[idx[i]] == x) {
            below += ws.empty() ? 1.0 : ws[idx[i]];
            ++i;
        }
        d = std::max(d, std::fabs(f - below / wsum));
    }
    KsResult r;
    r.statistic = d;
    r.n_eff = ws.empty() ? static_cast<double>(xs.size()) : effective_sample_size(ws);
    const double sn = std::sqrt(r.n_eff);
    r.pvalue = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

std::size_t default_hill_k(std::size_t n) noexcept {
    if (n < 2) return 0;
    return std::min(std::max<std::size_t>(50, n / 10), n - 1);
}

std::size_t default_hill_k(const std::vector<double>& xs, const std::vector<double>& ws) {
    const std::size_t n = xs.size();
    if (ws.empty() || n < 2) return default_hill_k(n);
    ExactSum total;
    for (double w : ws) total.add(w);
    // Relative slack so that equal weights reproduce floor(n/10).
    const double target = 0.1 * total.value() * (1.0 + 1e-12);
    const auto idx = order(xs);
    ExactSum top;
    std::size_t k = 0;
    while (k < n) {
        top.add(ws[idx[n - 1 - k]]);
        if (top.value() > target) break;
        ++k;
    }
    return std::min(std::max<std::size_t>(50, k), n - 1);
}

double hill(const std::vector<double>& xs, const std::vector<double>& ws, std::size_t k) {
    if (xs.empty()) throw EmptySample("Hill estimator on an empty sample");
    if (k < 1 || k >= xs.size()) throw std::invalid_argument("Hill k must lie in [1, n-1]");
    const auto idx = order(xs);
    const std::size_t n = xs.size();
    const double u = xs[idx[n - 1 - k]];
    if (!(u > 0.0)) throw std::invalid_argument("Hill threshold must be positive");
    ExactSum wsum;
    ExactSum wlog;
    for (std::size_t j = n - k; j < n; ++j) {
        const double w = ws.empty() ? 1.0 : ws[idx[j]];
        wsum.add(w);
        wlog.add(w * std::log(xs[idx[j]] / u));
    }
    const double l = wlog.value();
    if (!(l > 0.0)) throw std::invalid_argument("degenerate tail in Hill estimator");
    return wsum.value() / l;
}

KsResult pareto_ks(const std::vector<double>& xs, const std::vector<double>& ws, double index) {
    return ks_test(xs, ws, [index](double y) { return y <= 1.0 ? 0.0 : 1.0 - std::pow(y, -index); });
}

}  // namespace bbmld
