#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/distributions/inverse_gaussian.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bbmld/errors.hpp"
#include "bbmld/inverse_gaussian.hpp"
#include "bbmld/stats.hpp"

using namespace bbmld;
using doctest::Approx;

namespace {

const IgParams kSpine{1.0, 0.595, 0.81};

}  // namespace

TEST_CASE("pdf and cdf match an independent implementation") {
    for (const IgParams& igp : {kSpine, IgParams{0.45, 0.595, 0.81}, IgParams{3.0, 2.0, 0.5}}) {
        const boost::math::inverse_gaussian_distribution<double> ref(igp.mean(), igp.shape());
        for (double T : {0.01, 0.1, 0.5, 1.0, 1.68, 3.0, 10.0, 40.0}) {
            CHECK(ig_pdf(igp, T) == Approx(boost::math::pdf(ref, T)).epsilon(1e-10));
            CHECK(ig_cdf(igp, T) == Approx(boost::math::cdf(ref, T)).epsilon(1e-9));
        }
    }
    CHECK(ig_pdf(kSpine, 0.0) == 0.0);
    CHECK(ig_cdf(kSpine, -1.0) == 0.0);
}

TEST_CASE("pdf integrates to one") {
    boost::math::quadrature::tanh_sinh<double> q;
    const double total = q.integrate([](double T) { return ig_pdf(kSpine, T); }, 0.0,
                                     std::numeric_limits<double>::infinity());
    CHECK(std::fabs(total - 1.0) < 1e-6);
}

TEST_CASE("moments") {
    CHECK(kSpine.mean() == Approx(1.680672268907563).epsilon(1e-14));
    CHECK(kSpine.variance() == Approx(1.0 * 0.81 / (0.595 * 0.595 * 0.595)).epsilon(1e-14));
    CHECK_THROWS_AS(validate(IgParams{0.0, 1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(validate(IgParams{1.0, -1.0, 1.0}), DomainError);
}

TEST_CASE("sampler mean and KS against the cdf") {
    Stream rng(StreamFactory(11, 0), 0, Purpose::generic);
    std::vector<double> xs(100000);
    Tally tally;
    for (double& x : xs) {
        x = ig_sample(kSpine, rng);
        tally.add(x);
    }
    CHECK(std::fabs(tally.mean() - kSpine.mean()) < 3.0 * tally.stderr_iid());
    CHECK(tally.variance() == Approx(kSpine.variance()).epsilon(0.05));
    const KsResult ks = ks_test(xs, {}, [](double T) { return ig_cdf(kSpine, T); });
    CHECK(ks.pvalue > 0.01);
    const KsResult wrong = ks_test(xs, {}, [](double T) { return ig_cdf(IgParams{1.0, 0.65, 0.81}, T); });
    CHECK(wrong.pvalue < 0.01);
}

TEST_CASE("sampler stays finite in extreme shapes") {
    Stream rng(StreamFactory(12, 0), 0, Purpose::generic);
    for (int i = 0; i < 10000; ++i) {
        const double a = ig_sample_mean_shape(1.0, 1e8, rng);
        const double b = ig_sample_mean_shape(1.0, 1e-6, rng);
        CHECK(std::isfinite(a));
        CHECK(a > 0.0);
        CHECK(std::isfinite(b));
        CHECK(b > 0.0);
    }
}

TEST_CASE("hitting times of a simulated drifted Brownian motion") {
    // Euler walk at dt = 1e-4 with a bridge correction between grid points.
    const double dt = 1e-4;
    const double sd = std::sqrt(kSpine.sigma2 * dt);
    Stream rng(StreamFactory(13, 0), 0, Purpose::generic);
    std::vector<double> hits;
    for (int i = 0; i < 10000; ++i) {
        double y = kSpine.alpha, t = 0.0;
        for (;;) {
            const double next = y - kSpine.nu * dt + sd * rng.normal();
            const bool crossed =
                next <= 0.0 || rng.uniform() < std::exp(-2.0 * y * next / (kSpine.sigma2 * dt));
            t += dt;
            if (crossed) break;
            y = next;
        }
        hits.push_back(t - 0.5 * dt);
    }
    const KsResult ks = ks_test(hits, {}, [](double T) { return ig_cdf(kSpine, T); });
    CHECK(ks.pvalue > 0.01);
}
