#include "bbmld/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "bbmld/errors.hpp"
#include "bbmld/observables.hpp"
#include "bbmld/parallel.hpp"
#include "bbmld/simulator.hpp"

namespace bbmld {

namespace {

SimConfig replica_config(const SimConfig& base, double horizon, std::uint64_t replica) {
    SimConfig c = base;
    c.horizon = horizon;
    c.replica_index = replica;
    return c;
}

void require_replicas(std::int64_t n) {
    if (n < 1) throw DomainError("replica count must be >= 1");
}

}  // namespace

std::vector<std::int64_t> naive_level_counts(double x, double t, std::int64_t n,
                                             const SimConfig& cfg, int workers) {
    require_replicas(n);
    const std::uint64_t group = hash_combine(hash_double(x), hash_double(t));
    const double level = x * t;
    return parallel_map<std::int64_t>(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        std::int64_t count = 0;
        for_each_leaf(replica_config(cfg, t, replica_id(kDomainNaive, group, i)),
                      [&](double pos) { count += pos >= level ? 1 : 0; });
        return count;
    });
}

Estimate naive_from_counts(const std::vector<std::int64_t>& counts, double threshold,
                           std::uint64_t seed) {
    std::int64_t hits = 0;
    for (std::int64_t c : counts) hits += static_cast<double>(c) >= threshold ? 1 : 0;
    return binomial_estimate(hits, static_cast<std::int64_t>(counts.size()), "naive", seed);
}

Estimate naive_ldp(double x, double a, double t, double y, std::int64_t n, const SimConfig& cfg,
                   int workers) {
    const LdpParams params = derive(x, a);
    const auto counts = naive_level_counts(x, t, n, cfg, workers);
    return naive_from_counts(counts, level_threshold(params, t, y), cfg.seed);
}

std::vector<double> martingale_samples(double beta, double T, std::int64_t n,
                                       const SimConfig& cfg, int workers) {
    require_replicas(n);
    const std::uint64_t group = hash_combine(hash_double(beta), hash_double(T));
    const double drift = (beta * beta / 2.0 + 1.0) * T;
    return parallel_map<double>(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        double w = 0.0;
        for_each_leaf(replica_config(cfg, T, replica_id(kDomainTail, group, i)),
                      [&](double pos) { w += std::exp(beta * pos - drift); });
        return w;
    });
}

TailFit fit_tail(const std::vector<double>& samples, double theta) {
    if (samples.empty()) throw EmptySample("tail fit on an empty sample");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<std::int64_t>(sorted.size());
    TailFit fit;
    fit.n = n;
    fit.kappa_theory = 2.0 / (theta * theta);
    Tally tally;
    std::int64_t positive = 0;
    for (double w : samples) {
        tally.add(w);
        positive += w > 0.0 ? 1 : 0;
    }
    fit.mean_w = tally.mean();
    fit.mean_w_stderr = tally.stderr_iid();
    fit.frac_positive = static_cast<double>(positive) / static_cast<double>(n);

    const std::int64_t lo_idx = static_cast<std::int64_t>(std::floor(0.9 * static_cast<double>(n)));
    const std::int64_t hi_idx = n - kMinTailExceedances - 1;
    if (hi_idx <= lo_idx) {
        std::ostringstream msg;
        msg << "need at least " << kMinTailExceedances << " exceedances beyond the upper decile; got "
            << n - lo_idx - 1 << " (increase the replica count)";
        throw InsufficientTail(msg.str());
    }
    fit.y_lo = sorted[static_cast<std::size_t>(lo_idx)];
    fit.y_hi = sorted[static_cast<std::size_t>(hi_idx)];
    if (!(fit.y_lo > 0.0) || !(fit.y_hi > fit.y_lo)) throw InsufficientTail("degenerate tail window");

    auto exceed = [&](double y) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), y);
        return static_cast<double>(sorted.end() - it) / static_cast<double>(n);
    };
    constexpr int kGrid = 30;
    const double l0 = std::log(fit.y_lo);
    const double l1 = std::log(fit.y_hi);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::vector<double> scaled;
    for (int j = 0; j < kGrid; ++j) {
        const double ly = l0 + (l1 - l0) * j / (kGrid - 1);
        const double y = std::exp(ly);
        const double p = exceed(y);
        const double lp = std::log(p);
        sx += ly;
        sy += lp;
        sxx += ly * ly;
        sxy += ly * lp;
        scaled.push_back(std::pow(y, fit.kappa_theory) * p);
    }
    const double slope = (kGrid * sxy - sx * sy) / (kGrid * sxx - sx * sx);
    fit.kappa_hat = -slope;
    std::sort(scaled.begin(), scaled.end());
    fit.c_w_hat = 0.5 * (scaled[kGrid / 2 - 1] + scaled[kGrid / 2]);
    fit.envelope_min = scaled.front();
    fit.envelope_max = scaled.back();
    return fit;
}

TailFit martingale_tail(double theta, double T, std::int64_t n, const SimConfig& cfg,
                        int workers) {
    if (!(theta > 0.0 && theta < std::sqrt(2.0))) throw DomainError("theta must lie in (0, sqrt 2)");
    return fit_tail(martingale_samples(theta, T, n, cfg, workers), theta);
}

WindowRun run_windows(const LdpParams& params, double t, int z_lo, int z_hi,
                      std::int64_t n_per_z, double detail_y, const SimConfig& cfg, int workers) {
    require_replicas(n_per_z);
    if (z_hi <= z_lo) throw DomainError("z_hi must exceed z_lo");
    WindowRun run;
    const double threshold = level_threshold(params, t, detail_y);
    for (int z = z_lo; z < z_hi; ++z) {
        const WindowPlan plan = plan_window(params, t, z);
        run.plans.push_back(plan);
        run.samples.push_back(parallel_map<WindowSample>(
            static_cast<std::size_t>(n_per_z), workers, [&](std::size_t i) {
                return score_window(params, t, plan,
                                    replica_config(cfg, t, window_replica(plan.z, i)), threshold);
            }));
    }
    return run;
}

ConditionedSummary conditioned_summary(const LdpParams& params, double t, double y,
                                       const std::vector<WindowPlan>& plans,
                                       const std::vector<std::vector<WindowSample>>& samples) {
    const double threshold = level_threshold(params, t, y);
    const double pt = params.p * t;
    const double scale = std::sqrt(t) * std::exp(-params.a * t) / y;
    std::vector<double> w, pareto, overlap_t, overlap, jump, maxi, sarg, far, near_end;
    std::vector<double> pw, pair_overlap_t;
    ConditionedSummary out;
    for (std::size_t k = 0; k < plans.size(); ++k) {
        const double nk = static_cast<double>(samples[k].size());
        for (const WindowSample& s : samples[k]) {
            ++out.n;
            const double v = window_value(s, threshold);
            if (!(v > 0.0)) continue;
            const double wi = v / nk;
            w.push_back(wi);
            pareto.push_back(scale * static_cast<double>(s.level_count));
            maxi.push_back((s.max_position - params.v_speed * t) / std::sqrt(t));
            sarg.push_back((s.s_argmin - pt) / std::sqrt(pt));
            far.push_back(std::fabs(s.s_argmin - s.stop_time) > 5.0 ? 1.0 : 0.0);
            near_end.push_back(s.s_argmin > t - 1.0 ? 1.0 : 0.0);
            if (!s.pair_same) {
                pw.push_back(wi);
                overlap.push_back((s.overlap - pt) / std::sqrt(pt));
                pair_overlap_t.push_back(s.overlap);
                jump.push_back((s.overlap_position - params.b * pt) / std::sqrt(pt));
            }
        }
    }
    out.n_contributing = static_cast<std::int64_t>(w.size());
    if (w.empty()) throw EmptySample("no replica reached the conditioning event");
    out.effective_sample_size = effective_sample_size(w);
    out.low_ess = out.effective_sample_size < 100.0;

    if (w.size() >= 3) {
        out.hill_k = default_hill_k(pareto, w);
        out.pareto_index_hat = hill(pareto, w, out.hill_k);
    }
    out.pareto_ks_pvalue = pareto_ks(pareto, w, params.kappa).pvalue;
    const auto m_max = weighted_moments(maxi, w);
    out.max_mean = m_max.mean;
    out.max_var = m_max.variance;
    const auto m_s = weighted_moments(sarg, w);
    out.s_argmin_mean = m_s.mean;
    out.s_argmin_var = m_s.variance;
    out.prob_s_tau_far = weighted_moments(far, w).mean;
    out.prob_argmin_near_horizon = weighted_moments(near_end, w).mean;
    if (!pw.empty()) {
        out.pair_ess = effective_sample_size(pw);
        const auto m_o = weighted_moments(overlap, pw);
        out.overlap_mean = m_o.mean;
        out.overlap_var = m_o.variance;
        out.overlap_time_mean = weighted_moments(pair_overlap_t, pw).mean;
        const auto m_j = weighted_moments(jump, pw);
        out.jump_pos_mean = m_j.mean;
        out.jump_pos_var = m_j.variance;
    }
    return out;
}

ConditionedSummary conditioned_stats(const LdpParams& params, double t, double y, int z_lo,
                                     int z_hi, std::int64_t n_per_z, const SimConfig& cfg,
                                     int workers) {
    const WindowRun run = run_windows(params, t, z_lo, z_hi, n_per_z, y, cfg, workers);
    return conditioned_summary(params, t, y, run.plans, run.samples);
}

Ratio ratio_of(const Estimate& a, const Estimate& b) noexcept {
    Ratio r;
    if (!(b.value != 0.0)) return r;
    r.value = a.value / b.value;
    const double ra = a.value != 0.0 ? a.std_error / a.value : 0.0;
    const double rb = b.std_error / b.value;
    r.std_error = std::fabs(r.value) * std::sqrt(ra * ra + rb * rb);
    return r;
}

std::vector<TrendRow> trend_rows(const std::vector<double>& t_list,
                                 const std::vector<Estimate>& estimates, double rate) {
    std::vector<TrendRow> rows;
    for (std::size_t k = 0; k < t_list.size(); ++k) {
        TrendRow row;
        row.t = t_list[k];
        row.estimate = estimates[k];
        const double f = std::exp(rate * row.t);
        row.scaled = f * row.estimate.value;
        row.scaled_stderr = f * row.estimate.std_error;
        if (k > 0) {
            Estimate cur{row.scaled, row.scaled_stderr, row.estimate.n, "", 0};
            Estimate prev{rows.back().scaled, rows.back().scaled_stderr, 0, "", 0};
            const Ratio r = ratio_of(cur, prev);
            row.ratio = r.value;
            row.ratio_stderr = r.std_error;
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<TrendRow> trend_e_it(const LdpParams& params, const std::vector<double>& t_list,
                                 double y, const std::string& method, std::int64_t n, int z_lo,
                                 int z_hi, const SimConfig& cfg, int workers, double rate) {
    if (t_list.empty()) throw DomainError("t_list is empty");
    for (std::size_t k = 1; k < t_list.size(); ++k)
        if (!(t_list[k] > t_list[k - 1])) throw DomainError("t_list must be increasing");
    std::vector<Estimate> est;
    for (double t : t_list) {
        if (method == "naive")
            est.push_back(naive_ldp(params.x, params.a, t, y, n, cfg, workers));
        else if (method == "spine")
            est.push_back(ldp_spine_estimate(params, t, y, z_lo, z_hi, n, cfg, workers).combined);
        else
            throw DomainError("method must be naive or spine");
    }
    return trend_rows(t_list, est, rate > 0.0 ? rate : params.rate_I);
}

Estimate overlap_limit(double r, double beta, double T, std::int64_t n, const SimConfig& cfg,
                       int workers) {
    require_replicas(n);
    if (!(r >= 0.0 && r < T)) throw DomainError("overlap time r must lie in [0, T)");
    if (!(beta >= 0.0 && beta < std::sqrt(2.0))) throw DomainError("beta must lie in [0, sqrt 2)");
    const std::uint64_t group = hash_combine(hash_double(beta), hash_double(T));
    const auto vals = parallel_map<double>(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        const ParticleTree tree = simulate(replica_config(cfg, T, replica_id(kDomainOverlap, group, i)));
        return overlap_square_sum(tree, r, beta);
    });
    return mean_estimate(vals, "overlap", cfg.seed);
}

OverlapReport overlap_limit_with_diagnostic(double r, double beta, double T, std::int64_t n,
                                            const SimConfig& cfg, int workers) {
    OverlapReport rep;
    rep.at_T = overlap_limit(r, beta, T, n, cfg, workers);
    rep.at_T_minus_2 = overlap_limit(r, beta, T - 2.0, n, cfg, workers);
    rep.relative_drift = rep.at_T.value != 0.0
                             ? std::fabs(rep.at_T.value - rep.at_T_minus_2.value) / rep.at_T.value
                             : 0.0;
    rep.converged = rep.relative_drift < 0.02;
    return rep;
}

Estimate pair_overlap_exceedance(double x, double t, double r, std::int64_t n,
                                 const SimConfig& cfg, int workers) {
    require_replicas(n);
    const std::uint64_t group = hash_combine(hash_double(x), hash_double(t));
    const auto vals = parallel_map<int>(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        const ParticleTree tree = simulate(replica_config(cfg, t, replica_id(kDomainPairs, group, i)));
        if (level_set_count(tree, t, x * t) == 0) return -1;
        Stream rng(tree.streams(), kRootKey, Purpose::pair);
        const LevelPair pair = sample_level_pair(tree, t, x * t, rng);
        return pair.mrca_time >= r ? 1 : 0;
    });
    std::int64_t valid = 0;
    std::int64_t hits = 0;
    for (int v : vals) {
        if (v < 0) continue;
        ++valid;
        hits += v;
    }
    if (valid == 0) throw EmptySample("every level set was empty");
    return binomial_estimate(hits, valid, "pairs", cfg.seed);
}

}  // namespace bbmld
