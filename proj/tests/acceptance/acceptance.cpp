// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bbmld/cli.hpp"
#include "bbmld/estimators.hpp"
#include "bbmld/inverse_gaussian.hpp"
#include "bbmld/observables.hpp"
#include "bbmld/parallel.hpp"
#include "bbmld/params.hpp"
#include "bbmld/simulator.hpp"
#include "bbmld/spine.hpp"
#include "bbmld/stats.hpp"

using namespace bbmld;

namespace {

// Pinned tolerances and sample sizes.
constexpr std::uint64_t kSeed = 1;
constexpr double kIdentityRel = 1e-12;
constexpr double kTangencyValue = 1e-9;
constexpr double kTangencySlope = 1e-6;
constexpr double kKsLevel = 0.01;
constexpr double kSigmas = 3.0;
constexpr double kNormVarRel = 0.10;
constexpr double kPlateauLo = 0.6, kPlateauHi = 1.6;
constexpr double kZ95 = 1.959963984540054;
constexpr double kTailIndexRel = 0.20;
constexpr double kParetoRel = 0.25;
constexpr double kMinEss = 300.0;
constexpr double kVarRel = 0.40;
constexpr double kFarProb = 0.2;

// Targets recomputed from the closed forms at x = 1, a = 0.55 (theta = 0.9).
constexpr double kNormVarTarget = 2.2879740131;
constexpr double kPowTarget = 0.18059929892988708;   // 2^{-2/theta^2}
constexpr double kKappaTheta11 = 1.6528925619834711;  // 2/1.1^2
constexpr double kKappa = 2.4691358024691357;
constexpr double kMaxVarTarget = 0.04107413425287037;
constexpr double kOverlapVarTarget = 1.9034405655490075;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

SimConfig config(double horizon, std::uint64_t seed, std::uint64_t replica = 0) {
    SimConfig c;
    c.horizon = horizon;
    c.seed = seed;
    c.replica_index = replica;
    return c;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const LdpParams kP = derive(1.0, 0.55);

Outcome parameter_identities() {
    const auto start = std::chrono::steady_clock::now();
    double worst_rel = 0.0, worst_value = 0.0, worst_slope = 0.0;
    bool psi_zero = true;
    int points = 0;
    for (int i = 0; i < 40; ++i) {
        const double x = 0.2 + 2.8 * i / 39.0;
        const double lo = std::fmax(0.0, 1.0 - x * x / 2.0);
        for (int j = 1; j <= 25; ++j, ++points) {
            const LdpParams p = derive(x, lo + (1.0 - lo) * j / 26.0);
            const auto rel = [](double a, double b) { return std::fabs(a - b) / std::fabs(b); };
            worst_rel = std::max({worst_rel, rel(p.kappa * p.dpsi_kappa * p.p, p.rate_I),
                                  rel((p.b * p.b / 2.0 - 1.0) * p.p, p.rate_I), rel(p.theta * p.b, 2.0)});
            psi_zero = psi_zero && psi(p, p.kappa) == 0.0 && psi(p, 1.0) == 0.0;
            const double t = 10.0, s = p.p * t;
            worst_value = std::max({worst_value, std::fabs(curve_F(p, t, s) - p.b * s),
                                    std::fabs(line_L(p, t, s) - curve_F(p, t, s))});
            const double h = 1e-3 * (t * (1.0 - p.a) - s);
            const double slope = (curve_F(p, t, s + h) - curve_F(p, t, s - h)) / (2.0 * h);
            worst_slope = std::max(worst_slope, std::fabs(slope - line_slope(p)) / std::fmax(1.0, line_slope(p)));
        }
    }
    const double secs = seconds_since(start);
    return {points == 1000 && worst_rel < kIdentityRel && psi_zero && worst_value < kTangencyValue &&
                worst_slope < kTangencySlope && secs < 1.0,
            std::to_string(points) + " points, max rel " + fmt(worst_rel) + ", psi zeros " +
                (psi_zero ? "exact" : "inexact") + ", value gap " + fmt(worst_value) + ", slope gap " +
                fmt(worst_slope) + ", " + fmt(secs, 3) + " s"};
}

Outcome simulator_laws() {
    const auto start = std::chrono::steady_clock::now();
    // Lifetimes of particles born before T - cut are seen up to cut: the uncensored ones are
    // Exp(1) truncated at cut and the censored fraction is e^{-cut}.
    const double T = 7.0, cut = 3.0;
    const std::size_t n = 10000;
    std::vector<double> lifetimes, increments;
    for (std::uint64_t r = 0; lifetimes.size() < n || increments.size() < n; ++r) {
        const ParticleTree tree = simulate(config(T, kSeed + 200, r));
        for (const Segment& s : tree.segments()) {
            if (s.t_birth < T - cut && lifetimes.size() < n) lifetimes.push_back(s.length());
            if (s.length() > 0.0 && increments.size() < n)
                increments.push_back((s.x_end - s.x_birth) / std::sqrt(s.length()));
        }
    }
    std::vector<double> short_lives;
    for (double l : lifetimes)
        if (l < cut) short_lives.push_back(l);
    const double tail = std::exp(-cut);
    const double censored = 1.0 - static_cast<double>(short_lives.size()) / n;
    const bool censored_ok = std::fabs(censored - tail) < kSigmas * std::sqrt(tail * (1.0 - tail) / n);
    const KsResult life = ks_test(short_lives, {}, [&](double l) {
        return -std::expm1(-std::clamp(l, 0.0, cut)) / (1.0 - tail);
    });
    const KsResult inc = ks_test(increments, {}, [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); });

    Tally pop;
    for (std::uint64_t r = 0; r < 10000; ++r)
        pop.add(static_cast<double>(for_each_leaf(config(5.0, kSeed + 201, r), [](double) {})));
    const double dev = std::fabs(pop.mean() - std::exp(5.0)) / pop.stderr_iid();
    const double secs = seconds_since(start);
    return {life.pvalue > kKsLevel && censored_ok && inc.pvalue > kKsLevel && dev < kSigmas && secs < 60.0,
            "lifetime KS p=" + fmt(life.pvalue) + " censored " + fmt(censored) + " vs " + fmt(tail) +
                ", increment KS p=" + fmt(inc.pvalue) + ", population " + fmt(pop.mean(), 6) + " (" +
                fmt(dev, 2) + " se from e^5), " + fmt(secs, 3) + " s"};
}

Outcome martingale_mean(int workers) {
    const auto start = std::chrono::steady_clock::now();
    const auto w = martingale_samples(0.9, 8.0, 20000, config(8.0, kSeed + 300), workers);
    Tally t;
    for (double v : w) t.add(v);
    const double dev = std::fabs(t.mean() - 1.0) / t.stderr_iid();
    const double secs = seconds_since(start);
    return {dev < kSigmas && secs < 300.0,
            "mean W_8(0.9) = " + fmt(t.mean(), 5) + " +- " + fmt(t.stderr_iid(), 3) + " (" + fmt(dev, 2) +
                " se), " + fmt(secs, 3) + " s"};
}

Outcome hit_line_equivalence() {
    const double t = 8.0, threshold = -kP.dpsi_kappa * kP.p * t;
    int agree = 0, hits = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const ParticleTree tree = simulate(config(t, kSeed + 400, static_cast<std::uint64_t>(i)));
        const bool hit = hits_line(tree, kP, t);
        const bool low = v_process_min(tree, kP).value_I <= threshold;
        agree += hit == low ? 1 : 0;
        hits += hit ? 1 : 0;
    }
    return {agree == n, std::to_string(agree) + "/" + std::to_string(n) + " paths agree, " +
                            std::to_string(hits) + " hit the line"};
}

Outcome inverse_gaussian_passage(int workers) {
    const double t = 10.0, s = kP.p * t;
    const SimConfig base = config(t, kSeed + 500);
    const auto taus = parallel_map<double>(20000, workers, [&](std::size_t i) {
        SimConfig c = base;
        c.replica_index = i;
        return sample_stop_time(kP, t, 0.0, c);
    });
    const IgParams ig{kP.dpsi_kappa * s, kP.dpsi_kappa, kP.ddpsi_kappa};
    const KsResult ks = ks_test(taus, {}, [&](double v) { return ig_cdf(ig, v); });
    Tally tally;
    for (double v : taus) tally.add(v);
    const double norm_var = tally.variance() / s;
    const double target = kP.ddpsi_kappa / (kP.dpsi_kappa * kP.dpsi_kappa);
    const bool target_ok = std::fabs(target - kNormVarTarget) < 1e-9;
    return {ks.pvalue > kKsLevel && target_ok && std::fabs(norm_var / target - 1.0) < kNormVarRel,
            "KS p=" + fmt(ks.pvalue) + ", normalized variance " + fmt(norm_var) + " vs " + fmt(target, 11)};
}

Outcome radon_nikodym() {
    const double t = 6.0, beta = 0.9, level = std::numbers::sqrt2 * t;
    Tally p_side, q_side;
    for (int i = 0; i < 20000; ++i) {
        const auto r = static_cast<std::uint64_t>(i);
        const ParticleTree tree = simulate(config(t, kSeed + 600, r));
        p_side.add(max_position(tree, t) >= level ? additive_martingale(tree, t, beta) : 0.0);
        const SpineRealization s = sample_spine_fixed(beta, t, config(t, kSeed + 601, r));
        q_side.add(max_position(s.tree, t) >= level ? 1.0 : 0.0);
    }
    const double se = std::hypot(p_side.stderr_iid(), q_side.stderr_iid());
    const double dev = std::fabs(p_side.mean() - q_side.mean()) / se;
    return {dev < kSigmas, "E_P = " + fmt(p_side.mean()) + ", E_Q = " + fmt(q_side.mean()) + " (" + fmt(dev, 2) +
                               " combined se)"};
}

// Spine windows at t = 10 shared by the calibration, scaling and conditioned criteria.
struct SpineRun {
    WindowRun windows;
    SpineLdpResult y1;
    SpineLdpResult y2;
    double seconds = 0.0;
};

SpineRun spine_at(double t, int workers) {
    const auto start = std::chrono::steady_clock::now();
    SpineRun out;
    out.windows = run_windows(kP, t, -6, 6, 2000, 1.0, config(t, kSeed + 700), workers);
    out.y1 = combine_windows(kP, t, 1.0, -6, out.windows.plans, out.windows.samples, kSeed + 700);
    out.y2 = combine_windows(kP, t, 2.0, -6, out.windows.plans, out.windows.samples, kSeed + 700);
    out.seconds = seconds_since(start);
    return out;
}

Outcome cross_method(const SpineRun& spine, int workers) {
    const auto start = std::chrono::steady_clock::now();
    const Estimate naive = naive_ldp(1.0, 0.55, 10.0, 1.0, 100000, config(10.0, kSeed + 710), workers);
    const double secs = seconds_since(start) + spine.seconds;
    const Estimate& sp = spine.y1.combined;
    return {ci95_overlap(naive, sp) && secs < 1800.0,
            "naive " + fmt(naive.value) + " [" + fmt(naive.lo95()) + ", " + fmt(naive.hi95()) + "], spine " +
                fmt(sp.value) + " [" + fmt(sp.lo95()) + ", " + fmt(sp.hi95()) + "], acceptance " +
                fmt(spine.y1.acceptance, 3) + ", " + fmt(secs / 60.0, 3) + " min"};
}

Outcome scaling(const SpineRun& at10, int workers) {
    std::vector<Estimate> est;
    for (double t : {6.0, 8.0}) est.push_back(spine_at(t, workers).y1.combined);
    est.push_back(at10.y1.combined);
    const auto rows = trend_rows({6.0, 8.0, 10.0}, est, kP.rate_I);
    bool plateau = true;
    std::string detail = "e^{It}P:";
    for (const auto& r : rows) {
        detail += " " + fmt(r.scaled);
        if (r.t > 6.0) plateau = plateau && r.ratio >= kPlateauLo && r.ratio <= kPlateauHi;
    }
    detail += ", ratios " + fmt(rows[1].ratio, 3) + " " + fmt(rows[2].ratio, 3);
    const Ratio pow = ratio_of(at10.y2.combined, at10.y1.combined);
    const bool pow_ok = std::fabs(pow.value - kPowTarget) <= kZ95 * pow.std_error;
    detail += "; P(y=2)/P(y=1) = " + fmt(pow.value) + " +- " + fmt(pow.std_error, 3) + " vs " + fmt(kPowTarget);
    return {plateau && pow_ok, detail};
}

Outcome martingale_tail_index(int workers) {
    const auto start = std::chrono::steady_clock::now();
    const TailFit fit = martingale_tail(1.1, 8.0, 50000, config(8.0, kSeed + 900), workers);
    const double secs = seconds_since(start);
    return {std::fabs(fit.kappa_hat / kKappaTheta11 - 1.0) < kTailIndexRel && secs < 1200.0,
            "kappa_hat " + fmt(fit.kappa_hat) + " vs " + fmt(kKappaTheta11) + " on [" + fmt(fit.y_lo) + ", " +
                fmt(fit.y_hi) + "], " + fmt(secs / 60.0, 3) + " min"};
}

Outcome pareto_limit(const ConditionedSummary& s) {
    return {std::fabs(s.pareto_index_hat / kKappa - 1.0) < kParetoRel && s.effective_sample_size >= kMinEss,
            "Hill index " + fmt(s.pareto_index_hat) + " (k=" + std::to_string(s.hill_k) + ") vs " + fmt(kKappa) +
                ", ESS " + fmt(s.effective_sample_size, 5)};
}

Outcome entropy_repulsion(const ConditionedSummary& s) {
    const double pt = kP.p * 10.0;
    const bool overlap_ok = std::fabs(s.overlap_time_mean - pt) <= 3.0 * std::sqrt(pt);
    const bool max_ok = std::fabs(s.max_var / kMaxVarTarget - 1.0) <= kVarRel;
    const bool ovar_ok = std::fabs(s.overlap_var / kOverlapVarTarget - 1.0) <= kVarRel;
    const bool far_ok = s.prob_s_tau_far < kFarProb;
    return {overlap_ok && max_ok && ovar_ok && far_ok,
            std::string("overlap mean ") + fmt(s.overlap_time_mean) + " vs pt " + fmt(pt) + (overlap_ok ? "" : " (out)") +
                ", max var " + fmt(s.max_var) + " vs " + fmt(kMaxVarTarget) + (max_ok ? "" : " (out)") +
                ", overlap var " + fmt(s.overlap_var) + " vs " + fmt(kOverlapVarTarget) + (ovar_ok ? "" : " (out)") +
                ", P(|s - tau| > 5) " + fmt(s.prob_s_tau_far) + (far_ok ? "" : " (out)") + ", pair ESS " +
                fmt(s.pair_ess, 5)};
}

Outcome overlap_formula(int workers) {
    const double T = 10.0, beta = 0.9;
    const SimConfig cfg = config(T, kSeed + 1200);
    std::vector<Estimate> ol;
    for (double r : {0.0, 1.0, 2.0, 4.0}) ol.push_back(overlap_limit(r, beta, T, 2000, cfg, workers));
    const bool exact = std::fabs(ol[0].value - 1.0) < 1e-12;
    const bool decreasing = ol[1].value < ol[0].value && ol[2].value < ol[1].value && ol[3].value < ol[2].value;
    const Estimate pairs = pair_overlap_exceedance(beta, T, 2.0, 2000, config(T, kSeed + 1201), workers);
    const double dev = std::fabs(pairs.value - ol[2].value) / std::hypot(pairs.std_error, ol[2].std_error);
    return {exact && decreasing && dev < kSigmas,
            "OL(0) = " + fmt(ol[0].value, 15) + ", OL(1,2,4) = " + fmt(ol[1].value) + " " + fmt(ol[2].value) + " " +
                fmt(ol[3].value) + (decreasing ? "" : " (not decreasing)") + "; pairs P(R >= 2) = " +
                fmt(pairs.value) + " +- " + fmt(pairs.std_error, 3) + " vs OL(2) " + fmt(ol[2].value) + " +- " +
                fmt(ol[2].std_error, 3) + " (" + fmt(dev, 3) + " combined se)"};
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "bbmld");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream sink;
    auto* old_out = std::cout.rdbuf(sink.rdbuf());
    auto* old_err = std::cerr.rdbuf(sink.rdbuf());
    const int code = run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return code;
}

std::map<std::string, std::string> outputs(const std::filesystem::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().filename() == "manifest.json") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        files[entry.path().filename().string()] = s.str();
    }
    return files;
}

Outcome determinism() {
    const std::vector<std::vector<std::string>> commands = {
        {"estimate-ldp", "--method", "spine", "--t", "8", "--replicas-per-window", "100"},
        {"estimate-ldp", "--method", "naive", "--t", "8", "--replicas", "2000"},
        {"simulate", "--t", "6", "--replicas", "300", "--tree-dump"},
        {"tail-fit", "--theta", "1.1", "--T", "5", "--replicas", "3000"},
        {"conditioned", "--t", "8", "--replicas-per-window", "100"},
        {"overlap", "--T", "6", "--replicas", "300", "--pairs-x", "0.9"},
        {"fpt-test", "--replicas", "2000"},
        {"trend", "--method", "spine", "--t-list", "4,6", "--replicas-per-window", "50"},
    };
    int identical = 0, files = 0;
    std::string failed;
    for (const auto& cmd : commands) {
        std::map<std::string, std::string> runs[2];
        bool ok = true;
        for (int k = 0; k < 2; ++k) {
            const auto dir = std::filesystem::temp_directory_path() / ("bbmld_acceptance_w" + std::to_string(k));
            std::filesystem::remove_all(dir);
            auto args = cmd;
            for (const std::string& extra : std::vector<std::string>{"--seed", "13", "--workers", k == 0 ? "1" : "8", "--out-dir", dir.string()})
                args.push_back(extra);
            ok = ok && cli(args) == 0;
            if (ok) runs[k] = outputs(dir);
            std::filesystem::remove_all(dir);
        }
        if (ok && !runs[0].empty() && runs[0] == runs[1]) {
            ++identical;
            files += static_cast<int>(runs[0].size());
        } else {
            failed += " " + cmd.front();
        }
    }
    const int n = static_cast<int>(commands.size());
    return {identical == n, std::to_string(identical) + "/" + std::to_string(n) + " commands byte-identical (" +
                                std::to_string(files) + " files)" + (failed.empty() ? "" : ", differing:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    int workers = default_workers();
    std::vector<int> only;
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    const std::set<int> chosen(only.begin(), only.end());
    const auto wanted = [&](int k) { return chosen.empty() || chosen.count(k) > 0; };

    const std::map<int, std::string> names = {
        {1, "parameter identities"}, {2, "simulator laws"}, {3, "martingale mean"},
        {4, "hit-line equivalence"}, {5, "inverse-Gaussian passage"}, {6, "change of measure"},
        {7, "cross-method calibration"}, {8, "exponential and power scaling"}, {9, "martingale tail index"},
        {10, "Pareto limit"}, {11, "entropy repulsion"}, {12, "overlap formula"}, {13, "determinism"},
    };
    int failures = 0;
    const auto report = [&](int k, const std::function<Outcome()>& run) {
        if (!wanted(k)) return;
        const auto start = std::chrono::steady_clock::now();
        const Outcome o = run();
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k, names.at(k).c_str(),
                    o.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    };

    report(1, parameter_identities);
    report(2, simulator_laws);
    report(3, [&] { return martingale_mean(workers); });
    report(4, hit_line_equivalence);
    report(5, [&] { return inverse_gaussian_passage(workers); });
    report(6, radon_nikodym);
    if (wanted(7) || wanted(8) || wanted(10) || wanted(11)) {
        const SpineRun spine = spine_at(10.0, workers);
        report(7, [&] { return cross_method(spine, workers); });
        report(8, [&] { return scaling(spine, workers); });
        if (wanted(10) || wanted(11)) {
            const ConditionedSummary s = conditioned_summary(kP, 10.0, 1.0, spine.windows.plans, spine.windows.samples);
            report(10, [&] { return pareto_limit(s); });
            report(11, [&] { return entropy_repulsion(s); });
        }
    }
    report(9, [&] { return martingale_tail_index(workers); });
    report(12, [&] { return overlap_formula(workers); });
    report(13, determinism);
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
