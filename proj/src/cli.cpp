#include "bbmld/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bbmld/errors.hpp"
#include "bbmld/estimators.hpp"
#include "bbmld/inverse_gaussian.hpp"
#include "bbmld/io.hpp"
#include "bbmld/observables.hpp"
#include "bbmld/parallel.hpp"
#include "bbmld/params.hpp"
#include "bbmld/simulator.hpp"
#include "bbmld/spine.hpp"

namespace bbmld {

namespace {

inline constexpr std::uint64_t kDomainFpt = 0x465054ULL;

// Raised for flag combinations that CLI11 validators cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::uint64_t seed = 0;
    int workers = default_workers();
    std::string out_dir = "bbmld_out";
    std::int64_t max_particles = std::int64_t{1} << 22;
    std::string crossing = "segment_exact";
    double grid_dt = 1e-3;

    double x = 1.0;
    double a = 0.55;
    double t = 10.0;
    double y = 1.0;
    double z = 0.0;
    double theta = 0.9;
    double T = 8.0;
    double rate = 0.0;
    std::int64_t replicas = 1000;
    int z_lo = -6;
    int z_hi = 6;
    std::string method = "naive";
    std::vector<double> r_list{0.0, 1.0, 2.0, 4.0};
    std::vector<double> t_list{6.0, 8.0, 10.0};
    double pairs_x = 0.0;
    bool tree_dump = false;
};

// Outputs and bookkeeping of one run; the manifest is written from it at the end.
struct Run {
    std::string command;
    const Options* opt = nullptr;
    Json config;
    std::map<std::string, std::int64_t> replicas;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::string>> files;  // name, digest

    void emit(const std::string& name, const std::string& content) {
        write_atomic(std::filesystem::path(opt->out_dir) / name, content);
        files.emplace_back(name, fnv1a_hex(content));
    }
};

SimConfig sim_config(const Options& o, double horizon) {
    SimConfig c;
    c.horizon = horizon;
    c.seed = o.seed;
    c.max_particles = o.max_particles;
    c.bridge_grid_dt = o.grid_dt;
    c.crossing_mode = o.crossing == "grid_only" ? CrossingMode::grid_only : CrossingMode::segment_exact;
    return c;
}

LdpParams checked_params(const Options& o) {
    const std::string err = admissibility_error(o.x, o.a);
    if (!err.empty()) throw UsageError("--x " + format_double(o.x) + " --a " + format_double(o.a) + ": " + err);
    return derive(o.x, o.a);
}

void check_theta(double theta) {
    if (!(theta > 0.0 && theta < std::sqrt(2.0)))
        throw UsageError("--theta " + format_double(theta) + ": theta must lie in (0, sqrt 2)");
}

void check_z_range(const Options& o) {
    if (o.z_hi <= o.z_lo)
        throw UsageError("--z-hi " + std::to_string(o.z_hi) + " must exceed --z-lo " + std::to_string(o.z_lo));
}

std::string iso_time() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void write_manifest(const Run& run, double seconds) {
    Json m;
    m["tool_version"] = kToolVersion;
    m["command"] = run.command;
    m["config"] = run.config;
    m["seed"] = run.opt->seed;
    m["workers"] = run.opt->workers;
    m["finished_at"] = iso_time();
    m["wall_time"] = seconds;
    Json reps = Json::object();
    for (const auto& [k, v] : run.replicas) reps[k] = v;
    m["replicas"] = reps;
    m["warnings"] = run.warnings;
    Json files = Json::object();
    for (const auto& [name, digest] : run.files) files[name] = "fnv1a64:" + digest;
    m["outputs"] = files;
    write_atomic(std::filesystem::path(run.opt->out_dir) / "manifest.json", m.dump(2) + "\n");
}

void emit_estimates(Run& run, const std::vector<EstimateRow>& rows) {
    run.emit("estimates.csv", estimates_csv(rows));
    run.emit("estimates.json", estimates_json(rows).dump(2) + "\n");
}

// ---- subcommands ----

void cmd_params(Run& run) {
    const LdpParams p = checked_params(*run.opt);
    const std::string text = params_json(p).dump(2) + "\n";
    std::cout << text;
    run.emit("params.json", text);
}

void cmd_simulate(Run& run) {
    const Options& o = *run.opt;
    const LdpParams p = checked_params(o);
    const SimConfig base = sim_config(o, o.t);
    const std::uint64_t group = hash_combine(hash_double(o.x), hash_double(o.t));
    const auto rows = parallel_map<SimulateRow>(
        static_cast<std::size_t>(o.replicas), o.workers, [&](std::size_t i) {
            SimConfig c = base;
            c.replica_index = replica_id(kDomainSimulate, group, i);
            const ParticleTree tree = simulate(c);
            SimulateRow row;
            row.replica = i;
            row.population = static_cast<std::int64_t>(tree.leaves().size());
            row.level_count = level_set_count(tree, o.t, o.x * o.t);
            row.w_theta = additive_martingale(tree, o.t, p.theta);
            row.hits_line = hits_line(tree, p, o.t);
            const MinRecord rec = v_process_min(tree, p);
            row.i_min = rec.value_I;
            row.s_argmin = rec.argmin_time;
            if (const auto fp = first_passage_tau(tree, p, o.t, o.z)) row.tau_z = fp->time;
            row.m_t = max_position(tree, o.t);
            return row;
        });
    run.replicas["simulate"] = o.replicas;
    run.emit("simulate.csv", simulate_csv(rows));
    if (o.tree_dump) {
        SimConfig c = base;
        c.replica_index = replica_id(kDomainSimulate, group, 0);
        run.emit("tree.csv", tree_csv(simulate(c)));
    }
}

void cmd_estimate_ldp(Run& run) {
    const Options& o = *run.opt;
    const LdpParams p = checked_params(o);
    std::vector<EstimateRow> rows;
    if (o.method == "naive") {
        const Estimate e = naive_ldp(o.x, o.a, o.t, o.y, o.replicas, sim_config(o, o.t), o.workers);
        rows.push_back({"ldp", o.x, o.a, o.t, o.y, std::nullopt, std::nullopt, e});
        run.replicas["naive"] = o.replicas;
    } else {
        check_z_range(o);
        const SpineLdpResult res =
            ldp_spine_estimate(p, o.t, o.y, o.z_lo, o.z_hi, o.replicas, sim_config(o, o.t), o.workers);
        for (const auto& w : res.windows) {
            const int z = static_cast<int>(w.plan.z);
            rows.push_back({"ldp_window", o.x, o.a, o.t, o.y, z, z + 1, w.estimate});
        }
        rows.push_back({"ldp", o.x, o.a, o.t, o.y, o.z_lo, o.z_hi, res.combined});
        Estimate tail{res.tail_bound, 0.0, 1, "bound", o.seed};
        rows.push_back({"ldp_tail_bound", o.x, o.a, o.t, o.y, std::nullopt, o.z_lo, tail});
        Json js;
        js["windows"] = Json::array();
        for (const auto& w : res.windows) {
            Json jw;
            jw["z"] = w.plan.z;
            jw["route"] = w.estimate.method;
            jw["weight"] = w.plan.weight;
            jw["estimate"] = w.estimate.value;
            jw["stderr"] = w.estimate.std_error;
            jw["n"] = w.estimate.n;
            jw["acceptance"] = w.acceptance;
            js["windows"].push_back(std::move(jw));
        }
        js["combined"] = res.combined.value;
        js["stderr"] = res.combined.std_error;
        js["acceptance"] = res.acceptance;
        js["tail_bound"] = res.tail_bound;
        run.emit("spine.json", js.dump(2) + "\n");
        run.replicas["spine_per_window"] = o.replicas;
        run.replicas["spine_total"] = o.replicas * (o.z_hi - o.z_lo);
        if (res.tail_bound > 0.1 * res.combined.std_error)
            run.warnings.push_back("truncation: mass bound below z_lo is " + format_double(res.tail_bound) +
                                   ", not small against the standard error");
    }
    emit_estimates(run, rows);
}

void cmd_tail_fit(Run& run) {
    const Options& o = *run.opt;
    check_theta(o.theta);
    const TailFit fit = martingale_tail(o.theta, o.T, o.replicas, sim_config(o, o.T), o.workers);
    run.replicas["tail"] = o.replicas;
    run.emit("tail_fit.json", tail_fit_json(fit).dump(2) + "\n");
    Estimate mean{fit.mean_w, fit.mean_w_stderr, fit.n, "martingale", o.seed};
    emit_estimates(run, {{"mean_W", 0.0, 0.0, o.T, 0.0, std::nullopt, std::nullopt, mean}});
}

void cmd_conditioned(Run& run) {
    const Options& o = *run.opt;
    const LdpParams p = checked_params(o);
    check_z_range(o);
    const ConditionedSummary s =
        conditioned_stats(p, o.t, o.y, o.z_lo, o.z_hi, o.replicas, sim_config(o, o.t), o.workers);
    run.replicas["spine_per_window"] = o.replicas;
    if (s.low_ess)
        run.warnings.push_back("LowESS: effective sample size " + format_double(s.effective_sample_size) + " < 100");
    Json out = conditioned_json(s);
    out["targets"] = {{"pareto_index", p.kappa},
                      {"overlap_var", std::pow(overlap_scale(p), 2) * p.sigma2_cond},
                      {"jump_pos_var", std::pow(position_scale(p), 2) * p.sigma2_cond},
                      {"max_var", std::pow(maximum_scale(p), 2) * p.sigma2_cond},
                      {"overlap_time", p.p * o.t}};
    run.emit("conditioned.json", out.dump(2) + "\n");
}

void cmd_overlap(Run& run) {
    const Options& o = *run.opt;
    check_theta(o.theta);
    const SimConfig cfg = sim_config(o, o.T);
    std::vector<EstimateRow> rows;
    for (double r : o.r_list) {
        if (!(r >= 0.0 && r < o.T))
            throw UsageError("--r " + format_double(r) + ": must lie in [0, T)");
        const Estimate e = overlap_limit(r, o.theta, o.T, o.replicas, cfg, o.workers);
        rows.push_back({"OL", 0.0, 0.0, o.T, r, std::nullopt, std::nullopt, e});
        if (o.pairs_x > 0.0) {
            const Estimate pe = pair_overlap_exceedance(o.pairs_x, o.T, r, o.replicas, cfg, o.workers);
            rows.push_back({"P_overlap_ge_r", o.pairs_x, 0.0, o.T, r, std::nullopt, std::nullopt, pe});
        }
    }
    if (o.T > 2.0 && !o.r_list.empty() && o.r_list.back() < o.T - 2.0) {
        const Estimate back = overlap_limit(o.r_list.back(), o.theta, o.T - 2.0, o.replicas, cfg, o.workers);
        const double last = rows[rows.size() - (o.pairs_x > 0.0 ? 2 : 1)].estimate.value;
        const double drift = last != 0.0 ? std::fabs(last - back.value) / last : 0.0;
        if (drift >= 0.02)
            run.warnings.push_back("OL at T and T-2 differ by " + format_double(100.0 * drift) + "%");
    }
    run.replicas["overlap"] = o.replicas;
    emit_estimates(run, rows);
}

void cmd_fpt_test(Run& run) {
    const Options& o = *run.opt;
    const LdpParams p = checked_params(o);
    const double alpha = p.dpsi_kappa * p.s(o.t) - o.z;
    if (!(alpha > 0.0)) throw UsageError("--z " + format_double(o.z) + ": level must lie below the start of V");
    const IgParams ig{alpha, p.dpsi_kappa, p.ddpsi_kappa};
    const SimConfig base = sim_config(o, o.t);
    const auto taus = parallel_map<double>(static_cast<std::size_t>(o.replicas), o.workers, [&](std::size_t i) {
        SimConfig c = base;
        c.replica_index = replica_id(kDomainFpt, hash_double(o.z), i);
        return sample_stop_time(p, o.t, o.z, c);
    });
    const KsResult ks = ks_test(taus, {}, [&](double v) { return ig_cdf(ig, v); });
    Tally tally;
    for (double v : taus) tally.add(v);
    const double target_mean = alpha / p.dpsi_kappa;
    Json out;
    out["alpha"] = alpha;
    out["nu"] = p.dpsi_kappa;
    out["sigma2"] = p.ddpsi_kappa;
    out["n"] = o.replicas;
    out["ks_statistic"] = ks.statistic;
    out["ks_pvalue"] = ks.pvalue;
    out["mean"] = tally.mean();
    out["mean_target"] = target_mean;
    out["normalized_variance"] = tally.variance() / target_mean;
    out["normalized_variance_target"] = p.ddpsi_kappa / (p.dpsi_kappa * p.dpsi_kappa);
    run.replicas["fpt"] = o.replicas;
    run.emit("fpt_test.json", out.dump(2) + "\n");
}

void cmd_trend(Run& run) {
    const Options& o = *run.opt;
    const LdpParams p = checked_params(o);
    for (std::size_t k = 1; k < o.t_list.size(); ++k)
        if (!(o.t_list[k] > o.t_list[k - 1])) throw UsageError("--t-list must be increasing");
    if (o.method == "spine") check_z_range(o);
    const auto rows = trend_e_it(p, o.t_list, o.y, o.method, o.replicas, o.z_lo, o.z_hi,
                                 sim_config(o, o.t_list.back()), o.workers, o.rate);
    run.replicas[o.method] = o.replicas;
    run.emit("trend.csv", trend_csv(rows));
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--seed", o.seed, "user seed")->capture_default_str();
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    sub->add_option("--max-particles", o.max_particles, "population cap per replica")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--crossing-mode", o.crossing, "segment_exact or grid_only")
        ->check(CLI::IsMember({"segment_exact", "grid_only"}))->capture_default_str();
    sub->add_option("--grid-dt", o.grid_dt, "grid step of the grid_only mode")
        ->check(CLI::PositiveNumber)->capture_default_str();
}

void add_xa(CLI::App* sub, Options& o) {
    sub->add_option("--x", o.x, "level slope x")->capture_default_str();
    sub->add_option("--a", o.a, "growth exponent a")->capture_default_str();
}

void add_replicas(CLI::App* sub, Options& o, bool per_window = false) {
    sub->add_option(per_window ? "--replicas,--replicas-per-window" : "--replicas", o.replicas,
                    per_window ? "replica count (per window on the spine route)" : "replica count")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_t(CLI::App* sub, Options& o) {
    sub->add_option("--t", o.t, "time horizon")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_y(CLI::App* sub, Options& o) {
    sub->add_option("--y", o.y, "threshold multiplier")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_windows(CLI::App* sub, Options& o) {
    sub->add_option("--z-lo,--z-min", o.z_lo, "first window offset")->capture_default_str();
    sub->add_option("--z-hi,--z-max", o.z_hi, "window offsets stop before this")->capture_default_str();
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Branching Brownian motion large-deviation toolkit"};
    app.set_config("--config", "", "key = value file mirroring the flags; flags win");
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    Options o;

    auto* params = app.add_subcommand("params", "print the derived parameters as JSON");
    add_xa(params, o);
    add_common(params, o);

    auto* sim = app.add_subcommand("simulate", "per-replica observables of standard BBM");
    add_xa(sim, o);
    add_t(sim, o);
    add_replicas(sim, o);
    sim->add_option("--z", o.z, "window offset of tau_z")->capture_default_str();
    sim->add_flag("--tree-dump", o.tree_dump, "also write the segments of replica 0 to tree.csv");
    add_common(sim, o);

    auto* est = app.add_subcommand("estimate-ldp", "estimate P(L_t(xt) >= y e^{at}/sqrt t)");
    est->add_option("--method", o.method, "naive or spine")->check(CLI::IsMember({"naive", "spine"}))->capture_default_str();
    add_xa(est, o);
    add_t(est, o);
    add_y(est, o);
    add_replicas(est, o, true);
    add_windows(est, o);
    add_common(est, o);

    auto* tail = app.add_subcommand("tail-fit", "fit the tail exponent of W_T(theta)");
    tail->add_option("--theta", o.theta, "tilt in (0, sqrt 2)")->capture_default_str();
    tail->add_option("--T", o.T, "time horizon")->check(CLI::PositiveNumber)->capture_default_str();
    add_replicas(tail, o);
    add_common(tail, o);

    auto* cond = app.add_subcommand("conditioned", "statistics of BBM conditioned on a large level set");
    add_xa(cond, o);
    add_t(cond, o);
    add_y(cond, o);
    add_replicas(cond, o, true);
    add_windows(cond, o);
    add_common(cond, o);

    auto* ovl = app.add_subcommand("overlap", "overlap distribution OL(r, theta)");
    ovl->add_option("--theta", o.theta, "tilt in (0, sqrt 2)")->capture_default_str();
    ovl->add_option("--T", o.T, "time horizon")->check(CLI::PositiveNumber)->capture_default_str();
    ovl->add_option("--r", o.r_list, "overlap times")->delimiter(',')->capture_default_str();
    ovl->add_option("--pairs-x", o.pairs_x, "also estimate P(R >= r) for level-set pairs at slope x")
        ->check(CLI::NonNegativeNumber);
    add_replicas(ovl, o);
    add_common(ovl, o);

    auto* fpt = app.add_subcommand("fpt-test", "KS test of the spine passage time against its inverse-Gaussian law");
    add_xa(fpt, o);
    add_t(fpt, o);
    fpt->add_option("--z", o.z, "level offset")->capture_default_str();
    add_replicas(fpt, o);
    add_common(fpt, o);

    auto* trend = app.add_subcommand("trend", "e^{It} P(t) over a list of times");
    trend->add_option("--method", o.method, "naive or spine")->check(CLI::IsMember({"naive", "spine"}))->capture_default_str();
    add_xa(trend, o);
    add_y(trend, o);
    trend->add_option("--t-list", o.t_list, "increasing times")->delimiter(',')->capture_default_str();
    trend->add_option("--rate", o.rate, "exponential rate; 0 means I(x,a)")->capture_default_str();
    add_replicas(trend, o, true);
    add_windows(trend, o);
    add_common(trend, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    Run run;
    run.command = chosen->get_name();
    run.opt = &o;
    run.config = Json::object();
    for (const CLI::Option* opt : chosen->get_options()) {
        if (opt->get_name() == "--help" || opt->get_name() == "--out-dir" || opt->get_name() == "--workers") continue;
        const auto res = opt->reduced_results();
        if (!res.empty()) run.config[opt->get_lnames().front()] = res.size() == 1 ? Json(res.front()) : Json(res);
        else if (!opt->get_default_str().empty()) run.config[opt->get_lnames().front()] = opt->get_default_str();
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        if (run.command == "params") cmd_params(run);
        else if (run.command == "simulate") cmd_simulate(run);
        else if (run.command == "estimate-ldp") cmd_estimate_ldp(run);
        else if (run.command == "tail-fit") cmd_tail_fit(run);
        else if (run.command == "conditioned") cmd_conditioned(run);
        else if (run.command == "overlap") cmd_overlap(run);
        else if (run.command == "fpt-test") cmd_fpt_test(run);
        else if (run.command == "trend") cmd_trend(run);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(run, secs);
        for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace bbmld
