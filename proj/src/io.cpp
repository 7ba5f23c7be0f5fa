#include "bbmld/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bbmld {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace {

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

Json opt_json(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

std::string estimates_csv(const std::vector<EstimateRow>& rows) {
    std::ostringstream out;
    for (std::size_t k = 0; k < kEstimateColumns.size(); ++k)
        out << (k ? "," : "") << kEstimateColumns[k];
    out << '\n';
    for (const auto& r : rows) {
        out << r.quantity << ',' << format_double(r.x) << ',' << format_double(r.a) << ','
            << format_double(r.t) << ',' << format_double(r.y) << ',' << opt_int(r.z_lo) << ','
            << opt_int(r.z_hi) << ',' << format_double(r.estimate.value) << ','
            << format_double(r.estimate.std_error) << ',' << r.estimate.n << ','
            << r.estimate.method << ',' << r.estimate.seed << '\n';
    }
    return out.str();
}

Json estimates_json(const std::vector<EstimateRow>& rows) {
    Json arr = Json::array();
    for (const auto& r : rows) {
        Json o;
        o["quantity"] = r.quantity;
        o["x"] = r.x;
        o["a"] = r.a;
        o["t"] = r.t;
        o["y"] = r.y;
        o["z_lo"] = opt_json(r.z_lo);
        o["z_hi"] = opt_json(r.z_hi);
        o["estimate"] = r.estimate.value;
        o["stderr"] = r.estimate.std_error;
        o["n"] = r.estimate.n;
        o["method"] = r.estimate.method;
        o["seed"] = r.estimate.seed;
        arr.push_back(std::move(o));
    }
    return arr;
}

Json params_json(const LdpParams& p) {
    Json o;
    o["x"] = p.x;
    o["a"] = p.a;
    o["theta"] = p.theta;
    o["p"] = p.p;
    o["b"] = p.b;
    o["rate_I"] = p.rate_I;
    o["kappa"] = p.kappa;
    o["dpsi_kappa"] = p.dpsi_kappa;
    o["ddpsi_kappa"] = p.ddpsi_kappa;
    o["sigma2_cond"] = p.sigma2_cond;
    o["v_speed"] = p.v_speed;
    return o;
}

std::string simulate_csv(const std::vector<SimulateRow>& rows) {
    std::ostringstream out;
    out << "replica,population,level_count,W_theta,I_min,s_argmin,tau_z,M_t,hits_line\n";
    for (const auto& r : rows) {
        out << r.replica << ',' << r.population << ',' << r.level_count << ','
            << format_double(r.w_theta) << ',' << format_double(r.i_min) << ','
            << format_double(r.s_argmin) << ',' << (r.tau_z ? format_double(*r.tau_z) : "")
            << ',' << format_double(r.m_t) << ',' << (r.hits_line ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string tree_csv(const ParticleTree& tree) {
    std::ostringstream out;
    out << "particle_id,parent_id,t_birth,x_birth,t_end,x_end\n";
    for (const Segment& s : tree.segments()) {
        out << s.particle_id << ',' << (s.has_parent() ? std::to_string(s.parent_id) : "") << ','
            << format_double(s.t_birth) << ',' << format_double(s.x_birth) << ','
            << format_double(s.t_end) << ',' << format_double(s.x_end) << '\n';
    }
    return out.str();
}

std::string trend_csv(const std::vector<TrendRow>& rows) {
    std::ostringstream out;
    out << "t,estimate,stderr,n,method,seed,scaled,scaled_stderr,ratio,ratio_stderr\n";
    for (const auto& r : rows) {
        out << format_double(r.t) << ',' << format_double(r.estimate.value) << ','
            << format_double(r.estimate.std_error) << ',' << r.estimate.n << ','
            << r.estimate.method << ',' << r.estimate.seed << ',' << format_double(r.scaled)
            << ',' << format_double(r.scaled_stderr) << ',' << format_double(r.ratio) << ','
            << format_double(r.ratio_stderr) << '\n';
    }
    return out.str();
}

Json tail_fit_json(const TailFit& f) {
    Json o;
    o["kappa_hat"] = f.kappa_hat;
    o["c_w_hat"] = f.c_w_hat;
    o["fit_window"] = {f.y_lo, f.y_hi};
    o["n"] = f.n;
    o["kappa_theory"] = f.kappa_theory;
    o["mean_W"] = f.mean_w;
    o["mean_W_stderr"] = f.mean_w_stderr;
    o["frac_positive"] = f.frac_positive;
    o["envelope_min"] = f.envelope_min;
    o["envelope_max"] = f.envelope_max;
    return o;
}

Json conditioned_json(const ConditionedSummary& s) {
    Json o;
    o["pareto_index_hat"] = s.pareto_index_hat;
    o["hill_k"] = s.hill_k;
    o["pareto_ks_pvalue"] = s.pareto_ks_pvalue;
    o["overlap_time_mean"] = s.overlap_time_mean;
    o["overlap_mean"] = s.overlap_mean;
    o["overlap_var"] = s.overlap_var;
    o["jump_pos_mean"] = s.jump_pos_mean;
    o["jump_pos_var"] = s.jump_pos_var;
    o["max_mean"] = s.max_mean;
    o["max_var"] = s.max_var;
    o["s_argmin_mean"] = s.s_argmin_mean;
    o["s_argmin_var"] = s.s_argmin_var;
    o["prob_s_tau_far"] = s.prob_s_tau_far;
    o["prob_argmin_near_horizon"] = s.prob_argmin_near_horizon;
    o["effective_sample_size"] = s.effective_sample_size;
    o["pair_ess"] = s.pair_ess;
    o["n"] = s.n;
    o["n_contributing"] = s.n_contributing;
    o["low_ess"] = s.low_ess;
    return o;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace bbmld
