#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbmld/estimators.hpp"
#include "bbmld/params.hpp"
#include "bbmld/stats.hpp"
#include "bbmld/tree.hpp"

namespace bbmld {

using Json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// One row of estimates.csv.
struct EstimateRow {
    std::string quantity;
    double x = 0.0;
    double a = 0.0;
    double t = 0.0;
    double y = 0.0;
    std::optional<int> z_lo;
    std::optional<int> z_hi;
    Estimate estimate;
};

inline const std::vector<std::string> kEstimateColumns = {
    "quantity", "x", "a", "t", "y", "z_lo", "z_hi", "estimate", "stderr", "n", "method", "seed"};

std::string estimates_csv(const std::vector<EstimateRow>& rows);
Json estimates_json(const std::vector<EstimateRow>& rows);

Json params_json(const LdpParams& p);

/// One row of the simulate CSV.
struct SimulateRow {
    std::uint64_t replica = 0;
    std::int64_t population = 0;
    std::int64_t level_count = 0;
    double w_theta = 0.0;
    double i_min = 0.0;
    double s_argmin = 0.0;
    std::optional<double> tau_z;
    double m_t = 0.0;
    bool hits_line = false;
};

std::string simulate_csv(const std::vector<SimulateRow>& rows);

/// One row per segment: particle_id, parent_id, t_birth, x_birth, t_end, x_end.
std::string tree_csv(const ParticleTree& tree);

std::string trend_csv(const std::vector<TrendRow>& rows);
Json tail_fit_json(const TailFit& fit);
Json conditioned_json(const ConditionedSummary& s);

/// FNV-1a 64 of the bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace bbmld
