#pragma once

#include <string>
#include <vector>

#include "crossworld/estimator.hpp"
#include "crossworld/oracle.hpp"
#include "nlohmann/json.hpp"

namespace crossworld {

// Machine-first report serialization. The "generated_at" timestamp is the
// only field excluded from byte-identity comparisons across reruns.
nlohmann::json report_to_json(const EstimateReport& report, bool with_timestamp = true);
nlohmann::json oracle_to_json(const OracleResult& result);
nlohmann::json summary_stats_to_json(const SummaryStats& stats);
nlohmann::json support_summary_to_json(const SupportSummary& summary);

// Two-column key,value CSV of the headline numbers.
std::string report_to_csv_summary(const EstimateReport& report);

// Long-format diagnostics: metric,time,stat,value (weight quantiles, ESS per
// time, estimated-ratio quantiles, clip counters).
std::string diagnostics_to_csv(const ReportDiagnostics& diagnostics);

// Rendering of the report as a small human-readable table.
std::string report_to_table(const EstimateReport& report);

// --- golden-value manifest ---

struct GoldenEntry {
  std::string model;
  nlohmann::json model_params = nlohmann::json::object();
  std::vector<int> regime_a;
  std::vector<int> regime_b;
  nlohmann::json weights;
  std::uint64_t seed = 0;
  long draws = 0;
  std::string method;  // "monte_carlo" | "enumeration"
  double value = 0.0;
  double se = 0.0;
};

std::vector<GoldenEntry> read_golden_manifest(const std::string& path);
void write_golden_manifest(const std::vector<GoldenEntry>& entries,
                           const std::string& path);

// Recomputes the entry's oracle value from its own recipe.
OracleResult recompute_golden(const GoldenEntry& entry, int threads = 0);

// The checked-in golden recipes (values filled in by recompute).
std::vector<GoldenEntry> default_golden_recipes();

}  // namespace crossworld
