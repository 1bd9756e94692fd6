#include "crossworld/report_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"

namespace crossworld {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace

nlohmann::json summary_stats_to_json(const SummaryStats& stats) {
  return nlohmann::json{{"min", stats.min},   {"q25", stats.q25},
                        {"median", stats.median}, {"mean", stats.mean},
                        {"q75", stats.q75},   {"max", stats.max}};
}

nlohmann::json support_summary_to_json(const SupportSummary& summary) {
  return nlohmann::json{{"share", summary.share},
                        {"quantiles", summary_stats_to_json(summary.quantiles)},
                        {"draws", summary.draws}};
}

nlohmann::json report_to_json(const EstimateReport& report, bool with_timestamp) {
  nlohmann::json diag;
  diag["ess"] = report.diagnostics.ess_per_time;
  diag["weight_product"] = summary_stats_to_json(report.diagnostics.weight_product);
  nlohmann::json rho = nlohmann::json::array();
  for (const SummaryStats& s : report.diagnostics.rho_by_time) {
    rho.push_back(summary_stats_to_json(s));
  }
  diag["rho_quantiles"] = rho;
  diag["clip_events"] = {{"rho_floor", report.diagnostics.rho_floor_hits},
                         {"rho_ceiling", report.diagnostics.rho_ceiling_hits},
                         {"empty_subsample", report.diagnostics.empty_subsample_events}};
  diag["warnings"] = report.diagnostics.warnings;

  nlohmann::json out;
  out["psi_hat"] = report.psi_hat;
  out["sigma2"] = report.sigma2_hat;
  out["ci"] = {report.ci_lo, report.ci_hi};
  out["n"] = report.n_eval;
  out["alpha"] = report.alpha;
  out["method"] = report.method;
  out["valid_inference"] = report.valid_inference;
  out["diagnostics"] = diag;
  if (with_timestamp) out["generated_at"] = iso_timestamp();
  return out;
}

nlohmann::json oracle_to_json(const OracleResult& result) {
  return nlohmann::json{{"value", result.value},
                        {"se", result.standard_error},
                        {"method", result.method},
                        {"draws", result.draws}};
}

std::string report_to_csv_summary(const EstimateReport& report) {
  std::ostringstream out;
  out << "key,value\n";
  out << "method," << report.method << "\n";
  out << "psi_hat," << format_double(report.psi_hat) << "\n";
  out << "sigma2," << format_double(report.sigma2_hat) << "\n";
  out << "ci_lo," << format_double(report.ci_lo) << "\n";
  out << "ci_hi," << format_double(report.ci_hi) << "\n";
  out << "alpha," << format_double(report.alpha) << "\n";
  out << "n," << report.n_eval << "\n";
  out << "valid_inference," << (report.valid_inference ? 1 : 0) << "\n";
  return out.str();
}

std::string diagnostics_to_csv(const ReportDiagnostics& diagnostics) {
  std::ostringstream out;
  out << "metric,time,stat,value\n";
  for (std::size_t t = 0; t < diagnostics.ess_per_time.size(); ++t) {
    out << "ess," << (t + 1) << ",," << format_double(diagnostics.ess_per_time[t]) << "\n";
  }
  auto stats_rows = [&](const std::string& metric, const std::string& time,
                        const SummaryStats& s) {
    out << metric << "," << time << ",min," << format_double(s.min) << "\n";
    out << metric << "," << time << ",q25," << format_double(s.q25) << "\n";
    out << metric << "," << time << ",median," << format_double(s.median) << "\n";
    out << metric << "," << time << ",mean," << format_double(s.mean) << "\n";
    out << metric << "," << time << ",q75," << format_double(s.q75) << "\n";
    out << metric << "," << time << ",max," << format_double(s.max) << "\n";
  };
  stats_rows("cumulative_weight", "", diagnostics.weight_product);
  for (std::size_t t = 0; t < diagnostics.rho_by_time.size(); ++t) {
    stats_rows("rho", std::to_string(t + 2), diagnostics.rho_by_time[t]);
  }
  out << "clip_events,,rho_floor," << diagnostics.rho_floor_hits << "\n";
  out << "clip_events,,rho_ceiling," << diagnostics.rho_ceiling_hits << "\n";
  out << "clip_events,,empty_subsample," << diagnostics.empty_subsample_events << "\n";
  return out.str();
}

std::string report_to_table(const EstimateReport& report) {
  char line[160];
  std::ostringstream out;
  std::snprintf(line, sizeof(line), "%-22s %s\n", "method", report.method.c_str());
  out << line;
  std::snprintf(line, sizeof(line), "%-22s %.6f\n", "point estimate", report.psi_hat);
  out << line;
  const int level = static_cast<int>(std::lround((1.0 - report.alpha) * 100));
  std::snprintf(line, sizeof(line), "%d%% CI                 [%.6f, %.6f]\n", level,
                report.ci_lo, report.ci_hi);
  out << line;
  if (!report.valid_inference) {
    out << "note                   no valid inference (plug-in path)\n";
  }
  std::snprintf(line, sizeof(line), "%-22s %.6g\n", "sigma2", report.sigma2_hat);
  out << line;
  std::snprintf(line, sizeof(line), "%-22s %d\n", "n", report.n_eval);
  out << line;
  for (std::size_t t = 0; t < report.diagnostics.ess_per_time.size(); ++t) {
    std::snprintf(line, sizeof(line), "ESS (t=%zu)              %.1f\n", t + 1,
                  report.diagnostics.ess_per_time[t]);
    out << line;
  }
  return out.str();
}

namespace {

GoldenEntry golden_from_json(const nlohmann::json& j) {
  GoldenEntry e;
  e.model = j.at("model").get<std::string>();
  e.model_params = j.value("model_params", nlohmann::json::object());
  e.regime_a = j.at("regime_a").get<std::vector<int>>();
  e.regime_b = j.at("regime_b").get<std::vector<int>>();
  e.weights = j.at("weights");
  e.seed = j.value("seed", std::uint64_t{0});
  e.draws = j.value("draws", 0L);
  e.method = j.at("method").get<std::string>();
  e.value = j.value("value", 0.0);
  e.se = j.value("se", 0.0);
  return e;
}

nlohmann::json golden_to_json(const GoldenEntry& e) {
  nlohmann::json j;
  j["model"] = e.model;
  j["model_params"] = e.model_params;
  j["regime_a"] = e.regime_a;
  j["regime_b"] = e.regime_b;
  j["weights"] = e.weights;
  j["seed"] = e.seed;
  j["draws"] = e.draws;
  j["method"] = e.method;
  j["value"] = e.value;
  j["se"] = e.se;
  return j;
}

}  // namespace

std::vector<GoldenEntry> read_golden_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open golden manifest '" + path + "'");
  nlohmann::json j;
  in >> j;
  std::vector<GoldenEntry> out;
  for (const auto& entry : j.at("entries")) out.push_back(golden_from_json(entry));
  return out;
}

void write_golden_manifest(const std::vector<GoldenEntry>& entries,
                           const std::string& path) {
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  for (const GoldenEntry& e : entries) j["entries"].push_back(golden_to_json(e));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

OracleResult recompute_golden(const GoldenEntry& entry, int threads) {
  const ModelPtr model = make_model(entry.model, entry.model_params);
  const Regime regime_a = make_regime(entry.regime_a);
  const Regime regime_b = make_regime(entry.regime_b);
  const WeightSpec weights = parse_weight_spec(entry.weights, model->horizon());
  if (entry.method == "enumeration") {
    return identified_enumeration(*model, regime_a, regime_b, weights);
  }
  return estimand_mc(*model, regime_a, regime_b, weights, entry.draws, entry.seed,
                     threads);
}

std::vector<GoldenEntry> default_golden_recipes() {
  const nlohmann::json smooth20 = {
      {"all",
       {{"w", {{"kind", "smooth_trim"}, {"k", 20}}},
        {"w_prime", {{"kind", "smooth_trim"}, {"k", 20}}}}}};
  const nlohmann::json overlap = {
      {"all", {{"w", {{"kind", "linear"}}}, {"w_prime", {{"kind", "linear"}}}}}};

  std::vector<GoldenEntry> recipes;
  auto add = [&](const std::string& model, std::vector<int> a, std::vector<int> b,
                 const nlohmann::json& weights, const std::string& method, long draws,
                 std::uint64_t seed) {
    GoldenEntry e;
    e.model = model;
    e.regime_a = std::move(a);
    e.regime_b = std::move(b);
    e.weights = weights;
    e.method = method;
    e.draws = draws;
    e.seed = seed;
    recipes.push_back(std::move(e));
  };
  add("moderate_overlap", {1, 1}, {0, 0}, smooth20, "monte_carlo", 1000000, 777001);
  add("moderate_overlap", {1, 1}, {0, 0}, overlap, "monte_carlo", 1000000, 777002);
  add("binary_confounded", {1, 1}, {0, 0}, smooth20, "enumeration", 0, 0);
  add("binary_confounded", {1, 1}, {0, 0}, overlap, "enumeration", 0, 0);
  add("binary_depth3", {1, 1, 1}, {0, 0, 0}, smooth20, "enumeration", 0, 0);
  add("null_effect", {1, 1}, {0, 0}, smooth20, "enumeration", 0, 0);
  return recipes;
}

}  // namespace crossworld
