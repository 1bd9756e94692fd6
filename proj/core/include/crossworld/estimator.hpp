#pragma once

#include <string>
#include <vector>

#include "crossworld/nuisance.hpp"
#include "crossworld/panel.hpp"
#include "crossworld/weights.hpp"

namespace crossworld {

// Per-unit uncentered influence-function evaluation, split into the
// sequential-regression part and the weight-estimation part, with per-time
// intermediates kept for inspection. phi = phi_m + phi_w exactly.
struct EifTerms {
  double phi = 0.0;
  double phi_m = 0.0;
  double phi_w = 0.0;
  std::vector<double> r;            // per t
  std::vector<double> r_prime;      // per t
  std::vector<double> rho;          // per t (index 0 is 1)
  std::vector<double> m;            // per t
  std::vector<double> w;            // w_t(pi_t)
  std::vector<double> w_prime;      // w'_t(pi'_t)
  std::vector<double> phi_t;        // dw_t(pi_t) (1{A_t=a_t} - pi_t)
  std::vector<double> phi_t_prime;  // dw'_t(pi'_t) (1{A_t=a'_t} - pi'_t)
};

struct ReportDiagnostics {
  std::vector<double> ess_per_time;            // ESS of cumulative weights through t
  SummaryStats weight_product;                 // per-unit product over all t
  std::vector<SummaryStats> rho_by_time;       // estimated ratio summaries, t >= 2
  long rho_floor_hits = 0;
  long rho_ceiling_hits = 0;
  long empty_subsample_events = 0;
  std::vector<std::string> warnings;
};

struct EstimateReport {
  double psi_hat = 0.0;
  double sigma2_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  int n_eval = 0;
  std::string method;           // "dr", "dr_contrast", "plugin"
  bool valid_inference = true;  // false for the plug-in path
  ReportDiagnostics diagnostics;
};

// Influence function from explicit per-time nuisance values for one unit
// (the target regime's propensities come first; `weights` is in target-slot
// order). Requires smooth weights. Spelled out:
//   phi_m = m_1 w_1 w'_1 + sum_t (prod_{s<=t} r_s) [m_{t+1} w_{t+1} w'_{t+1} - m_t]
//   phi_w = sum_t (prod_{s<t} r_s) m_t phi_t w'_t
//         + sum_t (prod_{s<t} r'_s rho_s) m_t w_t rho_t phi'_t
// with m_{T+1} = Y, w_{T+1} = w'_{T+1} = 1 and empty products equal to 1.
EifTerms eval_eif_values(const Trajectory& unit, const Regime& target,
                         const Regime& other, const std::vector<double>& pi,
                         const std::vector<double>& pi_prime,
                         const std::vector<double>& rho, const std::vector<double>& m,
                         const WeightSpec& weights, double divisor_floor = 1e-4);

// Convenience overload pulling the unit's cross-fitted rows (half a) from a
// NuisanceSet.
EifTerms eval_eif(const PanelDataset& data, int unit_index, const Regime& regime_a,
                  const Regime& regime_b, const NuisanceSet& nuisances,
                  const WeightSpec& weights, double divisor_floor = 1e-4);

struct EstimateOptions {
  int folds = 5;
  double alpha = 0.05;
  NuisanceConfig nuisance = NuisanceConfig::defaults();
};

// One half of the effect: the weighted mean under the target regime a.
EstimateReport dr_estimate(const PanelDataset& data, const Regime& regime_a,
                           const Regime& regime_b, const WeightSpec& weights,
                           const EstimateOptions& options);

// The full contrast psi(a) - psi(b). The second half runs the same machinery
// with the regime roles, weight slots, and ratio direction exchanged; the
// variance comes from the per-unit difference of the two influence functions.
EstimateReport dr_contrast(const PanelDataset& data, const Regime& regime_a,
                           const Regime& regime_b, const WeightSpec& weights,
                           const EstimateOptions& options);

// Sequential-regression plug-in of the identified contrast (no influence
// correction, no valid inference). Accepts non-smooth weights.
EstimateReport plug_in_estimate(const PanelDataset& data, const Regime& regime_a,
                                const Regime& regime_b, const WeightSpec& weights,
                                const EstimateOptions& options);

// Shared internals, exposed for oracle-driven tests: the per-unit influence
// column for one half given precomputed nuisance values.
std::vector<double> eif_column(const PanelDataset& data, const Regime& target,
                               const Regime& other, const NuisanceValues& values,
                               const WeightSpec& weights, double divisor_floor);

ReportDiagnostics compute_diagnostics(const PanelDataset& data,
                                      const NuisanceValues& values,
                                      const WeightSpec& weights,
                                      const NuisanceDiagnostics& fit_diagnostics);

WeightSpec swap_weight_slots(const WeightSpec& weights);

}  // namespace crossworld
