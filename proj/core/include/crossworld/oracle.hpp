#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crossworld/dgp.hpp"
#include "crossworld/estimator.hpp"
#include "crossworld/panel.hpp"
#include "crossworld/weights.hpp"

namespace crossworld {

struct OracleResult {
  double value = 0.0;
  double standard_error = 0.0;  // 0 for exact enumeration
  std::string method;           // "monte_carlo" | "enumeration"
  long draws = 0;
};

// The estimand by cross-world Monte Carlo: for each draw, both
// counterfactual worlds are rolled from one shared noise record, and the
// outcome difference is weighted by the product of natural propensities
// along each world's own path.
OracleResult estimand_mc(const StructuralModel& model, const Regime& regime_a,
                         const Regime& regime_b, const WeightSpec& weights, long draws,
                         std::uint64_t seed, int threads = 0);

// One g-formula integral: transitions and the outcome regression follow
// path_regime, while the weight product pairs the regime-a propensity with
// the w slot and the regime-b propensity with the w' slot, both evaluated at
// the enumerated path with the zero convention. Depth-first with pruning as
// soon as the running weight product is exactly zero.
double g_formula_half(const StructuralModel& model, const Regime& path_regime,
                      const Regime& regime_a, const Regime& regime_b,
                      const WeightSpec& weights);

// The identified contrast: g_formula_half along regime_a minus along
// regime_b. Requires a fully discrete model with exact transition pmfs.
OracleResult identified_enumeration(const StructuralModel& model, const Regime& regime_a,
                                    const Regime& regime_b, const WeightSpec& weights);

// Exact sequential regression value m_t(x-history) under `target`
// conditioning, with the shared weight product (regime_a propensity in the
// w slot, regime_b in the w' slot). 0-based t; x_hist has length t+1.
double exact_sequential_m(const StructuralModel& model, const Regime& target,
                          const Regime& regime_a, const Regime& regime_b,
                          const WeightSpec& weights, int t,
                          const std::vector<Eigen::VectorXd>& x_hist);

// --- support diagnostics ---

struct SupportSummary {
  double share = 0.0;        // fraction of mass with rho in (0, inf)
  SummaryStats quantiles;    // over the finite-positive values (NaN if none)
  long draws = 0;
};

// Monte Carlo over the regime_a counterfactual covariate law at 0-based
// time t, evaluating the exact transition density ratio.
SupportSummary support_diagnostic(const StructuralModel& model, int t,
                                  const Regime& regime_a, const Regime& regime_b,
                                  long draws, std::uint64_t seed);

// Same summary over fitted ratio values; "informative" means strictly
// positive and below the clip ceiling.
SupportSummary support_diagnostic_from_values(const std::vector<double>& rho_values,
                                              double ceiling);

// --- exact and perturbed nuisances (for influence-function experiments) ---

// Each function takes (0-based t, covariate history of length t+1).
struct NuisanceFunctions {
  std::function<double(int, const std::vector<Eigen::VectorXd>&)> pi;
  std::function<double(int, const std::vector<Eigen::VectorXd>&)> pi_prime;
  std::function<double(int, const std::vector<Eigen::VectorXd>&)> rho;
  std::function<double(int, const std::vector<Eigen::VectorXd>&)> m;
};

// Truth for the half with target regime_a: identified propensities with the
// zero convention, the exact transition density ratio, and the exact
// sequential regressions under the given weights.
NuisanceFunctions exact_nuisances(const StructuralModel& model, const Regime& regime_a,
                                  const Regime& regime_b, const WeightSpec& weights);

// Fixed-direction perturbation: pi + eps*h_pi, pi' + eps*h_pi_prime (both
// clamped to [0.001, 0.999]), m + eps*h_m, rho * (1 + eps*h_rho).
NuisanceFunctions perturb_nuisances(const NuisanceFunctions& base, double eps,
                                    double h_pi = 0.3, double h_pi_prime = -0.3,
                                    double h_m = 0.4, double h_rho = 0.4);

// Evaluate nuisance functions over a dataset into estimator-ready matrices.
NuisanceValues evaluate_nuisances(const NuisanceFunctions& funcs, const PanelDataset& data);

// Exact expectation of the uncentered influence function over the
// observational law, by full enumeration of (covariate, treatment) paths;
// the influence value is affine in Y, so E[Y | path] enters in closed form.
// Discrete models only.
double exact_eif_expectation(const StructuralModel& model, const Regime& target,
                             const Regime& other, const WeightSpec& weights,
                             const NuisanceFunctions& funcs,
                             double divisor_floor = 1e-4);

// Exact expectation of the plug-in m_1 w_1 w'_1 under the baseline law.
double exact_plug_in_expectation(const StructuralModel& model,
                                 const WeightSpec& weights,
                                 const NuisanceFunctions& funcs);

}  // namespace crossworld
