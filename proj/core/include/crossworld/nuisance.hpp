#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crossworld/learners.hpp"
#include "crossworld/panel.hpp"
#include "crossworld/weights.hpp"
#include "nlohmann/json_fwd.hpp"

namespace crossworld {

// Cross-fitting fold assignment: a seeded shuffle dealt round-robin.
struct FoldPlan {
  int folds = 0;
  std::vector<int> fold_of_unit;

  static FoldPlan make(int n, int folds, std::uint64_t seed);
  std::vector<int> train_units(int fold) const;
  std::vector<int> eval_units(int fold) const;
  int n_units() const { return static_cast<int>(fold_of_unit.size()); }
};

struct NuisanceConfig {
  LearnerPtr propensity_learner;
  LearnerPtr ratio_learner;
  LearnerPtr outcome_learner;
  std::uint64_t seed = 0;
  double rho_max = 50.0;          // estimated-ratio ceiling
  double classifier_floor = 1e-3; // denominator factor floor tau
  double divisor_floor = 1e-4;    // propensity divisor clip inside ratio terms

  // {"learner":..., "seed":..., "rho_max":..., "classifier_floor":...,
  //  "divisor_floor":..., "propensity":{...}, "density_ratio":{...},
  //  "outcome":{...}} -- per-nuisance overrides are full learner configs.
  static NuisanceConfig from_json(const nlohmann::json& spec);
  static NuisanceConfig defaults();
};

struct NuisanceDiagnostics {
  long empty_subsample_events = 0;
  long rho_floor_hits = 0;    // denominator factor below tau
  long rho_ceiling_hits = 0;  // assembled ratio clipped at rho_max
  std::vector<std::string> warnings;

  void merge(const NuisanceDiagnostics& other);
};

// Cross-fitted nuisance predictions, one row per unit; row i always comes
// from models whose training folds excluded unit i. Column t is the 0-based
// timepoint. These are the only inputs the influence-function evaluation
// needs, so exact or perturbed oracle values can stand in for fitted ones.
struct NuisanceValues {
  Eigen::MatrixXd pi;        // P(A_t = a_t | X-history), target regime
  Eigen::MatrixXd pi_prime;  // P(A_t = a'_t | X-history), other regime
  Eigen::MatrixXd rho;       // transition density ratio target/other; col 0 is 1
  Eigen::MatrixXd m;         // sequential regression under the target regime
};

// Everything fitted for an ordered regime pair (a, b): both propensity
// chains, the shared density-ratio classifiers, and sequential regressions
// under each target. Half b swaps every role (target regime, weight slot,
// ratio direction).
class NuisanceSet {
 public:
  FoldPlan folds;
  NuisanceValues half_a;  // target = regime a, other = regime b
  NuisanceValues half_b;  // target = regime b, other = regime a
  NuisanceDiagnostics diagnostics;

  // Fold bookkeeping for hygiene checks.
  std::vector<std::vector<int>> train_units_of_fold;
};

NuisanceSet fit_nuisances(const PanelDataset& data, const Regime& regime_a,
                          const Regime& regime_b, const WeightSpec& weights,
                          const NuisanceConfig& config, const FoldPlan& folds);

// --- individually exposed fitting stages (per-fold models) ---

struct FittedProbability {
  std::unique_ptr<PredictiveModel> model;  // null: constant fallback below
  double constant = 0.0;
};

// Per-fold, per-timepoint propensity models P(A_t = a_t | X-history) fitted
// on the regime-consistent training subsample. An empty subsample yields the
// zero-convention constant and a structured warning.
struct PropensityFit {
  std::vector<std::vector<FittedProbability>> per_fold;  // [fold][t]
  NuisanceDiagnostics diagnostics;

  // Prediction for one unit from the given fold's model at 0-based time t.
  double predict(int fold, int t, const Trajectory& unit) const;
};

PropensityFit fit_propensities(const PanelDataset& data, const Regime& regime,
                               const LearnerPtr& learner, const FoldPlan& folds,
                               std::uint64_t seed);

// The four history classifiers backing the density-ratio identity at each
// t >= 2 (1-based), fitted on the full training fold.
struct DensityRatioFit {
  struct PerTime {
    FittedProbability prefix_a_on_current;   // P(prefix = a | X through t)
    FittedProbability prefix_b_on_current;   // P(prefix = b | X through t)
    FittedProbability prefix_a_on_previous;  // P(prefix = a | X through t-1)
    FittedProbability prefix_b_on_previous;  // P(prefix = b | X through t-1)
    bool prefixes_equal = false;             // ratio is exactly 1
  };
  std::vector<std::vector<PerTime>> per_fold;  // [fold][t], t >= 1 slots used
  double rho_max = 50.0;
  double classifier_floor = 1e-3;

  // Assembled, clipped ratio for one unit; swapped=true exchanges the roles
  // of the two prefixes (the ratio for the second half of a contrast).
  double predict(int fold, int t, const Trajectory& unit, bool swapped,
                 NuisanceDiagnostics* diag) const;
};

DensityRatioFit fit_density_ratio(const PanelDataset& data, const Regime& regime_a,
                                  const Regime& regime_b, const LearnerPtr& learner,
                                  const FoldPlan& folds, std::uint64_t seed,
                                  double rho_max, double classifier_floor);

// Backward sequential regressions under `regime`, with pseudo-outcomes
// weighted by w_{t+1}(pi_{t+1}) * w'_{t+1}(pi'_{t+1}); pi and pi_prime are
// cross-fitted per-fold prediction matrices over all units.
struct SequentialFit {
  std::vector<std::vector<FittedProbability>> per_fold;  // [fold][t]
  NuisanceDiagnostics diagnostics;

  double predict(int fold, int t, const Trajectory& unit) const;
};

SequentialFit fit_sequential_regressions(
    const PanelDataset& data, const Regime& regime, const PropensityFit& pi,
    const PropensityFit& pi_prime, const WeightSpec& weights, const LearnerPtr& learner,
    const FoldPlan& folds, std::uint64_t seed);

}  // namespace crossworld
