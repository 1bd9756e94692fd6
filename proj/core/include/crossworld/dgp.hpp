#pragma once

#include <Eigen/Core>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "crossworld/panel.hpp"
#include "crossworld/rng.hpp"
#include "nlohmann/json_fwd.hpp"

namespace crossworld {

// Exogenous noise for one unit: a fixed-length uniform vector per
// (variable, timepoint). Structural maps are pure functions of history and
// noise, which makes cross-world coupling exact: both counterfactual worlds
// of a unit consume the same record.
struct NoiseRecord {
  std::vector<Eigen::VectorXd> u_x;  // per timepoint
  std::vector<double> u_a;           // per timepoint
  double u_y = 0.0;
};

// A structural model over T timepoints. Treatments are generated by
// thresholding an independent uniform against the propensity, so the
// treatment noise at time t is independent of all later noise by
// construction. Mechanisms must be deterministic given the noise; histories
// are passed 0-based (x_hist holds x_1..x_t, a_hist holds a_1..a_{t-1}).
class StructuralModel {
 public:
  virtual ~StructuralModel() = default;

  virtual std::string name() const = 0;
  virtual std::string description() const = 0;
  virtual int horizon() const = 0;
  virtual int covariate_dim() const = 0;
  virtual int noise_dim_x(int /*t*/) const { return covariate_dim(); }

  // x_t given (x_1..x_{t-1}, a_1..a_{t-1}) and this timepoint's noise.
  virtual Eigen::VectorXd covariate_mechanism(int t,
                                              const std::vector<Eigen::VectorXd>& x_hist,
                                              const std::vector<int>& a_hist,
                                              const Eigen::VectorXd& u) const = 0;

  // p_t(h_t) = P(A_t = 1 | x_1..x_t, a_1..a_{t-1}), as a structural function.
  virtual double treatment_propensity(int t, const std::vector<Eigen::VectorXd>& x_hist,
                                      const std::vector<int>& a_hist) const = 0;

  virtual double outcome_mechanism(const std::vector<Eigen::VectorXd>& x_full,
                                   const std::vector<int>& a_full, double u_y) const = 0;

  // --- oracle-grade hooks (exact laws; built-in models provide them) ---

  virtual bool has_densities() const { return false; }
  // dP(x_t | x_1..x_{t-1}, a_1..a_{t-1}): pmf for discrete coordinates,
  // density for continuous ones, w.r.t. the model's per-time base measure.
  virtual double transition_density(int t, const Eigen::VectorXd& x_t,
                                    const std::vector<Eigen::VectorXd>& x_hist,
                                    const std::vector<int>& a_hist) const;

  virtual bool discrete() const { return false; }
  // Support of x_t given history; discrete models only.
  virtual std::vector<Eigen::VectorXd> transition_support(
      int t, const std::vector<Eigen::VectorXd>& x_hist,
      const std::vector<int>& a_hist) const;

  virtual bool has_outcome_mean() const { return false; }
  // E[Y | A = a_full, X = x_full].
  virtual double outcome_mean(const std::vector<Eigen::VectorXd>& x_full,
                              const std::vector<int>& a_full) const;

  // Whether the event {X_1..X_t = x_hist, A_1..A_{t-1} = a_prefix} has
  // positive probability. Decides the zero-propensity convention. The default
  // multiplies transition densities and prefix propensities when the model
  // exposes densities, and answers true otherwise.
  virtual bool is_reachable(int t_len, const std::vector<Eigen::VectorXd>& x_hist,
                            const std::vector<int>& a_prefix) const;
};

using ModelPtr = std::shared_ptr<const StructuralModel>;

NoiseRecord draw_noise(const StructuralModel& model, std::uint64_t seed, std::uint64_t unit);

// One unit simulated under the observational regime (no intervention).
Trajectory simulate_unit(const StructuralModel& model, const NoiseRecord& noise);

// One unit's counterfactual path under a fixed regime, from shared noise.
// The treatments field records natural values A_t(a-prefix through t-1);
// the outcome is Y under the full intervened sequence.
Trajectory simulate_counterfactual_unit(const StructuralModel& model,
                                        const NoiseRecord& noise, const Regime& regime);

struct CrossWorldDraw {
  NoiseRecord noise;
  Trajectory world_a;
  Trajectory world_b;
  Trajectory observational;
};

PanelDataset simulate_observational(const StructuralModel& model, int n, std::uint64_t seed);

std::vector<CrossWorldDraw> simulate_cross_world(const StructuralModel& model,
                                                 const Regime& regime_a,
                                                 const Regime& regime_b, int n,
                                                 std::uint64_t seed);

// P(A_t = 1 | X-history, A-prefix) with the zero convention: 0 whenever the
// conditioning event has probability zero. t is 0-based; x_hist has length
// t+1 and a_prefix length t.
double true_propensity(const StructuralModel& model, int t,
                       const std::vector<Eigen::VectorXd>& x_hist,
                       const std::vector<int>& a_prefix);

// Same, for a specific target treatment value (flips to 1-p for target 0;
// still 0 on unreachable conditioning events).
double true_propensity_for(const StructuralModel& model, int t,
                           const std::vector<Eigen::VectorXd>& x_hist,
                           const std::vector<int>& a_prefix, int a_target);

// Raw structural propensity of A_t = a_target along a realized counterfactual
// history (no zero convention; the conditioning event is the realized path).
double natural_propensity(const StructuralModel& model, int t,
                          const std::vector<Eigen::VectorXd>& x_hist,
                          const std::vector<int>& a_prefix, int a_target);

// Covariate transition density ratio between two treatment prefixes at
// 0-based time t: returns 1 at t=0, 0 when the numerator vanishes, +inf when
// only the denominator vanishes.
double true_density_ratio(const StructuralModel& model, int t,
                          const std::vector<Eigen::VectorXd>& x_hist,
                          const std::vector<int>& a_prefix,
                          const std::vector<int>& a_prefix_other);

// --- registry ---

ModelPtr make_model(const std::string& name, const nlohmann::json& params);
ModelPtr make_model(const std::string& name);

struct ModelInfo {
  std::string name;
  std::string description;
};

std::vector<ModelInfo> list_models();

}  // namespace crossworld
