#include "crossworld/dgp.hpp"

#include <cmath>

#include "nlohmann/json.hpp"

namespace crossworld {

double StructuralModel::transition_density(int, const Eigen::VectorXd&,
                                           const std::vector<Eigen::VectorXd>&,
                                           const std::vector<int>&) const {
  throw NumericError("oracle density unavailable for model '" + name() + "'");
}

std::vector<Eigen::VectorXd> StructuralModel::transition_support(
    int, const std::vector<Eigen::VectorXd>&, const std::vector<int>&) const {
  throw NumericError("model '" + name() + "' does not enumerate covariate support");
}

double StructuralModel::outcome_mean(const std::vector<Eigen::VectorXd>&,
                                     const std::vector<int>&) const {
  throw NumericError("model '" + name() + "' has no closed-form outcome mean");
}

bool StructuralModel::is_reachable(int t_len, const std::vector<Eigen::VectorXd>& x_hist,
                                   const std::vector<int>& a_prefix) const {
  if (!has_densities()) return true;
  std::vector<Eigen::VectorXd> xs;
  std::vector<int> as;
  for (int s = 0; s < t_len; ++s) {
    if (transition_density(s, x_hist[static_cast<std::size_t>(s)], xs, as) <= 0.0) {
      return false;
    }
    xs.push_back(x_hist[static_cast<std::size_t>(s)]);
    if (s < static_cast<int>(a_prefix.size())) {
      const double p = treatment_propensity(s, xs, as);
      const double p_taken = a_prefix[static_cast<std::size_t>(s)] == 1 ? p : 1.0 - p;
      if (p_taken <= 0.0) return false;
      as.push_back(a_prefix[static_cast<std::size_t>(s)]);
    }
  }
  return true;
}

NoiseRecord draw_noise(const StructuralModel& model, std::uint64_t seed, std::uint64_t unit) {
  const int T = model.horizon();
  NoiseRecord noise;
  noise.u_x.resize(static_cast<std::size_t>(T));
  noise.u_a.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const int m = model.noise_dim_x(t);
    Eigen::VectorXd u(m);
    for (int j = 0; j < m; ++j) {
      u[j] = unit_uniform(seed, unit, NoiseKind::Covariate, static_cast<std::uint64_t>(t),
                          static_cast<std::uint64_t>(j));
    }
    noise.u_x[static_cast<std::size_t>(t)] = std::move(u);
    noise.u_a[static_cast<std::size_t>(t)] =
        unit_uniform(seed, unit, NoiseKind::Treatment, static_cast<std::uint64_t>(t));
  }
  noise.u_y = unit_uniform(seed, unit, NoiseKind::Outcome, 0);
  return noise;
}

namespace {

double checked_propensity(const StructuralModel& model, int t,
                          const std::vector<Eigen::VectorXd>& x_hist,
                          const std::vector<int>& a_hist) {
  const double p = model.treatment_propensity(t, x_hist, a_hist);
  if (!(p >= 0.0 && p <= 1.0)) {
    throw NumericError("model '" + model.name() + "': propensity outside [0,1] at t=" +
                       std::to_string(t + 1));
  }
  return p;
}

}  // namespace

Trajectory simulate_unit(const StructuralModel& model, const NoiseRecord& noise) {
  const int T = model.horizon();
  Trajectory unit;
  for (int t = 0; t < T; ++t) {
    unit.covariates.push_back(model.covariate_mechanism(
        t, unit.covariates, unit.treatments, noise.u_x[static_cast<std::size_t>(t)]));
    const double p = checked_propensity(model, t, unit.covariates, unit.treatments);
    unit.treatments.push_back(noise.u_a[static_cast<std::size_t>(t)] < p ? 1 : 0);
  }
  unit.outcome = model.outcome_mechanism(unit.covariates, unit.treatments, noise.u_y);
  if (!std::isfinite(unit.outcome)) {
    throw NumericError("model '" + model.name() + "': non-finite outcome");
  }
  return unit;
}

Trajectory simulate_counterfactual_unit(const StructuralModel& model,
                                        const NoiseRecord& noise, const Regime& regime) {
  const int T = model.horizon();
  if (regime.horizon() != T) {
    throw ConfigError("regime length " + std::to_string(regime.horizon()) +
                      " does not match model horizon " + std::to_string(T));
  }
  Trajectory path;
  std::vector<int> intervened;
  for (int t = 0; t < T; ++t) {
    path.covariates.push_back(model.covariate_mechanism(
        t, path.covariates, intervened, noise.u_x[static_cast<std::size_t>(t)]));
    // Natural treatment value: what the model would assign after the
    // intervention through t-1, before being overridden at t.
    const double p = checked_propensity(model, t, path.covariates, intervened);
    path.treatments.push_back(noise.u_a[static_cast<std::size_t>(t)] < p ? 1 : 0);
    intervened.push_back(regime.at(t));
  }
  path.outcome = model.outcome_mechanism(path.covariates, intervened, noise.u_y);
  return path;
}

PanelDataset simulate_observational(const StructuralModel& model, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("simulation requires n >= 1");
  PanelDataset data;
  data.horizon = model.horizon();
  data.covariate_dim = model.covariate_dim();
  data.units.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    data.units.push_back(
        simulate_unit(model, draw_noise(model, seed, static_cast<std::uint64_t>(i))));
  }
  return validate_dataset(data), data;
}

std::vector<CrossWorldDraw> simulate_cross_world(const StructuralModel& model,
                                                 const Regime& regime_a,
                                                 const Regime& regime_b, int n,
                                                 std::uint64_t seed) {
  if (regime_a.horizon() != model.horizon() || regime_b.horizon() != model.horizon()) {
    throw ConfigError("regime length does not match model horizon");
  }
  std::vector<CrossWorldDraw> draws;
  draws.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    CrossWorldDraw d;
    d.noise = draw_noise(model, seed, static_cast<std::uint64_t>(i));
    d.world_a = simulate_counterfactual_unit(model, d.noise, regime_a);
    d.world_b = simulate_counterfactual_unit(model, d.noise, regime_b);
    d.observational = simulate_unit(model, d.noise);
    draws.push_back(std::move(d));
  }
  return draws;
}

double true_propensity(const StructuralModel& model, int t,
                       const std::vector<Eigen::VectorXd>& x_hist,
                       const std::vector<int>& a_prefix) {
  if (static_cast<int>(x_hist.size()) != t + 1 || static_cast<int>(a_prefix.size()) != t) {
    throw ConfigError("true_propensity: history shapes inconsistent with t");
  }
  if (!model.is_reachable(t + 1, x_hist, a_prefix)) return 0.0;
  return checked_propensity(model, t, x_hist, a_prefix);
}

double true_propensity_for(const StructuralModel& model, int t,
                           const std::vector<Eigen::VectorXd>& x_hist,
                           const std::vector<int>& a_prefix, int a_target) {
  if (!model.is_reachable(t + 1, x_hist, a_prefix)) return 0.0;
  const double p = checked_propensity(model, t, x_hist, a_prefix);
  return a_target == 1 ? p : 1.0 - p;
}

double natural_propensity(const StructuralModel& model, int t,
                          const std::vector<Eigen::VectorXd>& x_hist,
                          const std::vector<int>& a_prefix, int a_target) {
  const double p = checked_propensity(model, t, x_hist, a_prefix);
  return a_target == 1 ? p : 1.0 - p;
}

double true_density_ratio(const StructuralModel& model, int t,
                          const std::vector<Eigen::VectorXd>& x_hist,
                          const std::vector<int>& a_prefix,
                          const std::vector<int>& a_prefix_other) {
  if (t == 0) return 1.0;
  if (!model.has_densities()) {
    throw NumericError("oracle density unavailable for model '" + model.name() + "'");
  }
  if (static_cast<int>(x_hist.size()) != t + 1 ||
      static_cast<int>(a_prefix.size()) < t || static_cast<int>(a_prefix_other.size()) < t) {
    throw ConfigError("true_density_ratio: history shapes inconsistent with t");
  }
  const std::vector<Eigen::VectorXd> past(x_hist.begin(), x_hist.end() - 1);
  const std::vector<int> pre(a_prefix.begin(), a_prefix.begin() + t);
  const std::vector<int> pre_other(a_prefix_other.begin(), a_prefix_other.begin() + t);
  const double num = model.transition_density(t, x_hist.back(), past, pre);
  if (num == 0.0) return 0.0;
  const double den = model.transition_density(t, x_hist.back(), past, pre_other);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace crossworld
