#include "crossworld/oracle.hpp"

#include <atomic>
#include <cmath>
#include <future>
#include <thread>

namespace crossworld {

namespace {

void check_shapes(const StructuralModel& model, const Regime& regime_a,
                  const Regime& regime_b, const WeightSpec& weights) {
  if (regime_a.horizon() != model.horizon() || regime_b.horizon() != model.horizon()) {
    throw ConfigError("regime length does not match model horizon");
  }
  if (weights.horizon() != model.horizon()) {
    throw ConfigError("weight spec length does not match model horizon");
  }
}

std::vector<int> prefix_of(const Regime& r, int len) {
  return std::vector<int>(r.actions.begin(), r.actions.begin() + len);
}

}  // namespace

OracleResult estimand_mc(const StructuralModel& model, const Regime& regime_a,
                         const Regime& regime_b, const WeightSpec& weights, long draws,
                         std::uint64_t seed, int threads) {
  check_shapes(model, regime_a, regime_b, weights);
  if (draws < 1) throw ConfigError("estimand_mc requires draws >= 1");
  const int T = model.horizon();

  auto draw_value = [&](long i) {
    const NoiseRecord noise = draw_noise(model, seed, static_cast<std::uint64_t>(i));
    const Trajectory world_a = simulate_counterfactual_unit(model, noise, regime_a);
    const Trajectory world_b = simulate_counterfactual_unit(model, noise, regime_b);
    double weight = 1.0;
    std::vector<Eigen::VectorXd> xs_a, xs_b;
    for (int t = 0; t < T && weight != 0.0; ++t) {
      xs_a.push_back(world_a.covariates[static_cast<std::size_t>(t)]);
      xs_b.push_back(world_b.covariates[static_cast<std::size_t>(t)]);
      const double p_a =
          natural_propensity(model, t, xs_a, prefix_of(regime_a, t), regime_a.at(t));
      const double p_b =
          natural_propensity(model, t, xs_b, prefix_of(regime_b, t), regime_b.at(t));
      weight *= weights.at(t).w.eval(p_a) * weights.at(t).w_prime.eval(p_b);
    }
    return (world_a.outcome - world_b.outcome) * weight;
  };

  // Fixed-size chunks combined in index order: the result does not depend on
  // the number of worker threads.
  const long chunk = 1 << 14;
  const long n_chunks = (draws + chunk - 1) / chunk;
  std::vector<double> chunk_sums(static_cast<std::size_t>(n_chunks));
  std::vector<double> chunk_sq_sums(static_cast<std::size_t>(n_chunks));

  const int hw = threads > 0 ? threads
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::future<void>> workers;
  std::atomic<long> next_chunk{0};
  auto work = [&]() {
    std::vector<double> vals(static_cast<std::size_t>(chunk));
    std::vector<double> sqs(static_cast<std::size_t>(chunk));
    for (;;) {
      const long c = next_chunk.fetch_add(1);
      if (c >= n_chunks) return;
      const long begin = c * chunk;
      const long end = std::min(draws, begin + chunk);
      const std::size_t len = static_cast<std::size_t>(end - begin);
      for (long i = begin; i < end; ++i) {
        const double v = draw_value(i);
        vals[static_cast<std::size_t>(i - begin)] = v;
        sqs[static_cast<std::size_t>(i - begin)] = v * v;
      }
      chunk_sums[static_cast<std::size_t>(c)] =
          pairwise_sum(std::span<const double>(vals.data(), len));
      chunk_sq_sums[static_cast<std::size_t>(c)] =
          pairwise_sum(std::span<const double>(sqs.data(), len));
    }
  };
  for (int w = 1; w < hw; ++w) workers.push_back(std::async(std::launch::async, work));
  work();
  for (auto& f : workers) f.get();

  const double sum = pairwise_sum(chunk_sums);
  const double sum_sq = pairwise_sum(chunk_sq_sums);
  const double n = static_cast<double>(draws);
  const double mean_v = sum / n;
  const double var =
      draws > 1 ? std::max(0.0, (sum_sq - n * mean_v * mean_v) / (n - 1.0)) : 0.0;

  OracleResult result;
  result.value = mean_v;
  result.standard_error = std::sqrt(var / n);
  result.method = "monte_carlo";
  result.draws = draws;
  return result;
}

double g_formula_half(const StructuralModel& model, const Regime& path_regime,
                      const Regime& regime_a, const Regime& regime_b,
                      const WeightSpec& weights) {
  if (!model.discrete()) {
    throw NumericError("non-discrete model: exact enumeration needs finite covariate "
                       "support (model '" + model.name() + "')");
  }
  check_shapes(model, regime_a, regime_b, weights);
  const int T = model.horizon();

  double total = 0.0;
  std::vector<Eigen::VectorXd> xs;
  std::function<void(int, double, double)> dfs = [&](int t, double prob, double weight) {
    if (t == T) {
      total += prob * weight *
               model.outcome_mean(xs, path_regime.actions);
      return;
    }
    const std::vector<int> path_prefix = prefix_of(path_regime, t);
    for (const Eigen::VectorXd& x : model.transition_support(t, xs, path_prefix)) {
      const double p_trans = model.transition_density(t, x, xs, path_prefix);
      if (p_trans == 0.0) continue;
      xs.push_back(x);
      const double pi =
          true_propensity_for(model, t, xs, prefix_of(regime_a, t), regime_a.at(t));
      const double pi_prime =
          true_propensity_for(model, t, xs, prefix_of(regime_b, t), regime_b.at(t));
      const double w = weights.at(t).w.eval(pi) * weights.at(t).w_prime.eval(pi_prime);
      if (w != 0.0) {
        dfs(t + 1, prob * p_trans, weight * w);
      }
      xs.pop_back();
    }
  };
  dfs(0, 1.0, 1.0);
  return total;
}

OracleResult identified_enumeration(const StructuralModel& model, const Regime& regime_a,
                                    const Regime& regime_b, const WeightSpec& weights) {
  const double half_a = g_formula_half(model, regime_a, regime_a, regime_b, weights);
  const double half_b = g_formula_half(model, regime_b, regime_a, regime_b, weights);
  OracleResult result;
  result.value = half_a - half_b;
  result.standard_error = 0.0;
  result.method = "enumeration";
  result.draws = 0;
  return result;
}

double exact_sequential_m(const StructuralModel& model, const Regime& target,
                          const Regime& regime_a, const Regime& regime_b,
                          const WeightSpec& weights, int t,
                          const std::vector<Eigen::VectorXd>& x_hist) {
  const int T = model.horizon();
  if (t == T - 1) {
    return model.outcome_mean(x_hist, target.actions);
  }
  // m_t = sum over x_{t+1} of pmf * m_{t+1} * w_{t+1}(pi) * w'_{t+1}(pi').
  const std::vector<int> prefix = prefix_of(target, t + 1);
  double total = 0.0;
  std::vector<Eigen::VectorXd> xs = x_hist;
  for (const Eigen::VectorXd& x : model.transition_support(t + 1, xs, prefix)) {
    const double p_trans = model.transition_density(t + 1, x, xs, prefix);
    if (p_trans == 0.0) continue;
    xs.push_back(x);
    const double pi = true_propensity_for(model, t + 1, xs, prefix_of(regime_a, t + 1),
                                          regime_a.at(t + 1));
    const double pi_prime = true_propensity_for(model, t + 1, xs,
                                                prefix_of(regime_b, t + 1),
                                                regime_b.at(t + 1));
    const double w =
        weights.at(t + 1).w.eval(pi) * weights.at(t + 1).w_prime.eval(pi_prime);
    if (w != 0.0) {
      total += p_trans * w *
               exact_sequential_m(model, target, regime_a, regime_b, weights, t + 1, xs);
    }
    xs.pop_back();
  }
  return total;
}

SupportSummary support_diagnostic(const StructuralModel& model, int t,
                                  const Regime& regime_a, const Regime& regime_b,
                                  long draws, std::uint64_t seed) {
  if (t < 0 || t >= model.horizon()) throw ConfigError("support_diagnostic: t out of range");
  if (draws < 1) throw ConfigError("support_diagnostic requires draws >= 1");
  const std::vector<int> prefix_a = prefix_of(regime_a, t);
  const std::vector<int> prefix_b = prefix_of(regime_b, t);

  long informative = 0;
  std::vector<double> finite_positive;
  for (long i = 0; i < draws; ++i) {
    const NoiseRecord noise = draw_noise(model, seed, static_cast<std::uint64_t>(i));
    const Trajectory world = simulate_counterfactual_unit(model, noise, regime_a);
    const std::vector<Eigen::VectorXd> xs(world.covariates.begin(),
                                          world.covariates.begin() + t + 1);
    const double rho = true_density_ratio(model, t, xs, prefix_a, prefix_b);
    if (rho > 0.0 && std::isfinite(rho)) {
      ++informative;
      finite_positive.push_back(rho);
    }
  }
  SupportSummary summary;
  summary.share = static_cast<double>(informative) / static_cast<double>(draws);
  summary.quantiles = summarize(finite_positive);
  summary.draws = draws;
  return summary;
}

SupportSummary support_diagnostic_from_values(const std::vector<double>& rho_values,
                                              double ceiling) {
  if (rho_values.empty()) throw ConfigError("support_diagnostic: no rho values");
  long informative = 0;
  for (double r : rho_values) {
    if (r > 0.0 && r < ceiling) ++informative;
  }
  SupportSummary summary;
  summary.share = static_cast<double>(informative) / static_cast<double>(rho_values.size());
  summary.quantiles = summarize(rho_values);
  summary.draws = static_cast<long>(rho_values.size());
  return summary;
}

NuisanceFunctions exact_nuisances(const StructuralModel& model, const Regime& regime_a,
                                  const Regime& regime_b, const WeightSpec& weights) {
  NuisanceFunctions f;
  f.pi = [&model, regime_a](int t, const std::vector<Eigen::VectorXd>& xs) {
    return true_propensity_for(model, t, xs, prefix_of(regime_a, t), regime_a.at(t));
  };
  f.pi_prime = [&model, regime_b](int t, const std::vector<Eigen::VectorXd>& xs) {
    return true_propensity_for(model, t, xs, prefix_of(regime_b, t), regime_b.at(t));
  };
  f.rho = [&model, regime_a, regime_b](int t, const std::vector<Eigen::VectorXd>& xs) {
    return true_density_ratio(model, t, xs, prefix_of(regime_a, t),
                              prefix_of(regime_b, t));
  };
  f.m = [&model, regime_a, regime_b, weights](int t,
                                              const std::vector<Eigen::VectorXd>& xs) {
    return exact_sequential_m(model, regime_a, regime_a, regime_b, weights, t, xs);
  };
  return f;
}

NuisanceFunctions perturb_nuisances(const NuisanceFunctions& base, double eps,
                                    double h_pi, double h_pi_prime, double h_m,
                                    double h_rho) {
  NuisanceFunctions f;
  f.pi = [=](int t, const std::vector<Eigen::VectorXd>& xs) {
    return std::clamp(base.pi(t, xs) + eps * h_pi, 0.001, 0.999);
  };
  f.pi_prime = [=](int t, const std::vector<Eigen::VectorXd>& xs) {
    return std::clamp(base.pi_prime(t, xs) + eps * h_pi_prime, 0.001, 0.999);
  };
  f.rho = [=](int t, const std::vector<Eigen::VectorXd>& xs) {
    if (t == 0) return 1.0;
    return base.rho(t, xs) * (1.0 + eps * h_rho);
  };
  f.m = [=](int t, const std::vector<Eigen::VectorXd>& xs) {
    return base.m(t, xs) + eps * h_m;
  };
  return f;
}

NuisanceValues evaluate_nuisances(const NuisanceFunctions& funcs, const PanelDataset& data) {
  const int n = data.n_units();
  const int T = data.horizon;
  NuisanceValues v;
  v.pi.resize(n, T);
  v.pi_prime.resize(n, T);
  v.rho.resize(n, T);
  v.m.resize(n, T);
  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::VectorXd> xs;
    for (int t = 0; t < T; ++t) {
      xs.push_back(data.units[static_cast<std::size_t>(i)]
                       .covariates[static_cast<std::size_t>(t)]);
      v.pi(i, t) = funcs.pi(t, xs);
      v.pi_prime(i, t) = funcs.pi_prime(t, xs);
      v.rho(i, t) = t == 0 ? 1.0 : funcs.rho(t, xs);
      v.m(i, t) = funcs.m(t, xs);
    }
  }
  return v;
}

double exact_eif_expectation(const StructuralModel& model, const Regime& target,
                             const Regime& other, const WeightSpec& weights,
                             const NuisanceFunctions& funcs, double divisor_floor) {
  if (!model.discrete()) {
    throw NumericError("exact_eif_expectation requires a discrete model");
  }
  const int T = model.horizon();
  double total = 0.0;

  Trajectory unit;
  std::function<void(int, double)> dfs = [&](int t, double prob) {
    if (t == T) {
      // phi is affine in Y: evaluate at Y=0 and Y=1, then plug E[Y | path].
      std::vector<double> pi(static_cast<std::size_t>(T)), pip(static_cast<std::size_t>(T)),
          rho(static_cast<std::size_t>(T)), m(static_cast<std::size_t>(T));
      std::vector<Eigen::VectorXd> xs;
      for (int s = 0; s < T; ++s) {
        xs.push_back(unit.covariates[static_cast<std::size_t>(s)]);
        pi[static_cast<std::size_t>(s)] = funcs.pi(s, xs);
        pip[static_cast<std::size_t>(s)] = funcs.pi_prime(s, xs);
        rho[static_cast<std::size_t>(s)] = s == 0 ? 1.0 : funcs.rho(s, xs);
        m[static_cast<std::size_t>(s)] = funcs.m(s, xs);
      }
      unit.outcome = 0.0;
      const double phi0 =
          eval_eif_values(unit, target, other, pi, pip, rho, m, weights, divisor_floor).phi;
      unit.outcome = 1.0;
      const double phi1 =
          eval_eif_values(unit, target, other, pi, pip, rho, m, weights, divisor_floor).phi;
      const double ey = model.outcome_mean(unit.covariates, unit.treatments);
      total += prob * (phi0 + (phi1 - phi0) * ey);
      return;
    }
    for (const Eigen::VectorXd& x :
         model.transition_support(t, unit.covariates, unit.treatments)) {
      const double p_trans = model.transition_density(t, x, unit.covariates, unit.treatments);
      if (p_trans == 0.0) continue;
      unit.covariates.push_back(x);
      const double p1 = model.treatment_propensity(t, unit.covariates, unit.treatments);
      for (int a = 0; a <= 1; ++a) {
        const double p_a = a == 1 ? p1 : 1.0 - p1;
        if (p_a == 0.0) continue;
        unit.treatments.push_back(a);
        dfs(t + 1, prob * p_trans * p_a);
        unit.treatments.pop_back();
      }
      unit.covariates.pop_back();
    }
  };
  dfs(0, 1.0);
  return total;
}

double exact_plug_in_expectation(const StructuralModel& model, const WeightSpec& weights,
                                 const NuisanceFunctions& funcs) {
  if (!model.discrete()) {
    throw NumericError("exact_plug_in_expectation requires a discrete model");
  }
  double total = 0.0;
  std::vector<Eigen::VectorXd> empty_x;
  std::vector<int> empty_a;
  for (const Eigen::VectorXd& x1 : model.transition_support(0, empty_x, empty_a)) {
    const double p = model.transition_density(0, x1, empty_x, empty_a);
    if (p == 0.0) continue;
    const std::vector<Eigen::VectorXd> xs{x1};
    total += p * funcs.m(0, xs) * weights.at(0).w.eval(funcs.pi(0, xs)) *
             weights.at(0).w_prime.eval(funcs.pi_prime(0, xs));
  }
  return total;
}

}  // namespace crossworld
