#include "crossworld/estimator.hpp"

#include <cmath>

#include "crossworld/rng.hpp"

namespace crossworld {

namespace {

void require_smooth(const WeightSpec& weights) {
  if (!weights.all_smooth()) {
    throw NumericError(
        "influence-function estimation requires smooth weights; hard trimming is "
        "only supported by the plug-in path");
  }
}

std::vector<double> row_of(const Eigen::MatrixXd& M, int i) {
  std::vector<double> out(static_cast<std::size_t>(M.cols()));
  for (Eigen::Index t = 0; t < M.cols(); ++t) out[static_cast<std::size_t>(t)] = M(i, t);
  return out;
}

EstimateReport finalize(std::vector<double> phi, double alpha, const std::string& method,
                        ReportDiagnostics diagnostics) {
  EstimateReport report;
  report.method = method;
  report.alpha = alpha;
  report.n_eval = static_cast<int>(phi.size());
  report.psi_hat = mean(phi);
  report.sigma2_hat = population_variance(phi);
  if (report.sigma2_hat == 0.0) {
    diagnostics.warnings.push_back("degenerate variance estimate: CI has width 0");
  }
  const double z = normal_quantile_two_sided(alpha);
  const double half_width =
      z * std::sqrt(report.sigma2_hat / static_cast<double>(report.n_eval));
  report.ci_lo = report.psi_hat - half_width;
  report.ci_hi = report.psi_hat + half_width;
  report.diagnostics = std::move(diagnostics);
  return report;
}

}  // namespace

WeightSpec swap_weight_slots(const WeightSpec& weights) {
  std::vector<WeightPair> swapped;
  for (int t = 0; t < weights.horizon(); ++t) {
    swapped.push_back(WeightPair{weights.at(t).w_prime, weights.at(t).w});
  }
  return WeightSpec::from_pairs(std::move(swapped), true);
}

EifTerms eval_eif_values(const Trajectory& unit, const Regime& target,
                         const Regime& other, const std::vector<double>& pi,
                         const std::vector<double>& pi_prime,
                         const std::vector<double>& rho, const std::vector<double>& m,
                         const WeightSpec& weights, double divisor_floor) {
  require_smooth(weights);
  const int T = unit.horizon();
  if (static_cast<int>(pi.size()) != T || static_cast<int>(pi_prime.size()) != T ||
      static_cast<int>(rho.size()) != T || static_cast<int>(m.size()) != T ||
      weights.horizon() != T || target.horizon() != T || other.horizon() != T) {
    throw NumericError("eval_eif: per-time nuisance values do not match the horizon");
  }

  EifTerms out;
  out.m = m;
  out.rho = rho;
  out.rho[0] = 1.0;
  out.r.resize(static_cast<std::size_t>(T));
  out.r_prime.resize(static_cast<std::size_t>(T));
  out.w.resize(static_cast<std::size_t>(T));
  out.w_prime.resize(static_cast<std::size_t>(T));
  out.phi_t.resize(static_cast<std::size_t>(T));
  out.phi_t_prime.resize(static_cast<std::size_t>(T));

  for (int t = 0; t < T; ++t) {
    const WeightPair& pair = weights.at(t);
    const double p = pi[static_cast<std::size_t>(t)];
    const double pp = pi_prime[static_cast<std::size_t>(t)];
    out.w[static_cast<std::size_t>(t)] = pair.w.eval(p);
    out.w_prime[static_cast<std::size_t>(t)] = pair.w_prime.eval(pp);
    const RatioTerms rt =
        ratio_terms(unit.treatments[static_cast<std::size_t>(t)], target.at(t),
                    other.at(t), p, pp, pair.w, pair.w_prime, divisor_floor);
    out.r[static_cast<std::size_t>(t)] = rt.r;
    out.r_prime[static_cast<std::size_t>(t)] = rt.r_prime;
    const double ind_target =
        unit.treatments[static_cast<std::size_t>(t)] == target.at(t) ? 1.0 : 0.0;
    const double ind_other =
        unit.treatments[static_cast<std::size_t>(t)] == other.at(t) ? 1.0 : 0.0;
    out.phi_t[static_cast<std::size_t>(t)] = pair.w.deriv(p) * (ind_target - p);
    out.phi_t_prime[static_cast<std::size_t>(t)] = pair.w_prime.deriv(pp) * (ind_other - pp);
  }

  // phi_m
  double phi_m = out.m[0] * out.w[0] * out.w_prime[0];
  double r_running = 1.0;
  for (int t = 0; t < T; ++t) {
    r_running *= out.r[static_cast<std::size_t>(t)];
    const double next =
        t + 1 < T ? out.m[static_cast<std::size_t>(t + 1)] *
                        out.w[static_cast<std::size_t>(t + 1)] *
                        out.w_prime[static_cast<std::size_t>(t + 1)]
                  : unit.outcome;
    phi_m += r_running * (next - out.m[static_cast<std::size_t>(t)]);
  }

  // phi_w
  double phi_w = 0.0;
  double r_prefix = 1.0;        // prod_{s<t} r_s
  double r_prime_prefix = 1.0;  // prod_{s<t} r'_s rho_s
  for (int t = 0; t < T; ++t) {
    phi_w += r_prefix * out.m[static_cast<std::size_t>(t)] *
             out.phi_t[static_cast<std::size_t>(t)] * out.w_prime[static_cast<std::size_t>(t)];
    phi_w += r_prime_prefix * out.m[static_cast<std::size_t>(t)] *
             out.w[static_cast<std::size_t>(t)] * out.rho[static_cast<std::size_t>(t)] *
             out.phi_t_prime[static_cast<std::size_t>(t)];
    r_prefix *= out.r[static_cast<std::size_t>(t)];
    r_prime_prefix *=
        out.r_prime[static_cast<std::size_t>(t)] * out.rho[static_cast<std::size_t>(t)];
  }

  out.phi_m = phi_m;
  out.phi_w = phi_w;
  out.phi = phi_m + phi_w;
  if (!std::isfinite(out.phi)) {
    throw NumericError("non-finite influence value for a unit");
  }
  return out;
}

EifTerms eval_eif(const PanelDataset& data, int unit_index, const Regime& regime_a,
                  const Regime& regime_b, const NuisanceSet& nuisances,
                  const WeightSpec& weights, double divisor_floor) {
  const NuisanceValues& v = nuisances.half_a;
  return eval_eif_values(data.units.at(static_cast<std::size_t>(unit_index)), regime_a,
                         regime_b, row_of(v.pi, unit_index),
                         row_of(v.pi_prime, unit_index), row_of(v.rho, unit_index),
                         row_of(v.m, unit_index), weights, divisor_floor);
}

std::vector<double> eif_column(const PanelDataset& data, const Regime& target,
                               const Regime& other, const NuisanceValues& values,
                               const WeightSpec& weights, double divisor_floor) {
  const int n = data.n_units();
  std::vector<double> phi(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    phi[static_cast<std::size_t>(i)] =
        eval_eif_values(data.units[static_cast<std::size_t>(i)], target, other,
                        row_of(values.pi, i), row_of(values.pi_prime, i),
                        row_of(values.rho, i), row_of(values.m, i), weights,
                        divisor_floor)
            .phi;
  }
  return phi;
}

ReportDiagnostics compute_diagnostics(const PanelDataset& data,
                                      const NuisanceValues& values,
                                      const WeightSpec& weights,
                                      const NuisanceDiagnostics& fit_diagnostics) {
  const int n = data.n_units();
  const int T = data.horizon;
  ReportDiagnostics diag;
  diag.rho_floor_hits = fit_diagnostics.rho_floor_hits;
  diag.rho_ceiling_hits = fit_diagnostics.rho_ceiling_hits;
  diag.empty_subsample_events = fit_diagnostics.empty_subsample_events;
  diag.warnings = fit_diagnostics.warnings;

  std::vector<double> cumulative(static_cast<std::size_t>(n), 1.0);
  for (int t = 0; t < T; ++t) {
    const WeightPair& pair = weights.at(t);
    for (int i = 0; i < n; ++i) {
      cumulative[static_cast<std::size_t>(i)] *=
          pair.w.eval(values.pi(i, t)) * pair.w_prime.eval(values.pi_prime(i, t));
    }
    bool any_positive = false;
    for (double c : cumulative) any_positive = any_positive || c > 0.0;
    diag.ess_per_time.push_back(any_positive ? effective_sample_size(cumulative)
                                             : 0.0);
  }
  diag.weight_product = summarize(cumulative);
  for (int t = 1; t < T; ++t) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = values.rho(i, t);
    diag.rho_by_time.push_back(summarize(col));
  }
  return diag;
}

namespace {

struct FittedContext {
  NuisanceSet nuisances;
  FoldPlan folds;
};

FittedContext fit_context(const PanelDataset& data, const Regime& regime_a,
                          const Regime& regime_b, const WeightSpec& weights,
                          const EstimateOptions& options) {
  validate_dataset(data);
  const int n = data.n_units();
  if (options.folds < 2) throw ConfigError("estimation requires K >= 2 folds");
  if (n < 2 * options.folds) {
    throw ConfigError("n=" + std::to_string(n) + " is too small for K=" +
                      std::to_string(options.folds) + " folds (need n >= 2K)");
  }
  if (regime_a.horizon() != data.horizon || regime_b.horizon() != data.horizon) {
    throw ConfigError("regime length does not match dataset horizon");
  }
  if (weights.horizon() != data.horizon) {
    throw ConfigError("weight spec horizon does not match dataset horizon");
  }
  FittedContext ctx;
  ctx.folds = FoldPlan::make(n, options.folds, detail::mix(options.nuisance.seed, 0xf01d5));
  ctx.nuisances =
      fit_nuisances(data, regime_a, regime_b, weights, options.nuisance, ctx.folds);
  return ctx;
}

}  // namespace

EstimateReport dr_estimate(const PanelDataset& data, const Regime& regime_a,
                           const Regime& regime_b, const WeightSpec& weights,
                           const EstimateOptions& options) {
  require_smooth(weights);
  FittedContext ctx = fit_context(data, regime_a, regime_b, weights, options);
  std::vector<double> phi =
      eif_column(data, regime_a, regime_b, ctx.nuisances.half_a, weights,
                 options.nuisance.divisor_floor);
  ReportDiagnostics diag = compute_diagnostics(data, ctx.nuisances.half_a, weights,
                                               ctx.nuisances.diagnostics);
  return finalize(std::move(phi), options.alpha, "dr", std::move(diag));
}

EstimateReport dr_contrast(const PanelDataset& data, const Regime& regime_a,
                           const Regime& regime_b, const WeightSpec& weights,
                           const EstimateOptions& options) {
  require_smooth(weights);
  FittedContext ctx = fit_context(data, regime_a, regime_b, weights, options);
  const std::vector<double> phi_a =
      eif_column(data, regime_a, regime_b, ctx.nuisances.half_a, weights,
                 options.nuisance.divisor_floor);
  const WeightSpec weights_b = swap_weight_slots(weights);
  const std::vector<double> phi_b =
      eif_column(data, regime_b, regime_a, ctx.nuisances.half_b, weights_b,
                 options.nuisance.divisor_floor);
  std::vector<double> diff(phi_a.size());
  for (std::size_t i = 0; i < phi_a.size(); ++i) diff[i] = phi_a[i] - phi_b[i];
  ReportDiagnostics diag = compute_diagnostics(data, ctx.nuisances.half_a, weights,
                                               ctx.nuisances.diagnostics);
  return finalize(std::move(diff), options.alpha, "dr_contrast", std::move(diag));
}

EstimateReport plug_in_estimate(const PanelDataset& data, const Regime& regime_a,
                                const Regime& regime_b, const WeightSpec& weights,
                                const EstimateOptions& options) {
  FittedContext ctx = fit_context(data, regime_a, regime_b, weights, options);
  const int n = data.n_units();
  const NuisanceValues& a = ctx.nuisances.half_a;
  const NuisanceValues& b = ctx.nuisances.half_b;
  const WeightPair& pair = weights.at(0);
  std::vector<double> plug(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double half_a = a.m(i, 0) * pair.w.eval(a.pi(i, 0)) *
                          pair.w_prime.eval(a.pi_prime(i, 0));
    // Same weight product seen from the swapped side.
    const double half_b = b.m(i, 0) * pair.w.eval(b.pi_prime(i, 0)) *
                          pair.w_prime.eval(b.pi(i, 0));
    plug[static_cast<std::size_t>(i)] = half_a - half_b;
  }
  ReportDiagnostics diag = compute_diagnostics(data, ctx.nuisances.half_a, weights,
                                               ctx.nuisances.diagnostics);
  EstimateReport report;
  report.method = "plugin";
  report.alpha = options.alpha;
  report.n_eval = n;
  report.psi_hat = mean(plug);
  report.sigma2_hat = 0.0;
  report.ci_lo = report.psi_hat;
  report.ci_hi = report.psi_hat;
  report.valid_inference = false;
  diag.warnings.push_back("plug-in estimate: no valid inference");
  report.diagnostics = std::move(diag);
  return report;
}

}  // namespace crossworld
