#include "crossworld/nuisance.hpp"

#include <cmath>
#include <numeric>

#include "crossworld/rng.hpp"
#include "nlohmann/json.hpp"

namespace crossworld {

namespace {

std::vector<Eigen::MatrixXd> features_by_time(const PanelDataset& data) {
  const int n = data.n_units();
  const int T = data.horizon;
  const int d = data.covariate_dim;
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd F(n, (t + 1) * d);
    for (int i = 0; i < n; ++i) {
      F.row(i) = history_features(data.units[static_cast<std::size_t>(i)], t + 1);
    }
    out[static_cast<std::size_t>(t)] = std::move(F);
  }
  return out;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  return out;
}

// Predicts a full column for all units (constant models short-circuit).
Eigen::VectorXd predict_column(const FittedProbability& f, const Eigen::MatrixXd& features) {
  if (!f.model) return Eigen::VectorXd::Constant(features.rows(), f.constant);
  return f.model->predict(features);
}

std::uint64_t stage_seed(std::uint64_t seed, int fold, int t, int kind) {
  std::uint64_t h = detail::mix(seed, static_cast<std::uint64_t>(fold) + 1);
  h = detail::mix(h, static_cast<std::uint64_t>(t) + 1);
  return detail::mix(h, static_cast<std::uint64_t>(kind));
}

}  // namespace

FoldPlan FoldPlan::make(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-fitting requires at least 2 folds");
  if (n < folds) throw ConfigError("fewer units than folds");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  KeyedRng rng(seed, 0xf01d);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  }
  FoldPlan plan;
  plan.folds = folds;
  plan.fold_of_unit.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    plan.fold_of_unit[static_cast<std::size_t>(order[i])] =
        static_cast<int>(i) % folds;
  }
  return plan;
}

std::vector<int> FoldPlan::train_units(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of_unit.size(); ++i) {
    if (fold_of_unit[i] != fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> FoldPlan::eval_units(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of_unit.size(); ++i) {
    if (fold_of_unit[i] == fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

NuisanceConfig NuisanceConfig::defaults() {
  NuisanceConfig c;
  c.propensity_learner = make_ridge_learner();
  c.ratio_learner = c.propensity_learner;
  c.outcome_learner = c.propensity_learner;
  return c;
}

NuisanceConfig NuisanceConfig::from_json(const nlohmann::json& spec) {
  NuisanceConfig c;
  const LearnerPtr base = make_learner(spec);
  c.propensity_learner =
      spec.contains("propensity") ? make_learner(spec.at("propensity")) : base;
  c.ratio_learner =
      spec.contains("density_ratio") ? make_learner(spec.at("density_ratio")) : base;
  c.outcome_learner = spec.contains("outcome") ? make_learner(spec.at("outcome")) : base;
  c.seed = spec.value("seed", std::uint64_t{0});
  c.rho_max = spec.value("rho_max", c.rho_max);
  c.classifier_floor = spec.value("classifier_floor", c.classifier_floor);
  c.divisor_floor = spec.value("divisor_floor", c.divisor_floor);
  if (!(c.rho_max > 0.0)) throw ConfigError("rho_max must be > 0");
  return c;
}

void NuisanceDiagnostics::merge(const NuisanceDiagnostics& other) {
  empty_subsample_events += other.empty_subsample_events;
  rho_floor_hits += other.rho_floor_hits;
  rho_ceiling_hits += other.rho_ceiling_hits;
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

double PropensityFit::predict(int fold, int t, const Trajectory& unit) const {
  const FittedProbability& f =
      per_fold.at(static_cast<std::size_t>(fold)).at(static_cast<std::size_t>(t));
  if (!f.model) return f.constant;
  return f.model->predict_one(history_features(unit, t + 1));
}

double SequentialFit::predict(int fold, int t, const Trajectory& unit) const {
  const FittedProbability& f =
      per_fold.at(static_cast<std::size_t>(fold)).at(static_cast<std::size_t>(t));
  if (!f.model) return f.constant;
  return f.model->predict_one(history_features(unit, t + 1));
}

PropensityFit fit_propensities(const PanelDataset& data, const Regime& regime,
                               const LearnerPtr& learner, const FoldPlan& folds,
                               std::uint64_t seed) {
  validate_dataset(data);
  if (regime.horizon() != data.horizon) {
    throw ConfigError("regime length does not match dataset horizon");
  }
  const int T = data.horizon;
  const auto features = features_by_time(data);

  PropensityFit fit;
  fit.per_fold.resize(static_cast<std::size_t>(folds.folds));
  for (int f = 0; f < folds.folds; ++f) {
    const std::vector<int> train = folds.train_units(f);
    auto& models = fit.per_fold[static_cast<std::size_t>(f)];
    models.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      std::vector<int> rows;
      for (int i : train) {
        if (prefix_matches(data.units[static_cast<std::size_t>(i)], regime, t)) {
          rows.push_back(i);
        }
      }
      FittedProbability& slot = models[static_cast<std::size_t>(t)];
      if (rows.empty()) {
        // Mirror of the zero convention: an unobservable conditioning event
        // gets propensity zero.
        slot.model = nullptr;
        slot.constant = 0.0;
        ++fit.diagnostics.empty_subsample_events;
        fit.diagnostics.warnings.push_back(
            "empty regime-consistent subsample at t=" + std::to_string(t + 1) +
            ", fold " + std::to_string(f) + "; propensity set to 0");
        continue;
      }
      Eigen::VectorXd labels(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        labels[static_cast<Eigen::Index>(r)] =
            data.units[static_cast<std::size_t>(rows[r])]
                        .treatments[static_cast<std::size_t>(t)] == regime.at(t)
                ? 1.0
                : 0.0;
      }
      slot.model = learner->fit(select_rows(features[static_cast<std::size_t>(t)], rows),
                                labels, LearnerTask::BinaryProbability,
                                stage_seed(seed, f, t, 1));
    }
  }
  return fit;
}

DensityRatioFit fit_density_ratio(const PanelDataset& data, const Regime& regime_a,
                                  const Regime& regime_b, const LearnerPtr& learner,
                                  const FoldPlan& folds, std::uint64_t seed,
                                  double rho_max, double classifier_floor) {
  validate_dataset(data);
  const int T = data.horizon;
  if (regime_a.horizon() != T || regime_b.horizon() != T) {
    throw ConfigError("regime length does not match dataset horizon");
  }
  const auto features = features_by_time(data);

  DensityRatioFit fit;
  fit.rho_max = rho_max;
  fit.classifier_floor = classifier_floor;
  fit.per_fold.resize(static_cast<std::size_t>(folds.folds));
  for (int f = 0; f < folds.folds; ++f) {
    const std::vector<int> train = folds.train_units(f);
    auto& slots = fit.per_fold[static_cast<std::size_t>(f)];
    slots.resize(static_cast<std::size_t>(T));
    for (int t = 1; t < T; ++t) {
      DensityRatioFit::PerTime& slot = slots[static_cast<std::size_t>(t)];
      bool equal = true;
      for (int s = 0; s < t; ++s) equal = equal && regime_a.at(s) == regime_b.at(s);
      slot.prefixes_equal = equal;
      if (equal) continue;

      auto fit_event = [&](const Regime& regime, int feature_time,
                           int kind) -> FittedProbability {
        Eigen::VectorXd labels(static_cast<Eigen::Index>(train.size()));
        for (std::size_t r = 0; r < train.size(); ++r) {
          labels[static_cast<Eigen::Index>(r)] =
              prefix_matches(data.units[static_cast<std::size_t>(train[r])], regime, t)
                  ? 1.0
                  : 0.0;
        }
        FittedProbability out;
        out.model = learner->fit(
            select_rows(features[static_cast<std::size_t>(feature_time)], train), labels,
            LearnerTask::BinaryProbability, stage_seed(seed, f, t, kind));
        return out;
      };
      slot.prefix_a_on_current = fit_event(regime_a, t, 3);
      slot.prefix_b_on_current = fit_event(regime_b, t, 4);
      slot.prefix_a_on_previous = fit_event(regime_a, t - 1, 5);
      slot.prefix_b_on_previous = fit_event(regime_b, t - 1, 6);
    }
  }
  return fit;
}

double DensityRatioFit::predict(int fold, int t, const Trajectory& unit, bool swapped,
                                NuisanceDiagnostics* diag) const {
  if (t == 0) return 1.0;
  const PerTime& slot =
      per_fold.at(static_cast<std::size_t>(fold)).at(static_cast<std::size_t>(t));
  if (slot.prefixes_equal) return 1.0;
  const Eigen::VectorXd current = history_features(unit, t + 1);
  const Eigen::VectorXd previous = history_features(unit, t);
  auto value = [&](const FittedProbability& f, const Eigen::VectorXd& x) {
    return f.model ? f.model->predict_one(x) : f.constant;
  };
  const double a_cur = value(slot.prefix_a_on_current, current);
  const double b_cur = value(slot.prefix_b_on_current, current);
  const double a_prev = value(slot.prefix_a_on_previous, previous);
  const double b_prev = value(slot.prefix_b_on_previous, previous);
  const double num = swapped ? b_cur * a_prev : a_cur * b_prev;
  const double den_1 = swapped ? a_cur : b_cur;
  const double den_2 = swapped ? b_prev : a_prev;
  if (den_1 < classifier_floor || den_2 < classifier_floor) {
    if (diag) ++diag->rho_floor_hits;
    return rho_max;
  }
  const double ratio = num / (den_1 * den_2);
  if (ratio > rho_max) {
    if (diag) ++diag->rho_ceiling_hits;
    return rho_max;
  }
  return std::max(ratio, 0.0);
}

SequentialFit fit_sequential_regressions(
    const PanelDataset& data, const Regime& regime, const PropensityFit& pi,
    const PropensityFit& pi_prime, const WeightSpec& weights, const LearnerPtr& learner,
    const FoldPlan& folds, std::uint64_t seed) {
  validate_dataset(data);
  const int n = data.n_units();
  const int T = data.horizon;
  if (weights.horizon() != T) throw ConfigError("weight spec horizon mismatch");
  const auto features = features_by_time(data);

  SequentialFit fit;
  fit.per_fold.resize(static_cast<std::size_t>(folds.folds));
  for (int f = 0; f < folds.folds; ++f) {
    const std::vector<int> train = folds.train_units(f);
    auto& models = fit.per_fold[static_cast<std::size_t>(f)];
    models.resize(static_cast<std::size_t>(T));

    // Per-fold propensity predictions over all units, for pseudo-outcomes.
    Eigen::MatrixXd pi_vals(n, T), pi_prime_vals(n, T);
    for (int t = 0; t < T; ++t) {
      pi_vals.col(t) = predict_column(
          pi.per_fold.at(static_cast<std::size_t>(f)).at(static_cast<std::size_t>(t)),
          features[static_cast<std::size_t>(t)]);
      pi_prime_vals.col(t) = predict_column(
          pi_prime.per_fold.at(static_cast<std::size_t>(f)).at(static_cast<std::size_t>(t)),
          features[static_cast<std::size_t>(t)]);
    }

    Eigen::VectorXd pseudo(n);
    for (int i = 0; i < n; ++i) pseudo[i] = data.units[static_cast<std::size_t>(i)].outcome;

    for (int t = T - 1; t >= 0; --t) {
      std::vector<int> rows;
      for (int i : train) {
        if (prefix_matches(data.units[static_cast<std::size_t>(i)], regime, t + 1)) {
          rows.push_back(i);
        }
      }
      FittedProbability& slot = models[static_cast<std::size_t>(t)];
      if (rows.empty()) {
        slot.model = nullptr;
        slot.constant = 0.0;
        ++fit.diagnostics.empty_subsample_events;
        fit.diagnostics.warnings.push_back(
            "empty regime-consistent subsample for sequential regression at t=" +
            std::to_string(t + 1) + ", fold " + std::to_string(f));
      } else {
        Eigen::VectorXd labels(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          labels[static_cast<Eigen::Index>(r)] = pseudo[rows[r]];
        }
        slot.model =
            learner->fit(select_rows(features[static_cast<std::size_t>(t)], rows), labels,
                         LearnerTask::Regression, stage_seed(seed, f, t, 7));
      }

      // Pseudo-outcome for the next (earlier) regression, across the full data.
      const Eigen::VectorXd m_vals =
          predict_column(slot, features[static_cast<std::size_t>(t)]);
      const WeightPair& pair = weights.at(t);
      for (int i = 0; i < n; ++i) {
        pseudo[i] = m_vals[i] * pair.w.eval(pi_vals(i, t)) *
                    pair.w_prime.eval(pi_prime_vals(i, t));
        if (!std::isfinite(pseudo[i])) {
          throw NumericError("non-finite pseudo-outcome at t=" + std::to_string(t + 1) +
                             ", unit " + std::to_string(i));
        }
      }
    }
  }
  return fit;
}

NuisanceSet fit_nuisances(const PanelDataset& data, const Regime& regime_a,
                          const Regime& regime_b, const WeightSpec& weights,
                          const NuisanceConfig& config, const FoldPlan& folds) {
  const int n = data.n_units();
  const int T = data.horizon;

  // Both propensity chains and both sequential chains share stage seeds, so
  // fitting with regime_a == regime_b reproduces bit-identical models and the
  // contrast collapses to exactly zero.
  PropensityFit pi_a = fit_propensities(data, regime_a, config.propensity_learner, folds,
                                        detail::mix(config.seed, 11));
  PropensityFit pi_b = fit_propensities(data, regime_b, config.propensity_learner, folds,
                                        detail::mix(config.seed, 11));
  DensityRatioFit rho =
      fit_density_ratio(data, regime_a, regime_b, config.ratio_learner, folds,
                        detail::mix(config.seed, 13), config.rho_max,
                        config.classifier_floor);
  SequentialFit m_a =
      fit_sequential_regressions(data, regime_a, pi_a, pi_b, weights,
                                 config.outcome_learner, folds, detail::mix(config.seed, 14));
  // The second half swaps the weight slots: w'(pi_b) is the target-arm weight.
  std::vector<WeightPair> swapped;
  for (int t = 0; t < T; ++t) {
    swapped.push_back(WeightPair{weights.at(t).w_prime, weights.at(t).w});
  }
  const WeightSpec weights_swapped = WeightSpec::from_pairs(std::move(swapped), true);
  SequentialFit m_b =
      fit_sequential_regressions(data, regime_b, pi_b, pi_a, weights_swapped,
                                 config.outcome_learner, folds, detail::mix(config.seed, 14));

  NuisanceSet set;
  set.folds = folds;
  set.diagnostics.merge(pi_a.diagnostics);
  set.diagnostics.merge(pi_b.diagnostics);
  set.diagnostics.merge(m_a.diagnostics);
  set.diagnostics.merge(m_b.diagnostics);
  for (int f = 0; f < folds.folds; ++f) {
    set.train_units_of_fold.push_back(folds.train_units(f));
  }

  const auto features = features_by_time(data);
  auto assemble = [&](const PropensityFit& target_pi, const PropensityFit& other_pi,
                      const SequentialFit& m_fit, bool swapped_ratio) {
    NuisanceValues v;
    v.pi.resize(n, T);
    v.pi_prime.resize(n, T);
    v.rho.resize(n, T);
    v.m.resize(n, T);
    // Each unit's row comes from its own fold's models, which never saw it.
    for (int f = 0; f < folds.folds; ++f) {
      const std::vector<int> eval = folds.eval_units(f);
      for (int t = 0; t < T; ++t) {
        const Eigen::MatrixXd sub = select_rows(features[static_cast<std::size_t>(t)], eval);
        const auto& fold_slots_pi =
            target_pi.per_fold.at(static_cast<std::size_t>(f)).at(static_cast<std::size_t>(t));
        const auto& fold_slots_pip =
            other_pi.per_fold.at(static_cast<std::size_t>(f)).at(static_cast<std::size_t>(t));
        const auto& fold_slots_m =
            m_fit.per_fold.at(static_cast<std::size_t>(f)).at(static_cast<std::size_t>(t));
        const Eigen::VectorXd pi_col = predict_column(fold_slots_pi, sub);
        const Eigen::VectorXd pip_col = predict_column(fold_slots_pip, sub);
        const Eigen::VectorXd m_col = predict_column(fold_slots_m, sub);

        Eigen::VectorXd rho_col;
        const auto& slot =
            rho.per_fold.at(static_cast<std::size_t>(f)).at(static_cast<std::size_t>(t));
        if (t == 0 || slot.prefixes_equal) {
          rho_col = Eigen::VectorXd::Ones(sub.rows());
        } else {
          const Eigen::MatrixXd prev =
              select_rows(features[static_cast<std::size_t>(t - 1)], eval);
          const Eigen::VectorXd a_cur = predict_column(slot.prefix_a_on_current, sub);
          const Eigen::VectorXd b_cur = predict_column(slot.prefix_b_on_current, sub);
          const Eigen::VectorXd a_prev = predict_column(slot.prefix_a_on_previous, prev);
          const Eigen::VectorXd b_prev = predict_column(slot.prefix_b_on_previous, prev);
          rho_col.resize(sub.rows());
          for (Eigen::Index r = 0; r < sub.rows(); ++r) {
            const double num = swapped_ratio ? b_cur[r] * a_prev[r] : a_cur[r] * b_prev[r];
            const double den_1 = swapped_ratio ? a_cur[r] : b_cur[r];
            const double den_2 = swapped_ratio ? b_prev[r] : a_prev[r];
            if (den_1 < config.classifier_floor || den_2 < config.classifier_floor) {
              ++set.diagnostics.rho_floor_hits;
              rho_col[r] = config.rho_max;
            } else {
              const double ratio = num / (den_1 * den_2);
              if (ratio > config.rho_max) {
                ++set.diagnostics.rho_ceiling_hits;
                rho_col[r] = config.rho_max;
              } else {
                rho_col[r] = std::max(ratio, 0.0);
              }
            }
          }
        }
        for (std::size_t r = 0; r < eval.size(); ++r) {
          const int i = eval[r];
          v.pi(i, t) = pi_col[static_cast<Eigen::Index>(r)];
          v.pi_prime(i, t) = pip_col[static_cast<Eigen::Index>(r)];
          v.m(i, t) = m_col[static_cast<Eigen::Index>(r)];
          v.rho(i, t) = rho_col[static_cast<Eigen::Index>(r)];
        }
      }
    }
    return v;
  };

  set.half_a = assemble(pi_a, pi_b, m_a, false);
  set.half_b = assemble(pi_b, pi_a, m_b, true);
  return set;
}

}  // namespace crossworld
