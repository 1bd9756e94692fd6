#include <cmath>
#include <functional>
#include <map>

#include "crossworld/common.hpp"
#include "crossworld/dgp.hpp"
#include "nlohmann/json.hpp"

// Built-in structural models. All expose exact transition laws and
// closed-form outcome means so the brute-force oracles can evaluate them;
// continuous mechanisms are restricted to uniforms, Gaussian location
// shifts, and deterministic maps.

namespace crossworld {

namespace {

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x[0] = v;
  return x;
}

double bern(const Eigen::VectorXd& u, double p) { return u[0] < p ? 1.0 : 0.0; }

double unif01_density(double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; }

// Strictly inside (0,1) so the Gaussian quantile stays finite.
double gaussian_from_uniform(double u) {
  const double safe = u * (1.0 - 0x1.0p-52) + 0x1.0p-53;
  return inverse_normal_cdf(safe);
}

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

std::vector<Eigen::VectorXd> binary_support() { return {scalar(0.0), scalar(1.0)}; }

double centered(double u) { return u - 0.5; }

// X_1 uniform or Bernoulli(0.5), A_1 ~ Bern(0.5), X_2 = A_1 exactly,
// A_2 ~ Bern(0.5). The time-2 covariate laws under the two arms are point
// masses at different values, so their supports are disjoint.
class PointMassCarryover final : public StructuralModel {
 public:
  explicit PointMassCarryover(bool discrete_baseline)
      : discrete_baseline_(discrete_baseline) {}

  std::string name() const override {
    return discrete_baseline_ ? "example1_discrete" : "example1";
  }
  std::string description() const override {
    return std::string("disjoint time-2 covariate support: X2 = A1 exactly") +
           (discrete_baseline_ ? " (binary X1)" : " (uniform X1)");
  }
  int horizon() const override { return 2; }
  int covariate_dim() const override { return 1; }

  Eigen::VectorXd covariate_mechanism(int t, const std::vector<Eigen::VectorXd>&,
                                      const std::vector<int>& a_hist,
                                      const Eigen::VectorXd& u) const override {
    if (t == 0) return discrete_baseline_ ? scalar(bern(u, 0.5)) : scalar(u[0]);
    return scalar(static_cast<double>(a_hist[0]));
  }

  double treatment_propensity(int, const std::vector<Eigen::VectorXd>&,
                              const std::vector<int>&) const override {
    return 0.5;
  }

  double outcome_mechanism(const std::vector<Eigen::VectorXd>& x,
                           const std::vector<int>& a, double u_y) const override {
    return outcome_mean(x, a) + 0.5 * centered(u_y);
  }

  bool has_densities() const override { return true; }
  double transition_density(int t, const Eigen::VectorXd& x_t,
                            const std::vector<Eigen::VectorXd>&,
                            const std::vector<int>& a_hist) const override {
    if (t == 0) {
      if (discrete_baseline_) return (x_t[0] == 0.0 || x_t[0] == 1.0) ? 0.5 : 0.0;
      return unif01_density(x_t[0]);
    }
    return x_t[0] == static_cast<double>(a_hist[0]) ? 1.0 : 0.0;
  }

  bool discrete() const override { return discrete_baseline_; }
  std::vector<Eigen::VectorXd> transition_support(
      int t, const std::vector<Eigen::VectorXd>&,
      const std::vector<int>& a_hist) const override {
    if (t == 0) return binary_support();
    return {scalar(static_cast<double>(a_hist[0]))};
  }

  bool has_outcome_mean() const override { return true; }
  double outcome_mean(const std::vector<Eigen::VectorXd>& x,
                      const std::vector<int>& a) const override {
    return a[0] + a[1] + 0.5 * x[1][0];
  }

 private:
  bool discrete_baseline_;
};

// Deterministic treatment assignment with fully overlapping covariates:
// X_2 is Unif(0,1) regardless of treatment, so the covariate density ratio
// is identically one, while the propensities are exact indicators.
class DeterministicAssignment final : public StructuralModel {
 public:
  std::string name() const override { return "example2"; }
  std::string description() const override {
    return "full covariate overlap with hard positivity violations "
           "(indicator propensities)";
  }
  int horizon() const override { return 2; }
  int covariate_dim() const override { return 1; }

  Eigen::VectorXd covariate_mechanism(int, const std::vector<Eigen::VectorXd>&,
                                      const std::vector<int>&,
                                      const Eigen::VectorXd& u) const override {
    return scalar(u[0]);
  }

  double treatment_propensity(int t, const std::vector<Eigen::VectorXd>& x,
                              const std::vector<int>& a) const override {
    if (t == 0) return x[0][0] > 0.2 ? 1.0 : 0.0;
    return x[0][0] * x[1][0] - a[0] > 0.2 ? 1.0 : 0.0;
  }

  double outcome_mechanism(const std::vector<Eigen::VectorXd>& x,
                           const std::vector<int>& a, double u_y) const override {
    return outcome_mean(x, a) + 0.2 * centered(u_y);
  }

  bool has_densities() const override { return true; }
  double transition_density(int, const Eigen::VectorXd& x_t,
                            const std::vector<Eigen::VectorXd>&,
                            const std::vector<int>&) const override {
    return unif01_density(x_t[0]);
  }

  bool has_outcome_mean() const override { return true; }
  double outcome_mean(const std::vector<Eigen::VectorXd>& x,
                      const std::vector<int>& a) const override {
    return x[0][0] + x[1][0] + 0.5 * (a[0] + a[1]);
  }
};

// Binary panel where the outcome ignores treatments and covariate
// transitions do not depend on treatment; propensities still vary with
// history, so weighting machinery is exercised on a true null.
class NullEffect final : public StructuralModel {
 public:
  std::string name() const override { return "null_effect"; }
  std::string description() const override {
    return "binary T=2 null: outcome and covariates ignore treatments";
  }
  int horizon() const override { return 2; }
  int covariate_dim() const override { return 1; }

  Eigen::VectorXd covariate_mechanism(int t, const std::vector<Eigen::VectorXd>& x,
                                      const std::vector<int>&,
                                      const Eigen::VectorXd& u) const override {
    if (t == 0) return scalar(bern(u, 0.5));
    return scalar(bern(u, 0.4 + 0.3 * x[0][0]));
  }

  double treatment_propensity(int t, const std::vector<Eigen::VectorXd>& x,
                              const std::vector<int>& a) const override {
    if (t == 0) return 0.3 + 0.4 * x[0][0];
    return 0.25 + 0.3 * x[1][0] + 0.15 * a[0] + 0.1 * x[0][0];
  }

  double outcome_mechanism(const std::vector<Eigen::VectorXd>& x,
                           const std::vector<int>& a, double u_y) const override {
    return outcome_mean(x, a) + 0.6 * centered(u_y);
  }

  bool has_densities() const override { return true; }
  double transition_density(int t, const Eigen::VectorXd& x_t,
                            const std::vector<Eigen::VectorXd>& x,
                            const std::vector<int>&) const override {
    if (x_t[0] != 0.0 && x_t[0] != 1.0) return 0.0;
    const double p = t == 0 ? 0.5 : 0.4 + 0.3 * x[0][0];
    return x_t[0] == 1.0 ? p : 1.0 - p;
  }

  bool discrete() const override { return true; }
  std::vector<Eigen::VectorXd> transition_support(int, const std::vector<Eigen::VectorXd>&,
                                                  const std::vector<int>&) const override {
    return binary_support();
  }

  bool has_outcome_mean() const override { return true; }
  double outcome_mean(const std::vector<Eigen::VectorXd>& x,
                      const std::vector<int>&) const override {
    return 1.0 + x[0][0] + 0.5 * x[1][0];
  }
};

// Continuous T=2 model with a Gaussian location-shift transition: covariate
// laws under the two arms overlap everywhere but differ, so density ratios
// are non-trivial. Propensities stay in (0.2, 0.9). Known positive effect.
class ModerateOverlap final : public StructuralModel {
 public:
  ModerateOverlap(double shift, double sigma) : shift_(shift), sigma_(sigma) {
    if (!(sigma > 0.0)) throw ConfigError("moderate_overlap: sigma must be > 0");
  }

  std::string name() const override { return "moderate_overlap"; }
  std::string description() const override {
    return "continuous T=2, Gaussian covariate shift (sigma=" + std::to_string(sigma_) +
           ", shift=" + std::to_string(shift_) + "), nonzero effect";
  }
  int horizon() const override { return 2; }
  int covariate_dim() const override { return 1; }

  Eigen::VectorXd covariate_mechanism(int t, const std::vector<Eigen::VectorXd>& x,
                                      const std::vector<int>& a,
                                      const Eigen::VectorXd& u) const override {
    if (t == 0) return scalar(u[0]);
    return scalar(x[0][0] + shift_ * a[0] + sigma_ * gaussian_from_uniform(u[0]));
  }

  double treatment_propensity(int t, const std::vector<Eigen::VectorXd>& x,
                              const std::vector<int>& a) const override {
    if (t == 0) return 0.2 + 0.6 * x[0][0];
    return 0.2 + 0.5 * x[0][0] + 0.1 * a[0];
  }

  double outcome_mechanism(const std::vector<Eigen::VectorXd>& x,
                           const std::vector<int>& a, double u_y) const override {
    return outcome_mean(x, a) + 0.5 * gaussian_from_uniform(u_y);
  }

  bool has_densities() const override { return true; }
  double transition_density(int t, const Eigen::VectorXd& x_t,
                            const std::vector<Eigen::VectorXd>& x,
                            const std::vector<int>& a) const override {
    if (t == 0) return unif01_density(x_t[0]);
    return normal_pdf(x_t[0], x[0][0] + shift_ * a[0], sigma_);
  }

  bool has_outcome_mean() const override { return true; }
  double outcome_mean(const std::vector<Eigen::VectorXd>& x,
                      const std::vector<int>& a) const override {
    return a[0] + a[1] + 0.8 * x[1][0] + 0.5 * x[0][0];
  }

 private:
  double shift_;
  double sigma_;
};

// Fully binary T=2 model with treatment-dependent covariate transitions.
// Transition probabilities stay inside (0,1) on both arms (full common
// support, non-trivial density ratio) and the effect is monotone: the shared
// noise couples X2(1) >= X2(0), so Y(1,1) - Y(0,0) >= 1.5 almost surely.
// The disjoint variant replaces the X2 law with the point mass X2 = A1.
class BinaryConfounded final : public StructuralModel {
 public:
  explicit BinaryConfounded(bool x2_disjoint) : x2_disjoint_(x2_disjoint) {}

  std::string name() const override {
    return x2_disjoint_ ? "binary_confounded_disjoint" : "binary_confounded";
  }
  std::string description() const override {
    return x2_disjoint_
               ? "binary T=2 with the time-2 transition collapsed to X2 = A1"
               : "binary T=2, treatment-dependent transitions with full common "
                 "support, monotone effect";
  }
  int horizon() const override { return 2; }
  int covariate_dim() const override { return 1; }

  double x2_prob(int a1, double x1) const {
    if (x2_disjoint_) return static_cast<double>(a1);
    return 0.2 + 0.5 * a1 + 0.2 * x1;
  }

  Eigen::VectorXd covariate_mechanism(int t, const std::vector<Eigen::VectorXd>& x,
                                      const std::vector<int>& a,
                                      const Eigen::VectorXd& u) const override {
    if (t == 0) return scalar(bern(u, 0.5));
    return scalar(bern(u, x2_prob(a[0], x[0][0])));
  }

  double treatment_propensity(int t, const std::vector<Eigen::VectorXd>& x,
                              const std::vector<int>& a) const override {
    if (t == 0) return 0.3 + 0.4 * x[0][0];
    return 0.3 + 0.2 * a[0] + 0.2 * x[0][0];
  }

  double outcome_mechanism(const std::vector<Eigen::VectorXd>& x,
                           const std::vector<int>& a, double u_y) const override {
    return outcome_mean(x, a) + 0.5 * centered(u_y);
  }

  bool has_densities() const override { return true; }
  double transition_density(int t, const Eigen::VectorXd& x_t,
                            const std::vector<Eigen::VectorXd>& x,
                            const std::vector<int>& a) const override {
    if (x_t[0] != 0.0 && x_t[0] != 1.0) return 0.0;
    const double p = t == 0 ? 0.5 : x2_prob(a[0], x[0][0]);
    return x_t[0] == 1.0 ? p : 1.0 - p;
  }

  bool discrete() const override { return true; }
  std::vector<Eigen::VectorXd> transition_support(
      int t, const std::vector<Eigen::VectorXd>& x,
      const std::vector<int>& a) const override {
    if (t == 1 && x2_disjoint_) return {scalar(static_cast<double>(a[0]))};
    (void)x;
    return binary_support();
  }

  bool has_outcome_mean() const override { return true; }
  double outcome_mean(const std::vector<Eigen::VectorXd>& x,
                      const std::vector<int>& a) const override {
    return 0.5 * a[0] + a[1] + 0.5 * x[1][0] + 0.25 * x[0][0];
  }

 private:
  bool x2_disjoint_;
};

// Binary T=3 chain: covariates evolve independently of treatment while the
// propensities depend on current covariates and past treatment, exercising
// the depth-3 recursion of the sequential machinery.
class BinaryDepth3 final : public StructuralModel {
 public:
  std::string name() const override { return "binary_depth3"; }
  std::string description() const override {
    return "binary T=3 chain, exogenous covariates, history-dependent propensities";
  }
  int horizon() const override { return 3; }
  int covariate_dim() const override { return 1; }

  double x_prob(int t, const std::vector<Eigen::VectorXd>& x) const {
    if (t == 0) return 0.5;
    return 0.3 + 0.4 * x[static_cast<std::size_t>(t - 1)][0];
  }

  Eigen::VectorXd covariate_mechanism(int t, const std::vector<Eigen::VectorXd>& x,
                                      const std::vector<int>&,
                                      const Eigen::VectorXd& u) const override {
    return scalar(bern(u, x_prob(t, x)));
  }

  double treatment_propensity(int t, const std::vector<Eigen::VectorXd>& x,
                              const std::vector<int>& a) const override {
    if (t == 0) return 0.25 + 0.5 * x[0][0];
    if (t == 1) return 0.2 + 0.3 * x[1][0] + 0.2 * a[0];
    return 0.15 + 0.25 * x[2][0] + 0.15 * a[1] + 0.1 * x[0][0];
  }

  double outcome_mechanism(const std::vector<Eigen::VectorXd>& x,
                           const std::vector<int>& a, double u_y) const override {
    return outcome_mean(x, a) + 0.6 * centered(u_y);
  }

  bool has_densities() const override { return true; }
  double transition_density(int t, const Eigen::VectorXd& x_t,
                            const std::vector<Eigen::VectorXd>& x,
                            const std::vector<int>&) const override {
    if (x_t[0] != 0.0 && x_t[0] != 1.0) return 0.0;
    const double p = x_prob(t, x);
    return x_t[0] == 1.0 ? p : 1.0 - p;
  }

  bool discrete() const override { return true; }
  std::vector<Eigen::VectorXd> transition_support(int, const std::vector<Eigen::VectorXd>&,
                                                  const std::vector<int>&) const override {
    return binary_support();
  }

  bool has_outcome_mean() const override { return true; }
  double outcome_mean(const std::vector<Eigen::VectorXd>& x,
                      const std::vector<int>& a) const override {
    return 0.4 * (a[0] + a[1] + a[2]) + 0.3 * (x[0][0] + x[1][0] + x[2][0]);
  }
};

// Half of the time-2 covariate mass overlaps across arms by construction:
// X2 | A1=1 is uniform on {0,1}, X2 | A1=0 uniform on {1,2}.
class HalfOverlap final : public StructuralModel {
 public:
  std::string name() const override { return "half_overlap"; }
  std::string description() const override {
    return "ternary X2 with exactly half the arm-1 mass overlapping arm 0";
  }
  int horizon() const override { return 2; }
  int covariate_dim() const override { return 1; }

  Eigen::VectorXd covariate_mechanism(int t, const std::vector<Eigen::VectorXd>&,
                                      const std::vector<int>& a,
                                      const Eigen::VectorXd& u) const override {
    if (t == 0) return scalar(bern(u, 0.5));
    const double lo = a[0] == 1 ? 0.0 : 1.0;
    return scalar(u[0] < 0.5 ? lo : lo + 1.0);
  }

  double treatment_propensity(int t, const std::vector<Eigen::VectorXd>& x,
                              const std::vector<int>&) const override {
    if (t == 0) return 0.5;
    return 0.4 + 0.2 * (x[1][0] == 1.0 ? 1.0 : 0.0);
  }

  double outcome_mechanism(const std::vector<Eigen::VectorXd>& x,
                           const std::vector<int>& a, double u_y) const override {
    return outcome_mean(x, a) + 0.6 * centered(u_y);
  }

  bool has_densities() const override { return true; }
  double transition_density(int t, const Eigen::VectorXd& x_t,
                            const std::vector<Eigen::VectorXd>&,
                            const std::vector<int>& a) const override {
    if (t == 0) return (x_t[0] == 0.0 || x_t[0] == 1.0) ? 0.5 : 0.0;
    const double lo = a[0] == 1 ? 0.0 : 1.0;
    return (x_t[0] == lo || x_t[0] == lo + 1.0) ? 0.5 : 0.0;
  }

  bool discrete() const override { return true; }
  std::vector<Eigen::VectorXd> transition_support(
      int t, const std::vector<Eigen::VectorXd>&,
      const std::vector<int>& a) const override {
    if (t == 0) return binary_support();
    const double lo = a[0] == 1 ? 0.0 : 1.0;
    return {scalar(lo), scalar(lo + 1.0)};
  }

  bool has_outcome_mean() const override { return true; }
  double outcome_mean(const std::vector<Eigen::VectorXd>& x,
                      const std::vector<int>& a) const override {
    return a[0] + a[1] + 0.5 * x[1][0];
  }
};

using Factory = std::function<ModelPtr(const nlohmann::json&)>;

const std::map<std::string, std::pair<Factory, std::string>>& registry() {
  static const std::map<std::string, std::pair<Factory, std::string>> reg = {
      {"example1",
       {[](const nlohmann::json&) { return std::make_shared<PointMassCarryover>(false); },
        PointMassCarryover(false).description()}},
      {"example1_discrete",
       {[](const nlohmann::json&) { return std::make_shared<PointMassCarryover>(true); },
        PointMassCarryover(true).description()}},
      {"example2",
       {[](const nlohmann::json&) { return std::make_shared<DeterministicAssignment>(); },
        DeterministicAssignment().description()}},
      {"null_effect",
       {[](const nlohmann::json&) { return std::make_shared<NullEffect>(); },
        NullEffect().description()}},
      {"moderate_overlap",
       {[](const nlohmann::json& p) {
          const double shift = p.value("shift", 0.8);
          const double sigma = p.value("sigma", 0.5);
          return std::make_shared<ModerateOverlap>(shift, sigma);
        },
        ModerateOverlap(0.8, 0.5).description()}},
      {"binary_confounded",
       {[](const nlohmann::json& p) {
          return std::make_shared<BinaryConfounded>(p.value("x2_disjoint", false));
        },
        BinaryConfounded(false).description()}},
      {"binary_depth3",
       {[](const nlohmann::json&) { return std::make_shared<BinaryDepth3>(); },
        BinaryDepth3().description()}},
      {"half_overlap",
       {[](const nlohmann::json&) { return std::make_shared<HalfOverlap>(); },
        HalfOverlap().description()}},
  };
  return reg;
}

}  // namespace

ModelPtr make_model(const std::string& name, const nlohmann::json& params) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) {
    std::string known;
    for (const auto& [k, v] : reg) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown model '" + name + "' (known: " + known + ")");
  }
  return it->second.first(params);
}

ModelPtr make_model(const std::string& name) {
  return make_model(name, nlohmann::json::object());
}

std::vector<ModelInfo> list_models() {
  std::vector<ModelInfo> out;
  for (const auto& [name, entry] : registry()) out.push_back({name, entry.second});
  return out;
}

}  // namespace crossworld
