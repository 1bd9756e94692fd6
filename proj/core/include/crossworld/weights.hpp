#pragma once

#include <span>
#include <string>
#include <vector>

#include "crossworld/common.hpp"
#include "nlohmann/json_fwd.hpp"

namespace crossworld {

// Propensity-score weight functions on [0,1]. Smooth kinds carry analytic
// first and second derivatives; hard trimming is flagged non-smooth and is
// rejected by estimation paths that need derivatives.
class WeightFunction {
 public:
  enum class Kind { IdentityOne, Linear, HardTrim, SmoothTrim };

  static WeightFunction identity_one();
  static WeightFunction linear();
  static WeightFunction hard_trim(double eps);
  static WeightFunction smooth_trim(double k);
  // Parameterized by a target threshold: rises to 1 - exp(-shape) at p = eps.
  static WeightFunction smooth_trim_at(double eps, double shape);

  double eval(double p) const;
  double deriv(double p) const;
  double deriv2(double p) const;

  bool smooth() const { return kind_ != Kind::HardTrim; }
  Kind kind() const { return kind_; }
  double rate() const { return k_; }
  double threshold() const { return eps_; }
  std::string describe() const;

  bool operator==(const WeightFunction&) const = default;

 private:
  WeightFunction(Kind kind, double eps, double k) : kind_(kind), eps_(eps), k_(k) {}
  Kind kind_ = Kind::IdentityOne;
  double eps_ = 0.0;  // hard trim threshold
  double k_ = 0.0;    // smooth trim rate
};

struct WeightPair {
  WeightFunction w = WeightFunction::identity_one();
  WeightFunction w_prime = WeightFunction::identity_one();

  // Both members vanish at zero, so a zero propensity on either side
  // nulls the product.
  bool strictly_compliant() const { return w.eval(0.0) == 0.0 && w_prime.eval(0.0) == 0.0; }
};

// Per-timepoint weight pairs (w_t, w_t'). Construction rejects pairs where
// both members are positive at zero, since such pairs leave ratio terms
// unbounded under positivity violations; callers that knowingly work with
// positivity-respecting data may pass unsafe_allow.
class WeightSpec {
 public:
  static WeightSpec uniform(int horizon, WeightPair pair, bool unsafe_allow = false);
  static WeightSpec from_pairs(std::vector<WeightPair> pairs, bool unsafe_allow = false);

  int horizon() const { return static_cast<int>(pairs_.size()); }
  const WeightPair& at(int t) const { return pairs_.at(static_cast<std::size_t>(t)); }
  bool all_smooth() const;
  bool unsafe_allowed() const { return unsafe_allow_; }

 private:
  std::vector<WeightPair> pairs_;
  bool unsafe_allow_ = false;
};

// Inverse-propensity ratio terms for one timepoint:
//   r  = 1{a_obs = a_target}       * w(pi) * w'(pi') / pi
//   r' = 1{a_obs = a_target_other} * w(pi) * w'(pi') / pi'
// with the 0/0 convention that a zero weight product gives 0. A zero divisor
// under a nonzero weight product is an error (the pair violates the
// weight-nulling condition). divisor_floor > 0 guards floating-point division
// without touching the weight arguments.
struct RatioTerms {
  double r = 0.0;
  double r_prime = 0.0;
};

RatioTerms ratio_terms(int a_obs, int a_target, int a_target_other, double pi,
                       double pi_prime, const WeightFunction& w,
                       const WeightFunction& w_prime, double divisor_floor = 0.0);

double cumulative_weight(std::span<const double> per_time_values);

// (sum w)^2 / sum w^2; requires nonnegative weights, at least one positive.
double effective_sample_size(std::span<const double> unit_weights);

// JSON forms:
//   {"all": {"w": {...}, "w_prime": {...}}, "unsafe_allow": false}
//   [{"t": 1, "w": {...}, "w_prime": {...}}, ...]          (every t covered)
// Weight objects: {"kind": "identity_one" | "linear"}
//                 {"kind": "hard_trim", "eps": 0.05}
//                 {"kind": "smooth_trim", "k": 20}
//                 {"kind": "smooth_trim", "eps": 0.05, "shape": 3}
WeightFunction parse_weight_function(const nlohmann::json& spec);
WeightSpec parse_weight_spec(const nlohmann::json& spec, int horizon);

}  // namespace crossworld
