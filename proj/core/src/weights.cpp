#include "crossworld/weights.hpp"

#include <cmath>

#include "nlohmann/json.hpp"

namespace crossworld {

namespace {

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw NumericError("weight argument outside [0,1]: " + std::to_string(p));
  }
}

}  // namespace

WeightFunction WeightFunction::identity_one() { return {Kind::IdentityOne, 0.0, 0.0}; }
WeightFunction WeightFunction::linear() { return {Kind::Linear, 0.0, 0.0}; }

WeightFunction WeightFunction::hard_trim(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("hard_trim threshold must be in [0,1]");
  return {Kind::HardTrim, eps, 0.0};
}

WeightFunction WeightFunction::smooth_trim(double k) {
  if (!(k > 0.0)) throw ConfigError("smooth_trim rate k must be > 0");
  return {Kind::SmoothTrim, 0.0, k};
}

WeightFunction WeightFunction::smooth_trim_at(double eps, double shape) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("smooth_trim eps must be in (0,1]");
  if (!(shape > 0.0)) throw ConfigError("smooth_trim shape must be > 0");
  return {Kind::SmoothTrim, eps, shape / eps};
}

double WeightFunction::eval(double p) const {
  check_probability(p);
  switch (kind_) {
    case Kind::IdentityOne: return 1.0;
    case Kind::Linear: return p;
    case Kind::HardTrim: return p >= eps_ ? 1.0 : 0.0;  // closed at the threshold
    case Kind::SmoothTrim: return 1.0 - std::exp(-k_ * p);
  }
  return 0.0;
}

double WeightFunction::deriv(double p) const {
  check_probability(p);
  if (!smooth()) throw NumericError("non-smooth weight has no derivative");
  switch (kind_) {
    case Kind::IdentityOne: return 0.0;
    case Kind::Linear: return 1.0;
    case Kind::SmoothTrim: return k_ * std::exp(-k_ * p);
    case Kind::HardTrim: break;
  }
  return 0.0;
}

double WeightFunction::deriv2(double p) const {
  check_probability(p);
  if (!smooth()) throw NumericError("non-smooth weight has no derivative");
  switch (kind_) {
    case Kind::IdentityOne: return 0.0;
    case Kind::Linear: return 0.0;
    case Kind::SmoothTrim: return -k_ * k_ * std::exp(-k_ * p);
    case Kind::HardTrim: break;
  }
  return 0.0;
}

std::string WeightFunction::describe() const {
  switch (kind_) {
    case Kind::IdentityOne: return "identity_one";
    case Kind::Linear: return "linear";
    case Kind::HardTrim: return "hard_trim(" + std::to_string(eps_) + ")";
    case Kind::SmoothTrim: return "smooth_trim(k=" + std::to_string(k_) + ")";
  }
  return "?";
}

WeightSpec WeightSpec::uniform(int horizon, WeightPair pair, bool unsafe_allow) {
  if (horizon < 1) throw ConfigError("weight spec horizon must be >= 1");
  return from_pairs(std::vector<WeightPair>(static_cast<std::size_t>(horizon), pair),
                    unsafe_allow);
}

WeightSpec WeightSpec::from_pairs(std::vector<WeightPair> pairs, bool unsafe_allow) {
  if (pairs.empty()) throw ConfigError("weight spec must cover at least one timepoint");
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const WeightPair& p = pairs[t];
    if (!unsafe_allow && p.w.eval(0.0) > 0.0 && p.w_prime.eval(0.0) > 0.0) {
      throw ConfigError(
          "weight pair at t=" + std::to_string(t + 1) + " (" + p.w.describe() + ", " +
          p.w_prime.describe() +
          ") has both members positive at zero; ratios are unbounded under "
          "positivity violations (set unsafe_allow for positivity-respecting data)");
    }
  }
  WeightSpec spec;
  spec.pairs_ = std::move(pairs);
  spec.unsafe_allow_ = unsafe_allow;
  return spec;
}

bool WeightSpec::all_smooth() const {
  for (const WeightPair& p : pairs_) {
    if (!p.w.smooth() || !p.w_prime.smooth()) return false;
  }
  return true;
}

RatioTerms ratio_terms(int a_obs, int a_target, int a_target_other, double pi,
                       double pi_prime, const WeightFunction& w,
                       const WeightFunction& w_prime, double divisor_floor) {
  check_probability(pi);
  check_probability(pi_prime);
  const double product = w.eval(pi) * w_prime.eval(pi_prime);
  RatioTerms out;
  if (product == 0.0) return out;  // 0/0 convention
  const double div = std::max(pi, divisor_floor);
  const double div_prime = std::max(pi_prime, divisor_floor);
  if (div == 0.0 || div_prime == 0.0) {
    throw NumericError("unbounded ratio: weight pair violates condition 1 (pi=" +
                       std::to_string(pi) + ", pi'=" + std::to_string(pi_prime) + ")");
  }
  if (a_obs == a_target) out.r = product / div;
  if (a_obs == a_target_other) out.r_prime = product / div_prime;
  return out;
}

double cumulative_weight(std::span<const double> per_time_values) {
  double prod = 1.0;
  for (double v : per_time_values) {
    if (v < 0.0) throw NumericError("negative weight value");
    prod *= v;
  }
  return prod;
}

double effective_sample_size(std::span<const double> unit_weights) {
  double sum = 0.0, sum_sq = 0.0;
  for (double w : unit_weights) {
    if (w < 0.0) throw NumericError("negative unit weight");
    sum += w;
    sum_sq += w * w;
  }
  if (sum_sq == 0.0) throw NumericError("degenerate weights: all-zero");
  return sum * sum / sum_sq;
}

WeightFunction parse_weight_function(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("kind")) {
    throw ConfigError("weight function must be an object with a 'kind' field");
  }
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "identity_one" || kind == "one") return WeightFunction::identity_one();
  if (kind == "linear" || kind == "overlap") return WeightFunction::linear();
  if (kind == "hard_trim") {
    if (!spec.contains("eps")) throw ConfigError("hard_trim requires 'eps'");
    return WeightFunction::hard_trim(spec.at("eps").get<double>());
  }
  if (kind == "smooth_trim") {
    if (spec.contains("k")) return WeightFunction::smooth_trim(spec.at("k").get<double>());
    if (spec.contains("eps") && spec.contains("shape")) {
      return WeightFunction::smooth_trim_at(spec.at("eps").get<double>(),
                                            spec.at("shape").get<double>());
    }
    throw ConfigError("smooth_trim requires 'k' or ('eps' and 'shape')");
  }
  throw ConfigError("unknown weight kind '" + kind + "'");
}

WeightSpec parse_weight_spec(const nlohmann::json& spec, int horizon) {
  bool unsafe_allow = false;
  if (spec.is_object() && spec.contains("unsafe_allow")) {
    unsafe_allow = spec.at("unsafe_allow").get<bool>();
  }
  if (spec.is_object() && spec.contains("all")) {
    const auto& pair_spec = spec.at("all");
    WeightPair pair{parse_weight_function(pair_spec.at("w")),
                    parse_weight_function(pair_spec.at("w_prime"))};
    return WeightSpec::uniform(horizon, pair, unsafe_allow);
  }
  const nlohmann::json* entries = nullptr;
  if (spec.is_array()) {
    entries = &spec;
  } else if (spec.is_object() && spec.contains("pairs")) {
    entries = &spec.at("pairs");
  } else {
    throw ConfigError("weight spec must contain 'all' or a per-timepoint array");
  }
  std::vector<WeightPair> pairs(static_cast<std::size_t>(horizon));
  std::vector<bool> seen(static_cast<std::size_t>(horizon), false);
  for (const auto& entry : *entries) {
    const int t = entry.at("t").get<int>();
    if (t < 1 || t > horizon) {
      throw ConfigError("weight spec entry t=" + std::to_string(t) +
                        " outside 1.." + std::to_string(horizon));
    }
    pairs[static_cast<std::size_t>(t - 1)] = WeightPair{
        parse_weight_function(entry.at("w")), parse_weight_function(entry.at("w_prime"))};
    seen[static_cast<std::size_t>(t - 1)] = true;
  }
  for (int t = 0; t < horizon; ++t) {
    if (!seen[static_cast<std::size_t>(t)]) {
      throw ConfigError("weight spec missing t=" + std::to_string(t + 1));
    }
  }
  return WeightSpec::from_pairs(std::move(pairs), unsafe_allow);
}

}  // namespace crossworld
