#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossworld {

// Bad inputs: malformed configs, invalid datasets, mis-sized regimes.
// The CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures during estimation or numeric evaluation (non-finite values,
// degenerate weights, unusable nuisances). CLI exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic pairwise summation. Parallel callers sum fixed-size chunks
// with this and combine chunk results in index order, so thread count never
// changes the bits of the result.
double pairwise_sum(std::span<const double> values);

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

// Two-pass variance (population denominator n, matching P_n[(x - mean)^2]).
double population_variance(std::span<const double> values);

// Linear-interpolation quantile of a sorted copy; q in [0, 1].
double quantile(std::vector<double> values, double q);

struct SummaryStats {
  double min = 0, q25 = 0, median = 0, mean = 0, q75 = 0, max = 0;
};

SummaryStats summarize(const std::vector<double>& values);

// Inverse standard normal CDF (Acklam's rational approximation with one
// Halley refinement; ~1e-15 absolute accuracy in (0, 1)).
double inverse_normal_cdf(double p);

inline double normal_quantile_two_sided(double alpha) {
  return inverse_normal_cdf(1.0 - alpha / 2.0);
}

inline bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace crossworld
