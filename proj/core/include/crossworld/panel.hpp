#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "crossworld/common.hpp"

namespace crossworld {

// One unit's record over T timepoints: covariate vectors, binary treatments,
// and a single terminal outcome. Immutable by convention after validation;
// safe to share across threads.
struct Trajectory {
  std::vector<Eigen::VectorXd> covariates;  // length T, each of dimension d
  std::vector<int> treatments;              // length T, entries in {0,1}
  double outcome = 0.0;

  int horizon() const { return static_cast<int>(treatments.size()); }
  int covariate_dim() const {
    return covariates.empty() ? 0 : static_cast<int>(covariates.front().size());
  }
};

struct PanelDataset {
  std::vector<Trajectory> units;
  int horizon = 0;
  int covariate_dim = 0;
  std::vector<std::string> covariate_names;  // optional labels, empty or size d
  std::vector<std::string> unit_ids;         // optional source ids, empty or size n

  int n_units() const { return static_cast<int>(units.size()); }
};

// A deterministic binary treatment sequence.
struct Regime {
  std::vector<int> actions;

  int horizon() const { return static_cast<int>(actions.size()); }
  int at(int t) const { return actions.at(static_cast<std::size_t>(t)); }
  bool operator==(const Regime&) const = default;
};

Regime make_regime(std::vector<int> actions);

// Checks every Trajectory invariant; reports the first offending
// (unit, time, field) and returns the dataset unchanged on success.
// Unit indices are 0-based, time indices 1-based in messages.
const PanelDataset& validate_dataset(const PanelDataset& data);

// Flattened covariate history (x_1, ..., x_t) as a feature row.
Eigen::VectorXd history_features(const Trajectory& unit, int t_inclusive);

// True when the unit's observed treatments match regime.actions[0..t-1].
bool prefix_matches(const Trajectory& unit, const Regime& regime, int t_len);

}  // namespace crossworld
