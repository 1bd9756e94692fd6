#include "crossworld/panel.hpp"

#include <cmath>

namespace crossworld {

Regime make_regime(std::vector<int> actions) {
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (actions[t] != 0 && actions[t] != 1) {
      throw ConfigError("regime action must be 0 or 1 at t=" + std::to_string(t + 1));
    }
  }
  if (actions.empty()) throw ConfigError("regime must have length >= 1");
  return Regime{std::move(actions)};
}

const PanelDataset& validate_dataset(const PanelDataset& data) {
  if (data.units.empty()) throw ConfigError("dataset has no units");
  const int T = data.horizon;
  const int d = data.covariate_dim;
  if (T < 1) throw ConfigError("dataset horizon must be >= 1");
  if (d < 1) throw ConfigError("dataset covariate dimension must be >= 1");
  if (!data.covariate_names.empty() &&
      static_cast<int>(data.covariate_names.size()) != d) {
    throw ConfigError("covariate_names size does not match covariate dimension");
  }
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const Trajectory& u = data.units[i];
    const std::string unit = "unit " + std::to_string(i);
    if (u.covariates.size() != u.treatments.size()) {
      throw ConfigError("length mismatch, " + unit + ": " +
                        std::to_string(u.covariates.size()) + " covariate vectors vs " +
                        std::to_string(u.treatments.size()) + " treatments");
    }
    if (u.horizon() != T) {
      throw ConfigError("horizon mismatch, " + unit + ": T=" + std::to_string(u.horizon()) +
                        " but dataset T=" + std::to_string(T));
    }
    for (int t = 0; t < T; ++t) {
      const std::string at = unit + ", t=" + std::to_string(t + 1);
      if (static_cast<int>(u.covariates[t].size()) != d) {
        throw ConfigError("covariate dimension mismatch, " + at + ": got " +
                          std::to_string(u.covariates[t].size()) + ", expected " +
                          std::to_string(d));
      }
      for (int j = 0; j < d; ++j) {
        if (!std::isfinite(u.covariates[t][j])) {
          throw ConfigError("non-finite covariate, " + at + ", component " +
                            std::to_string(j));
        }
      }
      if (u.treatments[t] != 0 && u.treatments[t] != 1) {
        throw ConfigError("non-binary treatment, " + at);
      }
    }
    if (!std::isfinite(u.outcome)) {
      throw ConfigError("non-finite outcome, " + unit);
    }
  }
  return data;
}

Eigen::VectorXd history_features(const Trajectory& unit, int t_inclusive) {
  const int d = unit.covariate_dim();
  Eigen::VectorXd out(static_cast<Eigen::Index>(t_inclusive) * d);
  for (int s = 0; s < t_inclusive; ++s) {
    out.segment(static_cast<Eigen::Index>(s) * d, d) = unit.covariates[s];
  }
  return out;
}

bool prefix_matches(const Trajectory& unit, const Regime& regime, int t_len) {
  for (int s = 0; s < t_len; ++s) {
    if (unit.treatments[s] != regime.at(s)) return false;
  }
  return true;
}

}  // namespace crossworld
