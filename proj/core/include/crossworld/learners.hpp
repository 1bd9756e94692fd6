#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crossworld/common.hpp"
#include "nlohmann/json_fwd.hpp"

namespace crossworld {

enum class LearnerTask { Regression, BinaryProbability };

// A fitted, immutable predictor. BinaryProbability fits predict in [0,1].
class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
  double predict_one(const Eigen::VectorXd& x) const;
};

// Fitting is deterministic given (data, task, seed); predictions are
// deterministic given fitted state.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<PredictiveModel> fit(const Eigen::MatrixXd& X,
                                               const Eigen::VectorXd& y, LearnerTask task,
                                               std::uint64_t seed) const = 0;
};

using LearnerPtr = std::shared_ptr<const Learner>;

// Ridge-penalized linear regression; logistic with the same penalty for
// binary probabilities (IRLS). Features are standardized internally.
LearnerPtr make_ridge_learner(double lambda = 1e-3);

// Gradient-boosted regression trees with histogram splits (squared loss;
// probability fits are clamped to [0,1]).
struct GbtParams {
  int trees = 100;
  int depth = 2;
  double learning_rate = 0.15;
  int min_leaf = 10;
  int bins = 64;
};
LearnerPtr make_gbt_learner(const GbtParams& params = {});

// k-nearest-neighbor averaging on standardized features; k=0 picks sqrt(n).
LearnerPtr make_knn_learner(int k = 0);

// Stacking combiner: members produce out-of-fold predictions on an internal
// fold split, and a simplex-constrained least-squares solve weights them by
// out-of-fold squared error; members are then refit on the full data.
LearnerPtr make_stack_learner(std::vector<LearnerPtr> members, int inner_folds = 3);

// {"learner":"ridge","lambda":...} | {"learner":"gbt","trees":...,...}
// {"learner":"knn","k":...}
// {"learner":"stack","members":["ridge","gbt"],"inner_folds":3}
//   (members may also be full config objects)
LearnerPtr make_learner(const nlohmann::json& config);

// Simplex projection and the nonnegative, sum-to-one least squares solve
// used by the stacking combiner (exposed for tests).
Eigen::VectorXd project_to_simplex(Eigen::VectorXd v);
Eigen::VectorXd simplex_least_squares(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                      int iterations = 500);

}  // namespace crossworld
