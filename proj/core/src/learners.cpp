#include "crossworld/learners.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "crossworld/rng.hpp"
#include "nlohmann/json.hpp"

namespace crossworld {

double PredictiveModel::predict_one(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd X(1, x.size());
  X.row(0) = x.transpose();
  return predict(X)[0];
}

namespace {

void check_training_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) throw NumericError("learner fit called with no training rows");
  if (X.rows() != y.size()) {
    throw NumericError("learner fit: feature rows do not match label count");
  }
  if (!y.allFinite() || !X.allFinite()) {
    throw NumericError("learner fit: non-finite training values");
  }
}

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer from(const Eigen::MatrixXd& X) {
    Standardizer s;
    s.mean = X.colwise().mean();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var =
          (X.col(j).array() - s.mean[j]).square().sum() / static_cast<double>(X.rows());
      s.scale[j] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
  }
};

double sigmoid(double eta) {
  const double z = std::clamp(eta, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-z));
}

// ---------------------------------------------------------------------------
// Ridge / ridge-logistic
// ---------------------------------------------------------------------------

class LinearModel final : public PredictiveModel {
 public:
  LinearModel(Standardizer std, Eigen::VectorXd beta, double intercept, bool logistic)
      : std_(std::move(std)), beta_(std::move(beta)), intercept_(intercept),
        logistic_(logistic) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd eta =
        (std_.apply(X) * beta_).array() + intercept_;
    if (!logistic_) return eta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = sigmoid(eta[i]);
    return eta;
  }

 private:
  Standardizer std_;
  Eigen::VectorXd beta_;
  double intercept_;
  bool logistic_;
};

class RidgeLearner final : public Learner {
 public:
  explicit RidgeLearner(double lambda) : lambda_(lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("ridge lambda must be >= 0");
  }

  std::string name() const override { return "ridge"; }

  std::unique_ptr<PredictiveModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       LearnerTask task, std::uint64_t) const override {
    check_training_data(X, y);
    const Standardizer std = Standardizer::from(X);
    const Eigen::MatrixXd Z = std.apply(X);
    const auto n = static_cast<double>(X.rows());
    const Eigen::Index p = X.cols();
    const double penalty = lambda_ * n;

    if (task == LearnerTask::Regression) {
      const double y_mean = y.mean();
      Eigen::MatrixXd A = Z.transpose() * Z;
      A.diagonal().array() += penalty;
      const Eigen::VectorXd beta =
          A.ldlt().solve(Z.transpose() * (y.array() - y_mean).matrix());
      return std::make_unique<LinearModel>(std, beta, y_mean, false);
    }

    // IRLS for the ridge-penalized logistic fit; the intercept is
    // unpenalized. The penalty keeps separable data finite.
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p + 1);  // [intercept, beta]
    Eigen::MatrixXd Z1(X.rows(), p + 1);
    Z1.col(0).setOnes();
    Z1.rightCols(p) = Z;
    for (int iter = 0; iter < 100; ++iter) {
      Eigen::VectorXd eta = Z1 * coef;
      Eigen::VectorXd mu(eta.size()), w(eta.size());
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        mu[i] = sigmoid(eta[i]);
        w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
      }
      Eigen::MatrixXd A = Z1.transpose() * w.asDiagonal() * Z1;
      for (Eigen::Index j = 1; j <= p; ++j) A(j, j) += penalty;
      const Eigen::VectorXd grad = Z1.transpose() * (y - mu) -
                                   penalty * (Eigen::VectorXd(p + 1) << 0.0,
                                              coef.tail(p)).finished();
      const Eigen::VectorXd step = A.ldlt().solve(grad);
      coef += step;
      if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
    }
    return std::make_unique<LinearModel>(std, coef.tail(p), coef[0], true);
  }

 private:
  double lambda_;
};

// ---------------------------------------------------------------------------
// Gradient-boosted trees
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_one(const Eigen::VectorXd& x) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(idx)];
      idx = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(idx)].value;
  }
};

class GbtModel final : public PredictiveModel {
 public:
  GbtModel(double base, double lr, std::vector<Tree> trees, bool clamp01)
      : base_(base), lr_(lr), trees_(std::move(trees)), clamp01_(clamp01) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double f = base_;
      const Eigen::VectorXd x = X.row(i);
      for (const Tree& t : trees_) f += lr_ * t.predict_one(x);
      out[i] = clamp01_ ? std::clamp(f, 0.0, 1.0) : f;
    }
    return out;
  }

 private:
  double base_;
  double lr_;
  std::vector<Tree> trees_;
  bool clamp01_;
};

class GbtLearner final : public Learner {
 public:
  explicit GbtLearner(GbtParams params) : p_(params) {
    if (p_.trees < 1 || p_.depth < 1 || p_.min_leaf < 1 || p_.bins < 2 ||
        !(p_.learning_rate > 0.0)) {
      throw ConfigError("invalid gbt parameters");
    }
  }

  std::string name() const override { return "gbt"; }

  std::unique_ptr<PredictiveModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       LearnerTask task, std::uint64_t) const override {
    check_training_data(X, y);
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();

    // Quantile bin edges per feature; bin index = count of edges <= x.
    std::vector<std::vector<double>> edges(static_cast<std::size_t>(p));
    std::vector<std::vector<int>> bin(static_cast<std::size_t>(p),
                                      std::vector<int>(static_cast<std::size_t>(n)));
    for (Eigen::Index j = 0; j < p; ++j) {
      std::vector<double> col(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = X(i, j);
      std::sort(col.begin(), col.end());
      col.erase(std::unique(col.begin(), col.end()), col.end());
      std::vector<double>& e = edges[static_cast<std::size_t>(j)];
      if (static_cast<int>(col.size()) <= p_.bins) {
        // midpoints between distinct values
        for (std::size_t v = 0; v + 1 < col.size(); ++v) {
          e.push_back(0.5 * (col[v] + col[v + 1]));
        }
      } else {
        for (int b = 1; b < p_.bins; ++b) {
          const std::size_t idx =
              static_cast<std::size_t>(static_cast<double>(col.size() - 1) * b / p_.bins);
          const double edge = col[idx];
          if (e.empty() || edge > e.back()) e.push_back(edge);
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        bin[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = static_cast<int>(
            std::upper_bound(e.begin(), e.end(), X(i, j)) - e.begin());
      }
    }

    const double base = y.mean();
    Eigen::VectorXd residual = y.array() - base;
    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(p_.trees));
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);

    for (int m = 0; m < p_.trees; ++m) {
      Tree tree;
      build_node(tree, all, bin, edges, residual, 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = X.row(i);
        residual[i] -= p_.learning_rate * tree.predict_one(x);
      }
      trees.push_back(std::move(tree));
    }
    return std::make_unique<GbtModel>(base, p_.learning_rate, std::move(trees),
                                      task == LearnerTask::BinaryProbability);
  }

 private:
  // Builds a subtree over `idx`, returns node index.
  int build_node(Tree& tree, const std::vector<int>& idx,
                 const std::vector<std::vector<int>>& bin,
                 const std::vector<std::vector<double>>& edges,
                 const Eigen::VectorXd& residual, int level) const {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});

    double sum = 0.0;
    for (int i : idx) sum += residual[i];
    const double count = static_cast<double>(idx.size());
    tree.nodes[static_cast<std::size_t>(node_id)].value = sum / count;

    if (level >= p_.depth || static_cast<int>(idx.size()) < 2 * p_.min_leaf) {
      return node_id;
    }

    const double parent_score = sum * sum / count;
    double best_gain = 1e-12;
    int best_feature = -1;
    int best_bin = -1;
    const std::size_t p = bin.size();
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t nbins = edges[j].size() + 1;
      if (nbins < 2) continue;
      std::vector<double> bsum(nbins, 0.0);
      std::vector<int> bcnt(nbins, 0);
      for (int i : idx) {
        const int b = bin[j][static_cast<std::size_t>(i)];
        bsum[static_cast<std::size_t>(b)] += residual[i];
        ++bcnt[static_cast<std::size_t>(b)];
      }
      double lsum = 0.0;
      int lcnt = 0;
      for (std::size_t b = 0; b + 1 < nbins; ++b) {
        lsum += bsum[b];
        lcnt += bcnt[b];
        const int rcnt = static_cast<int>(idx.size()) - lcnt;
        if (lcnt < p_.min_leaf || rcnt < p_.min_leaf) continue;
        const double rsum = sum - lsum;
        const double gain = lsum * lsum / lcnt + rsum * rsum / rcnt - parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(j);
          best_bin = static_cast<int>(b);
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
      if (bin[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(i)] <=
          best_bin) {
        left_idx.push_back(i);
      } else {
        right_idx.push_back(i);
      }
    }
    const double threshold = edges[static_cast<std::size_t>(best_feature)]
                                  [static_cast<std::size_t>(best_bin)];
    const int left = build_node(tree, left_idx, bin, edges, residual, level + 1);
    const int right = build_node(tree, right_idx, bin, edges, residual, level + 1);
    TreeNode& nd = tree.nodes[static_cast<std::size_t>(node_id)];
    nd.feature = best_feature;
    nd.threshold = threshold;
    nd.left = left;
    nd.right = right;
    return node_id;
  }

  GbtParams p_;
};

// ---------------------------------------------------------------------------
// k-nearest neighbors
// ---------------------------------------------------------------------------

class KnnModel final : public PredictiveModel {
 public:
  KnnModel(Standardizer std, Eigen::MatrixXd Z, Eigen::VectorXd y, int k, bool clamp01)
      : std_(std::move(std)), Z_(std::move(Z)), y_(std::move(y)), k_(k),
        clamp01_(clamp01) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    const Eigen::MatrixXd Q = std_.apply(X);
    const Eigen::VectorXd train_sq = Z_.rowwise().squaredNorm();
    Eigen::VectorXd out(Q.rows());
    std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(Z_.rows()));
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
      const Eigen::VectorXd d2 =
          (train_sq - 2.0 * (Z_ * Q.row(i).transpose())).array() + Q.row(i).squaredNorm();
      for (Eigen::Index r = 0; r < Z_.rows(); ++r) {
        dist[static_cast<std::size_t>(r)] = {d2[r], static_cast<int>(r)};
      }
      const int k = std::min<int>(k_, static_cast<int>(Z_.rows()));
      std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
      double s = 0.0;
      for (int r = 0; r < k; ++r) s += y_[dist[static_cast<std::size_t>(r)].second];
      out[i] = s / k;
      if (clamp01_) out[i] = std::clamp(out[i], 0.0, 1.0);
    }
    return out;
  }

 private:
  Standardizer std_;
  Eigen::MatrixXd Z_;
  Eigen::VectorXd y_;
  int k_;
  bool clamp01_;
};

class KnnLearner final : public Learner {
 public:
  explicit KnnLearner(int k) : k_(k) {
    if (k < 0) throw ConfigError("knn k must be >= 0");
  }

  std::string name() const override { return "knn"; }

  std::unique_ptr<PredictiveModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       LearnerTask task, std::uint64_t) const override {
    check_training_data(X, y);
    const int k = k_ > 0 ? k_
                         : std::max(5, static_cast<int>(std::lround(
                                           std::sqrt(static_cast<double>(X.rows())))));
    const Standardizer std = Standardizer::from(X);
    return std::make_unique<KnnModel>(std, std.apply(X), y, k,
                                      task == LearnerTask::BinaryProbability);
  }

 private:
  int k_;
};

// ---------------------------------------------------------------------------
// Stacking
// ---------------------------------------------------------------------------

class StackModel final : public PredictiveModel {
 public:
  StackModel(std::vector<std::unique_ptr<PredictiveModel>> fitted, Eigen::VectorXd weights)
      : fitted_(std::move(fitted)), weights_(std::move(weights)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (std::size_t m = 0; m < fitted_.size(); ++m) {
      if (weights_[static_cast<Eigen::Index>(m)] == 0.0) continue;
      out += weights_[static_cast<Eigen::Index>(m)] * fitted_[m]->predict(X);
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<PredictiveModel>> fitted_;
  Eigen::VectorXd weights_;
};

class StackLearner final : public Learner {
 public:
  StackLearner(std::vector<LearnerPtr> members, int inner_folds)
      : members_(std::move(members)), inner_folds_(inner_folds) {
    if (members_.empty()) throw ConfigError("stack requires at least one member");
    if (inner_folds_ < 2) throw ConfigError("stack inner_folds must be >= 2");
  }

  std::string name() const override { return "stack"; }

  std::unique_ptr<PredictiveModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       LearnerTask task, std::uint64_t seed) const override {
    check_training_data(X, y);
    const Eigen::Index n = X.rows();
    const std::size_t M = members_.size();

    Eigen::VectorXd weights;
    if (M == 1 || n < 2 * inner_folds_) {
      weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(M),
                                          1.0 / static_cast<double>(M));
    } else {
      // Deterministic shuffled fold assignment.
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      KeyedRng rng(seed, 0x57ac4);
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
      }
      std::vector<int> fold(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < order.size(); ++i) {
        fold[static_cast<std::size_t>(order[i])] = static_cast<int>(i) % inner_folds_;
      }

      Eigen::MatrixXd oof(n, static_cast<Eigen::Index>(M));
      for (int f = 0; f < inner_folds_; ++f) {
        std::vector<int> train_idx, test_idx;
        for (Eigen::Index i = 0; i < n; ++i) {
          (fold[static_cast<std::size_t>(i)] == f ? test_idx : train_idx)
              .push_back(static_cast<int>(i));
        }
        Eigen::MatrixXd Xtr(train_idx.size(), X.cols()), Xte(test_idx.size(), X.cols());
        Eigen::VectorXd ytr(train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
          Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train_idx[i]);
          ytr[static_cast<Eigen::Index>(i)] = y[train_idx[i]];
        }
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
          Xte.row(static_cast<Eigen::Index>(i)) = X.row(test_idx[i]);
        }
        for (std::size_t m = 0; m < M; ++m) {
          const auto fitted = members_[m]->fit(
              Xtr, ytr, task, detail::mix(seed, 1000 + m * inner_folds_ + f));
          const Eigen::VectorXd pred = fitted->predict(Xte);
          for (std::size_t i = 0; i < test_idx.size(); ++i) {
            oof(test_idx[i], static_cast<Eigen::Index>(m)) =
                pred[static_cast<Eigen::Index>(i)];
          }
        }
      }
      weights = simplex_least_squares(oof, y);
    }

    std::vector<std::unique_ptr<PredictiveModel>> fitted;
    for (std::size_t m = 0; m < M; ++m) {
      fitted.push_back(members_[m]->fit(X, y, task, detail::mix(seed, m)));
    }
    return std::make_unique<StackModel>(std::move(fitted), std::move(weights));
  }

 private:
  std::vector<LearnerPtr> members_;
  int inner_folds_;
};

}  // namespace

Eigen::VectorXd project_to_simplex(Eigen::VectorXd v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  int rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumsum += u[i];
    const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      tau = t;
    }
  }
  (void)rho;
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::max(v[i] - tau, 0.0);
  return v;
}

Eigen::VectorXd simplex_least_squares(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                      int iterations) {
  const Eigen::Index M = Z.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(M, 1.0 / static_cast<double>(M));
  const Eigen::MatrixXd G = Z.transpose() * Z;
  const Eigen::VectorXd b = Z.transpose() * y;
  const double lipschitz = 2.0 * std::max(G.trace(), 1e-12);
  const double step = 1.0 / lipschitz;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = 2.0 * (G * beta - b);
    beta = project_to_simplex(beta - step * grad);
  }
  return beta;
}

LearnerPtr make_ridge_learner(double lambda) {
  return std::make_shared<RidgeLearner>(lambda);
}

LearnerPtr make_gbt_learner(const GbtParams& params) {
  return std::make_shared<GbtLearner>(params);
}

LearnerPtr make_knn_learner(int k) { return std::make_shared<KnnLearner>(k); }

LearnerPtr make_stack_learner(std::vector<LearnerPtr> members, int inner_folds) {
  return std::make_shared<StackLearner>(std::move(members), inner_folds);
}

LearnerPtr make_learner(const nlohmann::json& config) {
  if (config.is_string()) {
    nlohmann::json wrapped;
    wrapped["learner"] = config.get<std::string>();
    return make_learner(wrapped);
  }
  if (!config.is_object() || !config.contains("learner")) {
    throw ConfigError("learner config must name a 'learner'");
  }
  const std::string kind = config.at("learner").get<std::string>();
  if (kind == "ridge") return make_ridge_learner(config.value("lambda", 1e-3));
  if (kind == "gbt") {
    GbtParams p;
    p.trees = config.value("trees", p.trees);
    p.depth = config.value("depth", p.depth);
    p.learning_rate = config.value("learning_rate", p.learning_rate);
    p.min_leaf = config.value("min_leaf", p.min_leaf);
    p.bins = config.value("bins", p.bins);
    return make_gbt_learner(p);
  }
  if (kind == "knn") return make_knn_learner(config.value("k", 0));
  if (kind == "stack") {
    if (!config.contains("members")) throw ConfigError("stack config requires 'members'");
    std::vector<LearnerPtr> members;
    for (const auto& m : config.at("members")) members.push_back(make_learner(m));
    return make_stack_learner(std::move(members), config.value("inner_folds", 3));
  }
  throw ConfigError("unknown learner '" + kind + "'");
}

}  // namespace crossworld
