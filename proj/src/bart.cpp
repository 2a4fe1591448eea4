#include "treevar/bart.hpp"

#include <cmath>
#include <limits>

namespace treevar {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void EquationForest::init(int num_trees, int T, int eq) {
  trees.assign(num_trees, RegressionTree{});
  fit_cache = Eigen::VectorXd::Zero(T);
  equation = eq;
}

void EquationForest::refresh_cache(const Eigen::MatrixXd& X) {
  fit_cache = Eigen::VectorXd::Zero(X.rows());
  for (const auto& t : trees) fit_cache += t.evaluate(X);
}

double EquationForest::cache_error(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd direct = Eigen::VectorXd::Zero(X.rows());
  for (const auto& t : trees) direct += t.evaluate(X);
  return (direct - fit_cache).cwiseAbs().maxCoeff();
}

Eigen::VectorXd partial_residuals(const Eigen::VectorXd& y_col, const Eigen::MatrixXd& F,
                                  const Eigen::RowVectorXd& lambda_row,
                                  const EquationForest& forest, int m_star,
                                  const Eigen::MatrixXd& X) {
  Eigen::VectorXd r = y_col - forest.fit_cache + forest.trees[m_star].evaluate(X);
  if (F.cols() > 0) r -= F * lambda_row.transpose();
  return r;
}

double leaf_marginal_loglik(const Eigen::VectorXd& residuals, const Eigen::VectorXd& precisions,
                            double tau2) {
  const int nobs = static_cast<int>(residuals.size());
  if (nobs == 0) return 0.0;
  const double prior_prec = 1.0 / tau2;
  double sum_w = 0.0, sum_wr = 0.0, sum_wr2 = 0.0, sum_log_w = 0.0;
  for (int t = 0; t < nobs; ++t) {
    const double w = precisions[t];
    sum_w += w;
    sum_wr += w * residuals[t];
    sum_wr2 += w * residuals[t] * residuals[t];
    sum_log_w += std::log(w);
  }
  const double post_prec = prior_prec + sum_w;
  return 0.5 * std::log(prior_prec / post_prec) + 0.5 * sum_wr * sum_wr / post_prec +
         0.5 * sum_log_w - 0.5 * nobs * kLog2Pi - 0.5 * sum_wr2;
}

double tree_marginal_loglik(const RegressionTree& tree, const Eigen::VectorXd& residuals,
                            const Eigen::VectorXd& precisions, double tau2,
                            const Eigen::MatrixXd& X) {
  const auto assign = tree.assign_leaves(X);
  const double prior_prec = 1.0 / tau2;
  // Accumulate per-leaf sufficient statistics in one pass.
  std::vector<double> sum_w(tree.size(), 0.0), sum_wr(tree.size(), 0.0);
  double total = 0.0;
  for (int t = 0; t < residuals.size(); ++t) {
    const double w = precisions[t];
    sum_w[assign[t]] += w;
    sum_wr[assign[t]] += w * residuals[t];
    total += 0.5 * std::log(w) - 0.5 * kLog2Pi - 0.5 * w * residuals[t] * residuals[t];
  }
  for (int id : tree.leaf_ids()) {
    if (sum_w[id] == 0.0) continue;
    const double post_prec = prior_prec + sum_w[id];
    total += 0.5 * std::log(prior_prec / post_prec) + 0.5 * sum_wr[id] * sum_wr[id] / post_prec;
  }
  return total;
}

void draw_leaf_means(RegressionTree& tree, const Eigen::VectorXd& residuals,
                     const Eigen::VectorXd& precisions, double tau2, const Eigen::MatrixXd& X,
                     Rng& rng) {
  const auto assign = tree.assign_leaves(X);
  std::vector<double> sum_w(tree.size(), 0.0), sum_wr(tree.size(), 0.0);
  for (int t = 0; t < residuals.size(); ++t) {
    sum_w[assign[t]] += precisions[t];
    sum_wr[assign[t]] += precisions[t] * residuals[t];
  }
  for (int id : tree.leaf_ids()) {
    const double post_var = 1.0 / (1.0 / tau2 + sum_w[id]);
    const double post_mean = post_var * sum_wr[id];
    tree.set_mu(id, rng.normal(post_mean, std::sqrt(post_var)));
  }
}

bool mh_step_tree(EquationForest& forest, int m_star, const Eigen::VectorXd& R,
                  const Eigen::VectorXd& precisions, const TreePriorParams& params,
                  const Eigen::VectorXd& s, const MoveProbs& moves, const Eigen::MatrixXd& X,
                  Rng& rng) {
  RegressionTree& tree = forest.trees[m_star];
  auto proposal = propose_move(tree, s, X, moves, rng);
  bool accepted = false;
  if (proposal.valid) {
    const double new_prior = log_tree_structure_prior(proposal.tree, params, s, X);
    if (std::isfinite(new_prior)) {
      const double old_prior = log_tree_structure_prior(tree, params, s, X);
      const double new_lik = tree_marginal_loglik(proposal.tree, R, precisions, params.tau2, X);
      const double old_lik = tree_marginal_loglik(tree, R, precisions, params.tau2, X);
      const double log_acc =
          (new_lik - old_lik) + (new_prior - old_prior) + proposal.log_proposal_ratio;
      if (std::log(rng.uniform_pos()) < log_acc) {
        tree = std::move(proposal.tree);
        accepted = true;
      }
    }
  }
  draw_leaf_means(tree, R, precisions, params.tau2, X, rng);
  return accepted;
}

Eigen::VectorXi count_splits(const EquationForest& forest, int k) {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
  for (const auto& tree : forest.trees) {
    for (int id : tree.internal_ids()) ++counts[tree.node(id).pred];
  }
  return counts;
}

}  // namespace treevar
