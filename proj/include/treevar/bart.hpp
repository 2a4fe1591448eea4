#pragma once

#include <Eigen/Dense>
#include <vector>

#include "treevar/rng.hpp"
#include "treevar/tree.hpp"

namespace treevar {

// Sum-of-trees state for one VAR equation. fit_cache tracks the summed tree
// fit on the training design and is refreshed periodically to bound drift.
struct EquationForest {
  std::vector<RegressionTree> trees;
  Eigen::VectorXd fit_cache;
  int equation = 0;

  void init(int num_trees, int T, int eq);
  void refresh_cache(const Eigen::MatrixXd& X);
  double cache_error(const Eigen::MatrixXd& X) const;
};

// R = y - F*lambda_row' - sum_{m != m_star} g_m(X), computed through the
// cache as y - F*lambda_row' - fit_cache + g_{m_star}(X).
Eigen::VectorXd partial_residuals(const Eigen::VectorXd& y_col, const Eigen::MatrixXd& F,
                                  const Eigen::RowVectorXd& lambda_row,
                                  const EquationForest& forest, int m_star,
                                  const Eigen::MatrixXd& X);

// Log of int prod_t N(r_t; mu, 1/w_t) N(mu; 0, tau2) dmu over one leaf.
// Empty leaves contribute zero.
double leaf_marginal_loglik(const Eigen::VectorXd& residuals, const Eigen::VectorXd& precisions,
                            double tau2);

// Sum of leaf marginals under the tree's routing of X.
double tree_marginal_loglik(const RegressionTree& tree, const Eigen::VectorXd& residuals,
                            const Eigen::VectorXd& precisions, double tau2,
                            const Eigen::MatrixXd& X);

// Conjugate leaf-mean redraw for the whole tree; empty leaves from N(0, tau2).
void draw_leaf_means(RegressionTree& tree, const Eigen::VectorXd& residuals,
                     const Eigen::VectorXd& precisions, double tau2, const Eigen::MatrixXd& X,
                     Rng& rng);

// One Metropolis-Hastings update of tree m_star against partial residuals R,
// followed by the leaf redraw (performed whether or not the move is
// accepted). Returns true when the structural move was accepted.
bool mh_step_tree(EquationForest& forest, int m_star, const Eigen::VectorXd& R,
                  const Eigen::VectorXd& precisions, const TreePriorParams& params,
                  const Eigen::VectorXd& s, const MoveProbs& moves, const Eigen::MatrixXd& X,
                  Rng& rng);

// Internal split rules per predictor across the forest.
Eigen::VectorXi count_splits(const EquationForest& forest, int k);

}  // namespace treevar
