#pragma once

// Simulation from the BART prior, used as the marginal-conditional side of
// the getting-it-right checks. Trees are drawn by rejection: the recursive
// process restarts whenever a split attempt finds no admissible cut, which
// makes the draw law exactly the normalized tree prior the MH kernel targets.

#include <vector>

#include "treevar/bart.hpp"
#include "treevar/rng.hpp"
#include "treevar/tree.hpp"

namespace testutil {

inline bool grow_from_prior(treevar::RegressionTree& tree, int node_id,
                            const std::vector<int>& rows, const treevar::TreePriorParams& params,
                            const Eigen::VectorXd& s, const Eigen::MatrixXd& X,
                            treevar::Rng& rng) {
  const int depth = tree.node(node_id).depth;
  if (rng.uniform() >= treevar::split_prob_at_depth(depth, params)) return true;
  auto rule = treevar::sample_split_rule(s, X, rows, rng);
  if (!rule) return false;  // failed split attempt: reject the whole tree
  tree.grow(node_id, rule->pred, rule->cut);
  std::vector<int> left_rows, right_rows;
  for (int r : rows) {
    (X(r, rule->pred) <= rule->cut ? left_rows : right_rows).push_back(r);
  }
  return grow_from_prior(tree, tree.node(node_id).left, left_rows, params, s, X, rng) &&
         grow_from_prior(tree, tree.node(node_id).right, right_rows, params, s, X, rng);
}

inline treevar::RegressionTree simulate_tree_from_prior(const treevar::TreePriorParams& params,
                                                        const Eigen::VectorXd& s,
                                                        const Eigen::MatrixXd& X,
                                                        treevar::Rng& rng) {
  std::vector<int> all_rows(X.rows());
  for (int t = 0; t < X.rows(); ++t) all_rows[t] = t;
  for (;;) {
    treevar::RegressionTree tree;
    if (!grow_from_prior(tree, 0, all_rows, params, s, X, rng)) continue;
    for (int id : tree.leaf_ids()) {
      tree.set_mu(id, rng.normal(0.0, std::sqrt(params.tau2)));
    }
    return tree;
  }
}

inline treevar::EquationForest simulate_forest_from_prior(int num_trees,
                                                          const treevar::TreePriorParams& params,
                                                          const Eigen::VectorXd& s,
                                                          const Eigen::MatrixXd& X,
                                                          treevar::Rng& rng) {
  treevar::EquationForest forest;
  forest.init(num_trees, static_cast<int>(X.rows()), 0);
  for (auto& tree : forest.trees) tree = simulate_tree_from_prior(params, s, X, rng);
  forest.refresh_cache(X);
  return forest;
}

}  // namespace testutil
