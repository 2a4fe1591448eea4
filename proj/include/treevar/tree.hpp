#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treevar/rng.hpp"

namespace treevar {

// Node-depth split prior gamma*(1+d)^-beta and the leaf-mean variance
// tau2 = sigma_mu^2 / M.
struct TreePriorParams {
  double gamma = 0.95;
  double beta = 0.2;
  double tau2 = 1.0;
};

double split_prob_at_depth(int depth, const TreePriorParams& params);

struct TreeNode {
  bool leaf = true;
  int pred = -1;     // internal: predictor index
  double cut = 0.0;  // internal: rows with x[pred] <= cut go left
  int left = -1;
  int right = -1;
  double mu = 0.0;   // leaf value
  int depth = 0;
};

// Proper binary decision tree over the lag design matrix. Stored as a node
// arena with root at index 0; pruning compacts ids, so callers re-derive node
// lists after structural edits.
class RegressionTree {
 public:
  RegressionTree();

  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int id) const { return nodes_[id]; }
  int num_leaves() const;
  int num_internal() const { return (size() - 1) / 2; }
  int max_depth() const;

  std::vector<int> leaf_ids() const;       // depth-first order
  std::vector<int> internal_ids() const;
  std::vector<int> prunable_ids() const;   // internal nodes with two leaf children

  // Leaf node id for each row; ties x == cut route left.
  int route_row(const Eigen::MatrixXd& X, int row) const;
  std::vector<int> assign_leaves(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const;
  double evaluate_point(const Eigen::VectorXd& x) const;

  // Row indices reaching each node (outer index = node id).
  std::vector<std::vector<int>> route_all(const Eigen::MatrixXd& X) const;

  void grow(int leaf_id, int pred, double cut);
  void prune(int internal_id);
  void set_rule(int internal_id, int pred, double cut);
  void set_mu(int leaf_id, double value);

  bool structurally_valid() const;

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;
  void compact();
};

struct SplitRule {
  int pred = -1;
  double cut = 0.0;
  int n_valid_cuts = 0;
};

// Distinct observed values of predictor q over the rows, excluding the
// maximum: exactly the cut values that leave both children nonempty under
// ties-left routing.
std::vector<double> valid_cut_values(const Eigen::MatrixXd& X, const std::vector<int>& rows, int pred);

// Predictor ~ Categorical(s), cut uniform over its valid values at the node.
// Empty result means no valid split for the drawn predictor; the caller
// treats the proposal as rejected.
std::optional<SplitRule> sample_split_rule(const Eigen::VectorXd& s,
                                           const Eigen::MatrixXd& X,
                                           const std::vector<int>& rows, Rng& rng);

// Log prior of the tree: depth terms for splits and non-splits, split-variable
// mass s_q and the uniform cut mass at each internal node given its routed
// rows. -inf when some internal node's rule cannot arise from its rows, which
// is what rejects proposals that strand a descendant without data.
double log_tree_structure_prior(const RegressionTree& tree, const TreePriorParams& params,
                                const Eigen::VectorXd& s, const Eigen::MatrixXd& X);

enum class MoveTag { Grow, Prune, Change, None };

struct MoveProbs {
  double grow = 0.4;
  double prune = 0.4;
  double change = 0.2;
};

struct MoveProposal {
  RegressionTree tree;
  double log_proposal_ratio = 0.0;  // log q(T|T*) - log q(T*|T)
  MoveTag tag = MoveTag::None;
  bool valid = false;
};

MoveProposal propose_move(const RegressionTree& tree, const Eigen::VectorXd& s,
                          const Eigen::MatrixXd& X, const MoveProbs& probs, Rng& rng);

namespace detail {
// Exposed for the detailed-balance bookkeeping tests.
double log_grow_ratio(const RegressionTree& before, const RegressionTree& after,
                      int n_leaves_before, double s_q, int n_valid_cuts, const MoveProbs& probs);
double log_prune_ratio(const RegressionTree& before, const RegressionTree& after,
                       double s_q, int n_valid_cuts, const MoveProbs& probs);
}  // namespace detail

}  // namespace treevar
