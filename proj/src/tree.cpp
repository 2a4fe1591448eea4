#include "treevar/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace treevar {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double split_prob_at_depth(int depth, const TreePriorParams& params) {
  return params.gamma * std::pow(1.0 + depth, -params.beta);
}

RegressionTree::RegressionTree() { nodes_.push_back(TreeNode{}); }

int RegressionTree::num_leaves() const { return (size() + 1) / 2; }

int RegressionTree::max_depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::vector<int> RegressionTree::leaf_ids() const {
  std::vector<int> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (nodes_[id].leaf) {
      out.push_back(id);
    } else {
      stack.push_back(nodes_[id].right);
      stack.push_back(nodes_[id].left);
    }
  }
  return out;
}

std::vector<int> RegressionTree::internal_ids() const {
  std::vector<int> out;
  for (int id = 0; id < size(); ++id) {
    if (!nodes_[id].leaf) out.push_back(id);
  }
  return out;
}

std::vector<int> RegressionTree::prunable_ids() const {
  std::vector<int> out;
  for (int id = 0; id < size(); ++id) {
    const auto& n = nodes_[id];
    if (!n.leaf && nodes_[n.left].leaf && nodes_[n.right].leaf) out.push_back(id);
  }
  return out;
}

int RegressionTree::route_row(const Eigen::MatrixXd& X, int row) const {
  int id = 0;
  while (!nodes_[id].leaf) {
    id = X(row, nodes_[id].pred) <= nodes_[id].cut ? nodes_[id].left : nodes_[id].right;
  }
  return id;
}

std::vector<int> RegressionTree::assign_leaves(const Eigen::MatrixXd& X) const {
  std::vector<int> out(X.rows());
  for (int t = 0; t < X.rows(); ++t) out[t] = route_row(X, t);
  return out;
}

Eigen::VectorXd RegressionTree::evaluate(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (int t = 0; t < X.rows(); ++t) out[t] = nodes_[route_row(X, t)].mu;
  return out;
}

double RegressionTree::evaluate_point(const Eigen::VectorXd& x) const {
  int id = 0;
  while (!nodes_[id].leaf) {
    id = x[nodes_[id].pred] <= nodes_[id].cut ? nodes_[id].left : nodes_[id].right;
  }
  return nodes_[id].mu;
}

std::vector<std::vector<int>> RegressionTree::route_all(const Eigen::MatrixXd& X) const {
  std::vector<std::vector<int>> rows(size());
  for (int t = 0; t < X.rows(); ++t) {
    int id = 0;
    rows[0].push_back(t);
    while (!nodes_[id].leaf) {
      id = X(t, nodes_[id].pred) <= nodes_[id].cut ? nodes_[id].left : nodes_[id].right;
      rows[id].push_back(t);
    }
  }
  return rows;
}

void RegressionTree::grow(int leaf_id, int pred, double cut) {
  if (!nodes_[leaf_id].leaf) throw std::logic_error("grow: node is not a leaf");
  TreeNode left, right;
  left.depth = right.depth = nodes_[leaf_id].depth + 1;
  nodes_[leaf_id].leaf = false;
  nodes_[leaf_id].pred = pred;
  nodes_[leaf_id].cut = cut;
  nodes_[leaf_id].mu = 0.0;
  nodes_[leaf_id].left = size();
  nodes_.push_back(left);
  nodes_[leaf_id].right = size();
  nodes_.push_back(right);
}

void RegressionTree::prune(int internal_id) {
  auto& n = nodes_[internal_id];
  if (n.leaf || !nodes_[n.left].leaf || !nodes_[n.right].leaf) {
    throw std::logic_error("prune: node does not have two leaf children");
  }
  n.leaf = true;
  n.pred = -1;
  n.cut = 0.0;
  n.mu = 0.0;
  n.left = n.right = -1;
  compact();
}

void RegressionTree::set_rule(int internal_id, int pred, double cut) {
  if (nodes_[internal_id].leaf) throw std::logic_error("set_rule: node is a leaf");
  nodes_[internal_id].pred = pred;
  nodes_[internal_id].cut = cut;
}

void RegressionTree::set_mu(int leaf_id, double value) {
  if (!nodes_[leaf_id].leaf) throw std::logic_error("set_mu: node is not a leaf");
  nodes_[leaf_id].mu = value;
}

void RegressionTree::compact() {
  // Rebuild the arena in depth-first order, dropping unreachable nodes.
  std::vector<TreeNode> fresh;
  fresh.reserve(nodes_.size());
  struct Item {
    int old_id;
    int parent_new;
    bool is_left;
  };
  std::vector<Item> stack{{0, -1, false}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const int new_id = static_cast<int>(fresh.size());
    fresh.push_back(nodes_[it.old_id]);
    if (it.parent_new >= 0) {
      (it.is_left ? fresh[it.parent_new].left : fresh[it.parent_new].right) = new_id;
    }
    if (!fresh[new_id].leaf) {
      stack.push_back({nodes_[it.old_id].right, new_id, false});
      stack.push_back({nodes_[it.old_id].left, new_id, true});
    }
  }
  nodes_ = std::move(fresh);
}

bool RegressionTree::structurally_valid() const {
  int leaves = 0, internal = 0;
  for (int id = 0; id < size(); ++id) {
    const auto& n = nodes_[id];
    if (n.leaf) {
      ++leaves;
      if (n.left != -1 || n.right != -1) return false;
    } else {
      ++internal;
      if (n.left < 0 || n.right < 0 || n.left >= size() || n.right >= size()) return false;
      if (nodes_[n.left].depth != n.depth + 1 || nodes_[n.right].depth != n.depth + 1) return false;
      if (n.pred < 0) return false;
    }
  }
  return leaves == internal + 1 && nodes_[0].depth == 0;
}

nlohmann::json RegressionTree::to_json() const {
  // Recursive nested record, leaf-values inline.
  std::function<nlohmann::json(int)> rec = [&](int id) -> nlohmann::json {
    const auto& n = nodes_[id];
    if (n.leaf) return {{"type", "leaf"}, {"mu", n.mu}};
    return {{"type", "split"},
            {"pred", n.pred},
            {"cut", n.cut},
            {"left", rec(n.left)},
            {"right", rec(n.right)}};
  };
  return rec(0);
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  RegressionTree t;
  std::function<void(const nlohmann::json&, int)> rec = [&](const nlohmann::json& node, int id) {
    const std::string type = node.at("type").get<std::string>();
    if (type == "leaf") {
      t.set_mu(id, node.at("mu").get<double>());
    } else if (type == "split") {
      t.grow(id, node.at("pred").get<int>(), node.at("cut").get<double>());
      rec(node.at("left"), t.node(id).left);
      rec(node.at("right"), t.node(id).right);
    } else {
      throw std::runtime_error("tree json: unknown node type " + type);
    }
  };
  rec(j, 0);
  return t;
}

std::vector<double> valid_cut_values(const Eigen::MatrixXd& X, const std::vector<int>& rows,
                                     int pred) {
  std::vector<double> vals;
  vals.reserve(rows.size());
  for (int r : rows) vals.push_back(X(r, pred));
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  if (!vals.empty()) vals.pop_back();  // cutting at the max empties the right child
  return vals;
}

std::optional<SplitRule> sample_split_rule(const Eigen::VectorXd& s, const Eigen::MatrixXd& X,
                                           const std::vector<int>& rows, Rng& rng) {
  if (rows.empty()) throw std::invalid_argument("sample_split_rule: empty node");
  const int q = rng.categorical(s);
  auto cuts = valid_cut_values(X, rows, q);
  if (cuts.empty()) return std::nullopt;
  const double cut = cuts[rng.uniform_int(static_cast<int>(cuts.size()))];
  return SplitRule{q, cut, static_cast<int>(cuts.size())};
}

double log_tree_structure_prior(const RegressionTree& tree, const TreePriorParams& params,
                                const Eigen::VectorXd& s, const Eigen::MatrixXd& X) {
  // Zero mass for trees the generative process cannot produce: a node with no
  // rows, or an internal rule that is not an admissible cut for its rows.
  // This is what rejects proposals that strand a descendant without data.
  const auto rows = tree.route_all(X);
  double lp = 0.0;
  for (int id = 0; id < tree.size(); ++id) {
    const auto& n = tree.node(id);
    const double ps = split_prob_at_depth(n.depth, params);
    if (rows[id].empty()) return kNegInf;
    if (n.leaf) {
      lp += std::log1p(-ps);
      continue;
    }
    const auto cuts = valid_cut_values(X, rows[id], n.pred);
    const bool cut_ok = std::binary_search(cuts.begin(), cuts.end(), n.cut);
    if (!cut_ok) return kNegInf;
    lp += std::log(ps) + std::log(s[n.pred]) - std::log(static_cast<double>(cuts.size()));
  }
  return lp;
}

namespace detail {

double log_grow_ratio(const RegressionTree& before, const RegressionTree& after,
                      int n_leaves_before, double s_q, int n_valid_cuts,
                      const MoveProbs& probs) {
  const int n_prunable_after = static_cast<int>(after.prunable_ids().size());
  (void)before;
  const double log_forward = std::log(probs.grow) - std::log(static_cast<double>(n_leaves_before)) +
                             std::log(s_q) - std::log(static_cast<double>(n_valid_cuts));
  const double log_backward = std::log(probs.prune) - std::log(static_cast<double>(n_prunable_after));
  return log_backward - log_forward;
}

double log_prune_ratio(const RegressionTree& before, const RegressionTree& after,
                       double s_q, int n_valid_cuts, const MoveProbs& probs) {
  const int n_prunable_before = static_cast<int>(before.prunable_ids().size());
  const int n_leaves_after = after.num_leaves();
  const double log_forward = std::log(probs.prune) - std::log(static_cast<double>(n_prunable_before));
  const double log_backward = std::log(probs.grow) - std::log(static_cast<double>(n_leaves_after)) +
                              std::log(s_q) - std::log(static_cast<double>(n_valid_cuts));
  return log_backward - log_forward;
}

}  // namespace detail

MoveProposal propose_move(const RegressionTree& tree, const Eigen::VectorXd& s,
                          const Eigen::MatrixXd& X, const MoveProbs& probs, Rng& rng) {
  MoveProposal out;
  Eigen::Vector3d w(probs.grow, probs.prune, probs.change);
  const int move = rng.categorical(w);
  const auto rows = tree.route_all(X);

  if (move == 0) {
    const auto leaves = tree.leaf_ids();
    const int leaf = leaves[rng.uniform_int(static_cast<int>(leaves.size()))];
    if (rows[leaf].empty()) return out;
    const auto rule = sample_split_rule(s, X, rows[leaf], rng);
    if (!rule) return out;
    out.tree = tree;
    out.tree.grow(leaf, rule->pred, rule->cut);
    out.tag = MoveTag::Grow;
    out.log_proposal_ratio = detail::log_grow_ratio(
        tree, out.tree, static_cast<int>(leaves.size()), s[rule->pred], rule->n_valid_cuts, probs);
    out.valid = true;
    return out;
  }

  if (move == 1) {
    const auto prunable = tree.prunable_ids();
    if (prunable.empty()) return out;
    const int target = prunable[rng.uniform_int(static_cast<int>(prunable.size()))];
    const int pred = tree.node(target).pred;
    const auto cuts = valid_cut_values(X, rows[target], pred);
    out.tree = tree;
    out.tree.prune(target);
    out.tag = MoveTag::Prune;
    out.log_proposal_ratio =
        detail::log_prune_ratio(tree, out.tree, s[pred], static_cast<int>(cuts.size()), probs);
    out.valid = true;
    return out;
  }

  const auto internals = tree.internal_ids();
  if (internals.empty()) return out;
  const int target = internals[rng.uniform_int(static_cast<int>(internals.size()))];
  if (rows[target].empty()) return out;
  const auto rule = sample_split_rule(s, X, rows[target], rng);
  if (!rule) return out;
  const int old_pred = tree.node(target).pred;
  const auto old_cuts = valid_cut_values(X, rows[target], old_pred);
  out.tree = tree;
  out.tree.set_rule(target, rule->pred, rule->cut);
  out.tag = MoveTag::Change;
  // Node choice cancels; only the rule densities differ.
  out.log_proposal_ratio = std::log(s[old_pred]) - std::log(static_cast<double>(old_cuts.size())) -
                           std::log(s[rule->pred]) + std::log(static_cast<double>(rule->n_valid_cuts));
  out.valid = true;
  return out;
}

}  // namespace treevar
