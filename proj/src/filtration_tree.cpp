#include "optstop/filtration_tree.hpp"

#include "optstop/format.hpp"
#include "optstop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace optstop {

namespace {

std::vector<double> normalized(std::vector<double> probs, NodeId node) {
  for (double p : probs) {
    if (!std::isfinite(p) || p <= 0.0) {
      throw InvalidInput("node " + std::to_string(node) +
                         ": transition probabilities must be strictly positive, got " +
                         format_number(p));
    }
  }
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(sum - 1.0) > kInputProbabilityTol) {
    throw InvalidInput("node " + std::to_string(node) + ": probabilities sum to " +
                       format_number(sum) + " ≠ 1");
  }
  for (double& p : probs) p /= sum;
  return probs;
}

}  // namespace

FiltrationTree FiltrationTree::build(const TreeDescription& description) {
  const auto& spec = description.child_probs;
  if (spec.empty()) throw InvalidInput("tree description has no nodes");

  FiltrationTree tree;
  tree.nodes_.reserve(spec.size());
  tree.nodes_.push_back(Node{});

  // Nodes are numbered breadth-first; node i's children follow all children
  // of nodes < i.
  for (NodeId id = 0; id < tree.nodes_.size(); ++id) {
    if (id >= spec.size()) {
      throw InvalidInput("tree description lists " + std::to_string(spec.size()) +
                         " nodes but the branching implies more");
    }
    auto probs = spec[id].empty() ? std::vector<double>{} : normalized(spec[id], id);
    const int stage = tree.nodes_[id].stage;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      Node child;
      child.stage = stage + 1;
      child.parent = id;
      tree.nodes_[id].children.push_back(tree.nodes_.size());
      tree.nodes_.push_back(std::move(child));
    }
    tree.nodes_[id].child_probs = std::move(probs);
  }
  if (tree.nodes_.size() != spec.size()) {
    throw InvalidInput("tree description lists " + std::to_string(spec.size()) +
                       " nodes but the branching implies " +
                       std::to_string(tree.nodes_.size()));
  }

  tree.depth_ = tree.nodes_.back().stage;
  tree.by_stage_.assign(static_cast<std::size_t>(tree.depth_) + 1, {});
  for (NodeId id = 0; id < tree.nodes_.size(); ++id) {
    const Node& node = tree.nodes_[id];
    tree.by_stage_[static_cast<std::size_t>(node.stage)].push_back(id);
    if (node.children.empty() && node.stage != tree.depth_) {
      throw InvalidInput("leaf node " + std::to_string(id) + " at stage " +
                         std::to_string(node.stage) + " but tree depth is " +
                         std::to_string(tree.depth_));
    }
  }

  tree.leaf_nodes_ = tree.by_stage_.back();
  const std::size_t leaves = tree.leaf_nodes_.size();
  tree.leaf_probs_.assign(leaves, 1.0);
  tree.ancestors_.assign((static_cast<std::size_t>(tree.depth_) + 1) * leaves, 0);

  for (LeafId leaf = 0; leaf < leaves; ++leaf) {
    NodeId id = tree.leaf_nodes_[leaf];
    tree.nodes_[id].leaf_begin = leaf;
    tree.nodes_[id].leaf_end = leaf + 1;
    double prob = 1.0;
    while (true) {
      const Node& node = tree.nodes_[id];
      tree.ancestors_[static_cast<std::size_t>(node.stage) * leaves + leaf] = id;
      if (!node.parent) break;
      const Node& parent = tree.nodes_[*node.parent];
      const auto pos = std::find(parent.children.begin(), parent.children.end(), id) -
                       parent.children.begin();
      prob *= parent.child_probs[static_cast<std::size_t>(pos)];
      id = *node.parent;
    }
    tree.leaf_probs_[leaf] = prob;
  }
  for (int t = tree.depth_ - 1; t >= 0; --t) {
    for (NodeId id : tree.by_stage_[static_cast<std::size_t>(t)]) {
      Node& node = tree.nodes_[id];
      node.leaf_begin = tree.nodes_[node.children.front()].leaf_begin;
      node.leaf_end = tree.nodes_[node.children.back()].leaf_end;
    }
  }

  const double total =
      std::accumulate(tree.leaf_probs_.begin(), tree.leaf_probs_.end(), 0.0);
  if (std::abs(total - 1.0) > kProbabilityTol) {
    throw InvalidInput("leaf probabilities sum to " + format_number(total));
  }
  return tree;
}

FiltrationTree FiltrationTree::uniform(int depth, const std::vector<double>& probs) {
  if (depth < 0) throw InvalidInput("depth must be non-negative");
  if (depth > 0 && probs.empty()) throw InvalidInput("uniform tree needs branching probabilities");
  TreeDescription description;
  std::size_t level = 1;
  for (int t = 0; t < depth; ++t) {
    for (std::size_t i = 0; i < level; ++i) {
      description.child_probs.emplace_back(probs.begin(), probs.end());
    }
    level *= probs.size();
  }
  for (std::size_t i = 0; i < level; ++i) description.child_probs.emplace_back();
  return build(description);
}

void FiltrationTree::check_stage(int t) const {
  if (t < 0 || t > depth_) {
    throw InvalidInput("stage " + std::to_string(t) + " out of range 0.." +
                       std::to_string(depth_));
  }
}

std::span<const NodeId> FiltrationTree::stage_nodes(int t) const {
  check_stage(t);
  return by_stage_[static_cast<std::size_t>(t)];
}

NodeId FiltrationTree::ancestor(LeafId leaf, int t) const {
  check_stage(t);
  return ancestors_[static_cast<std::size_t>(t) * leaf_count() + leaf];
}

std::vector<LeafId> FiltrationTree::atom_of(LeafId leaf, int t) const {
  if (leaf >= leaf_count()) throw InvalidInput("leaf " + std::to_string(leaf) + " out of range");
  const Node& node = nodes_[ancestor(leaf, t)];
  std::vector<LeafId> atom(node.leaf_end - node.leaf_begin);
  std::iota(atom.begin(), atom.end(), node.leaf_begin);
  return atom;
}

std::string FiltrationTree::leaf_label(LeafId leaf) const {
  if (depth_ == 0) return "root";
  std::string label;
  for (int t = 1; t <= depth_; ++t) {
    const NodeId id = ancestor(leaf, t);
    const Node& parent = nodes_[*nodes_[id].parent];
    const auto pos = std::find(parent.children.begin(), parent.children.end(), id) -
                     parent.children.begin();
    if (!label.empty()) label += '.';
    label += std::to_string(pos);
  }
  return label;
}

TreeDescription FiltrationTree::description() const {
  TreeDescription description;
  description.child_probs.reserve(nodes_.size());
  for (const Node& node : nodes_) description.child_probs.push_back(node.child_probs);
  return description;
}

bool is_measurable(const FiltrationTree& tree, const RandomVariable& rv, int t) {
  if (rv.size() != tree.leaf_count()) {
    throw InvalidInput("random variable has " + std::to_string(rv.size()) +
                       " values for " + std::to_string(tree.leaf_count()) + " leaves");
  }
  for (NodeId id : tree.stage_nodes(t)) {
    const Node& node = tree.node(id);
    for (LeafId leaf = node.leaf_begin + 1; leaf < node.leaf_end; ++leaf) {
      if (rv[leaf] != rv[node.leaf_begin]) return false;
    }
  }
  return true;
}

FiltrationTree random_tree(std::uint64_t seed, int max_depth, int max_branch) {
  if (max_depth < 1 || max_branch < 2) {
    throw InvalidInput("random_tree needs max_depth >= 1 and max_branch >= 2");
  }
  constexpr double kFloor = 0.05;
  Rng rng(seed);
  const int depth = rng.uniform_int(1, max_depth);

  TreeDescription description;
  std::size_t level = 1;
  for (int t = 0; t < depth; ++t) {
    std::size_t next = 0;
    for (std::size_t i = 0; i < level; ++i) {
      const int branching = rng.uniform_int(2, max_branch);
      std::vector<double> probs(static_cast<std::size_t>(branching));
      for (double& p : probs) p = rng.uniform(kFloor, 1.0);
      const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
      for (double& p : probs) p /= sum;
      description.child_probs.push_back(std::move(probs));
      next += static_cast<std::size_t>(branching);
    }
    level = next;
  }
  for (std::size_t i = 0; i < level; ++i) description.child_probs.emplace_back();
  return FiltrationTree::build(description);
}

}  // namespace optstop
