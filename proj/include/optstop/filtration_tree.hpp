#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace optstop {

using NodeId = std::size_t;
using LeafId = std::size_t;

/// Thrown for malformed inputs: bad probabilities, non-adapted maps,
/// non-measurable rewards, out-of-range stages.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Tolerance at which input probability vectors are accepted and renormalized.
inline constexpr double kInputProbabilityTol = 1e-9;
/// Tolerance for internal probability identities.
inline constexpr double kProbabilityTol = 1e-12;

/// Per-node child transition probabilities in breadth-first order. An empty
/// list marks a leaf. Node 0 is the root.
struct TreeDescription {
  std::vector<std::vector<double>> child_probs;
};

struct Node {
  int stage = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::vector<double> child_probs;
  // Leaves under this node occupy the contiguous range [leaf_begin, leaf_end).
  LeafId leaf_begin = 0;
  LeafId leaf_end = 0;
};

/// A finite filtered probability space. Stage-t nodes are the atoms of F_t and
/// the stage-N leaves are the scenarios. Immutable after construction.
class FiltrationTree {
public:
  static FiltrationTree build(const TreeDescription& description);
  static FiltrationTree uniform(int depth, const std::vector<double>& probs);

  int depth() const { return depth_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaf_nodes_.size(); }

  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::span<const NodeId> stage_nodes(int t) const;
  NodeId leaf_node(LeafId leaf) const { return leaf_nodes_.at(leaf); }
  double leaf_probability(LeafId leaf) const { return leaf_probs_.at(leaf); }
  std::span<const double> leaf_probabilities() const { return leaf_probs_; }

  /// Stage-t ancestor of a leaf (the node whose atom contains it).
  NodeId ancestor(LeafId leaf, int t) const;
  std::vector<LeafId> atom_of(LeafId leaf, int t) const;

  /// Path label such as "0.1.1" (child indices from the root); "root" for depth 0.
  std::string leaf_label(LeafId leaf) const;

  TreeDescription description() const;

private:
  FiltrationTree() = default;
  void check_stage(int t) const;

  int depth_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::vector<NodeId>> by_stage_;
  std::vector<NodeId> leaf_nodes_;
  std::vector<double> leaf_probs_;
  // ancestors_[t * leaf_count + leaf]
  std::vector<NodeId> ancestors_;
};

/// Leaf-indexed real values.
struct RandomVariable {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](LeafId leaf) const { return values[leaf]; }
  double& operator[](LeafId leaf) { return values[leaf]; }
  bool operator==(const RandomVariable&) const = default;

  static RandomVariable constant(const FiltrationTree& tree, double c) {
    return {std::vector<double>(tree.leaf_count(), c)};
  }
};

/// Exact constancy of `rv` on every stage-t atom.
bool is_measurable(const FiltrationTree& tree, const RandomVariable& rv, int t);

/// Deterministic random tree: depth uniform in [1, max_depth], branching per
/// node uniform in [2, max_branch], probabilities drawn in (0.05, 1) and
/// renormalized per node.
FiltrationTree random_tree(std::uint64_t seed, int max_depth, int max_branch);

}  // namespace optstop
