#include "optstop/generators.hpp"

namespace optstop {

namespace {

void stop_below(const FiltrationTree& tree, Rng& rng, const StoppingTime& lower,
                double stop_prob, NodeId id, std::vector<int>& stages) {
  const Node& node = tree.node(id);
  const bool reachable = node.stage >= lower[node.leaf_begin];
  if (node.children.empty() || (reachable && rng.coin(stop_prob))) {
    for (LeafId leaf = node.leaf_begin; leaf < node.leaf_end; ++leaf) stages[leaf] = node.stage;
    return;
  }
  for (NodeId child : node.children) stop_below(tree, rng, lower, stop_prob, child, stages);
}

}  // namespace

StoppingTime random_stopping_time(const FiltrationTree& tree, Rng& rng,
                                  const StoppingTime& lower, double stop_prob) {
  std::vector<int> stages(tree.leaf_count(), tree.depth());
  stop_below(tree, rng, lower, stop_prob, 0, stages);
  return StoppingTime::make(tree, std::move(stages));
}

StoppingTime random_stopping_time(const FiltrationTree& tree, Rng& rng, double stop_prob) {
  return random_stopping_time(tree, rng, StoppingTime::constant(tree, 0), stop_prob);
}

AdaptedProcess random_process(const FiltrationTree& tree, Rng& rng, double lo, double hi) {
  AdaptedProcess process{std::vector<double>(tree.node_count())};
  for (double& v : process.node_values) v = rng.uniform(lo, hi);
  return process;
}

RandomVariable random_measurable(const FiltrationTree& tree, Rng& rng, const StoppingTime& tau,
                                 double lo, double hi) {
  return sample(tree, random_process(tree, rng, lo, hi), tau);
}

Event random_event_at(const FiltrationTree& tree, Rng& rng, const StoppingTime& s) {
  std::vector<bool> node_flag(tree.node_count());
  for (NodeId id = 0; id < tree.node_count(); ++id) node_flag[id] = rng.coin();
  Event event(tree.leaf_count());
  for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    event[leaf] = node_flag[tree.ancestor(leaf, s[leaf])];
  }
  return event;
}

BermudanGrid random_grid(const FiltrationTree& tree, Rng& rng, int max_n) {
  const int n = rng.uniform_int(1, max_n);
  std::vector<StoppingTime> thetas{StoppingTime::constant(tree, 0)};
  for (int j = 1; j < n; ++j) {
    thetas.push_back(random_stopping_time(tree, rng, thetas.back(), 0.5));
  }
  thetas.push_back(StoppingTime::constant(tree, tree.depth()));
  return BermudanGrid::make(tree, std::move(thetas));
}

}  // namespace optstop
