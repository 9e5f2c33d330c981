#include "optstop/stopping.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace optstop {

CapExceeded::CapExceeded(std::uint64_t count, std::uint64_t cap)
    : std::runtime_error("strategy enumeration needs " +
                         (count == std::numeric_limits<std::uint64_t>::max()
                              ? std::string("more than 2^64")
                              : std::to_string(count)) +
                         " strategies, cap is " + std::to_string(cap)),
      count_(count),
      cap_(cap) {}

bool is_adapted(std::span<const int> stages, const FiltrationTree& tree) {
  if (stages.size() != tree.leaf_count()) {
    throw InvalidInput("stage map has " + std::to_string(stages.size()) + " entries for " +
                       std::to_string(tree.leaf_count()) + " leaves");
  }
  for (int s : stages) {
    if (s < 0 || s > tree.depth()) {
      throw InvalidInput("stage " + std::to_string(s) + " out of range 0.." +
                         std::to_string(tree.depth()));
    }
  }
  for (int t = 0; t <= tree.depth(); ++t) {
    for (NodeId id : tree.stage_nodes(t)) {
      const Node& node = tree.node(id);
      const bool first = stages[node.leaf_begin] <= t;
      for (LeafId leaf = node.leaf_begin + 1; leaf < node.leaf_end; ++leaf) {
        if ((stages[leaf] <= t) != first) return false;
      }
    }
  }
  return true;
}

StoppingTime StoppingTime::make(const FiltrationTree& tree, std::vector<int> stages) {
  if (!is_adapted(stages, tree)) throw InvalidInput("stage map is not adapted");
  return StoppingTime(std::move(stages));
}

StoppingTime StoppingTime::constant(const FiltrationTree& tree, int t) {
  if (t < 0 || t > tree.depth()) {
    throw InvalidInput("stage " + std::to_string(t) + " out of range");
  }
  return StoppingTime(std::vector<int>(tree.leaf_count(), t));
}

bool pointwise_le(const StoppingTime& a, const StoppingTime& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
  }
  return true;
}

StoppingTime pointwise_min(const StoppingTime& a, const StoppingTime& b) {
  auto stages = a.stages();
  for (std::size_t i = 0; i < stages.size(); ++i) stages[i] = std::min(stages[i], b[i]);
  return StoppingTime(std::move(stages));
}

StoppingTime pointwise_max(const StoppingTime& a, const StoppingTime& b) {
  auto stages = a.stages();
  for (std::size_t i = 0; i < stages.size(); ++i) stages[i] = std::max(stages[i], b[i]);
  return StoppingTime(std::move(stages));
}

bool event_in_sigma_at(const FiltrationTree& tree, const Event& event,
                       const StoppingTime& theta) {
  if (event.size() != tree.leaf_count()) throw InvalidInput("event size mismatch");
  for (int t = 0; t <= tree.depth(); ++t) {
    for (NodeId id : tree.stage_nodes(t)) {
      const Node& node = tree.node(id);
      bool any = false;
      bool all = true;
      for (LeafId leaf = node.leaf_begin; leaf < node.leaf_end; ++leaf) {
        const bool in = theta[leaf] == t && event[leaf];
        any = any || in;
        all = all && in;
      }
      if (any && !all) return false;
    }
  }
  return true;
}

bool is_measurable_at(const FiltrationTree& tree, const RandomVariable& rv,
                      const StoppingTime& tau) {
  if (rv.size() != tree.leaf_count()) throw InvalidInput("random variable size mismatch");
  for (int t = 0; t <= tree.depth(); ++t) {
    for (NodeId id : tree.stage_nodes(t)) {
      const Node& node = tree.node(id);
      if (tau[node.leaf_begin] != t) continue;
      for (LeafId leaf = node.leaf_begin + 1; leaf < node.leaf_end; ++leaf) {
        if (rv[leaf] != rv[node.leaf_begin]) return false;
      }
    }
  }
  return true;
}

BermudanGrid BermudanGrid::make(const FiltrationTree& tree, std::vector<StoppingTime> thetas) {
  if (thetas.empty()) throw InvalidInput("grid needs at least one stopping time");
  for (const auto& theta : thetas) {
    if (theta.size() != tree.leaf_count()) throw InvalidInput("grid time size mismatch");
  }
  if (thetas.front() != StoppingTime::constant(tree, 0)) {
    throw InvalidInput("grid must start at theta_0 = 0");
  }
  if (thetas.back() != StoppingTime::constant(tree, tree.depth())) {
    throw InvalidInput("grid must end at theta_n = " + std::to_string(tree.depth()));
  }
  for (std::size_t k = 0; k + 1 < thetas.size(); ++k) {
    if (!pointwise_le(thetas[k], thetas[k + 1])) {
      throw InvalidInput("grid is not non-decreasing at index " + std::to_string(k));
    }
  }
  return BermudanGrid(std::move(thetas));
}

BermudanGrid BermudanGrid::deterministic(const FiltrationTree& tree,
                                         const std::vector<int>& stages) {
  std::vector<StoppingTime> thetas;
  thetas.reserve(stages.size());
  for (int s : stages) thetas.push_back(StoppingTime::constant(tree, s));
  return make(tree, std::move(thetas));
}

ThetaStrategy ThetaStrategy::from_indices(const FiltrationTree& tree, const BermudanGrid& grid,
                                          std::vector<int> indices) {
  if (indices.size() != tree.leaf_count()) throw InvalidInput("index map size mismatch");
  std::vector<int> stages(indices.size());
  for (LeafId leaf = 0; leaf < indices.size(); ++leaf) {
    const int k = indices[leaf];
    if (k < 0 || k > grid.last_index()) {
      throw InvalidInput("grid index " + std::to_string(k) + " out of range");
    }
    stages[leaf] = grid.theta(k)[leaf];
  }
  auto time = StoppingTime::make(tree, std::move(stages));
  return ThetaStrategy(std::move(indices), std::move(time));
}

namespace {

// Lowest index in the canonical partition: θ_0 unconditionally, then θ_j only
// where θ_j < N, with the residual landing on n.
int canonical_index(const BermudanGrid& grid, LeafId leaf, int stage, int horizon) {
  if (grid.theta(0)[leaf] == stage) return 0;
  for (int j = 1; j < grid.last_index(); ++j) {
    const int s = grid.theta(j)[leaf];
    if (s == stage && s < horizon) return j;
  }
  return grid.last_index();
}

}  // namespace

ThetaStrategy ThetaStrategy::from_stages(const FiltrationTree& tree, const BermudanGrid& grid,
                                         std::vector<int> stages) {
  auto time = StoppingTime::make(tree, std::move(stages));
  std::vector<int> indices(tree.leaf_count());
  for (LeafId leaf = 0; leaf < indices.size(); ++leaf) {
    const int k = canonical_index(grid, leaf, time[leaf], tree.depth());
    if (grid.theta(k)[leaf] != time[leaf]) {
      throw InvalidInput("stage " + std::to_string(time[leaf]) + " at leaf " +
                         std::to_string(leaf) + " is not a grid time");
    }
    indices[leaf] = k;
  }
  return ThetaStrategy(std::move(indices), std::move(time));
}

ThetaStrategy ThetaStrategy::grid_time(const BermudanGrid& grid, int k) {
  const auto& theta = grid.theta(k);
  return ThetaStrategy(std::vector<int>(theta.size(), k), theta);
}

std::vector<Event> canonical_partition(const FiltrationTree& tree, const BermudanGrid& grid,
                                       const ThetaStrategy& tau) {
  const int n = grid.last_index();
  std::vector<Event> sets(static_cast<std::size_t>(n) + 1, Event(tree.leaf_count(), false));
  for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    const int k = canonical_index(grid, leaf, tau[leaf], tree.depth());
    if (grid.theta(k)[leaf] != tau[leaf]) {
      throw InvalidInput("strategy leaves the grid at leaf " + std::to_string(leaf));
    }
    sets[static_cast<std::size_t>(k)][leaf] = true;
  }
  for (int k = 0; k <= n; ++k) {
    if (!event_in_sigma_at(tree, sets[static_cast<std::size_t>(k)], grid.theta(k))) {
      throw InvalidInput("canonical set A_" + std::to_string(k) +
                         " is not measurable at theta_" + std::to_string(k));
    }
  }
  return sets;
}

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return b > kSaturated - a ? kSaturated : a + b;
}

// A stage-t node may host a stop iff t ≥ lower and t is a grid time on its
// atom. Both events are F_t-measurable, so the first leaf decides.
bool may_stop(const FiltrationTree& tree, const BermudanGrid& grid, const StoppingTime& lower,
              const Node& node) {
  const LeafId leaf = node.leaf_begin;
  if (node.stage < lower[leaf]) return false;
  if (node.stage == tree.depth()) return true;
  for (const auto& theta : grid.thetas()) {
    if (theta[leaf] == node.stage) return true;
  }
  return false;
}

std::uint64_t count_subtree(const FiltrationTree& tree, const BermudanGrid& grid,
                            const StoppingTime& lower, NodeId id) {
  const Node& node = tree.node(id);
  if (node.children.empty()) return 1;
  std::uint64_t product = 1;
  for (NodeId child : node.children) {
    product = saturating_mul(product, count_subtree(tree, grid, lower, child));
  }
  return may_stop(tree, grid, lower, node) ? saturating_add(product, 1) : product;
}

using PartialMaps = std::vector<std::vector<int>>;

PartialMaps enumerate_subtree(const FiltrationTree& tree, const BermudanGrid& grid,
                              const StoppingTime& lower, NodeId id) {
  const Node& node = tree.node(id);
  const std::size_t width = node.leaf_end - node.leaf_begin;
  PartialMaps maps;
  if (node.children.empty()) {
    maps.emplace_back(1, node.stage);
    return maps;
  }
  if (may_stop(tree, grid, lower, node)) maps.emplace_back(width, node.stage);

  PartialMaps product{{}};
  for (NodeId child : node.children) {
    const PartialMaps child_maps = enumerate_subtree(tree, grid, lower, child);
    PartialMaps next;
    next.reserve(product.size() * child_maps.size());
    for (const auto& prefix : product) {
      for (const auto& suffix : child_maps) {
        auto joined = prefix;
        joined.insert(joined.end(), suffix.begin(), suffix.end());
        next.push_back(std::move(joined));
      }
    }
    product = std::move(next);
  }
  maps.insert(maps.end(), std::make_move_iterator(product.begin()),
              std::make_move_iterator(product.end()));
  return maps;
}

}  // namespace

std::uint64_t count_from(const FiltrationTree& tree, const BermudanGrid& grid,
                         const StoppingTime& lower) {
  return count_subtree(tree, grid, lower, 0);
}

std::vector<ThetaStrategy> enumerate_from(const FiltrationTree& tree, const BermudanGrid& grid,
                                          const StoppingTime& lower, std::uint64_t cap) {
  const std::uint64_t count = count_from(tree, grid, lower);
  if (count > cap) throw CapExceeded(count, cap);
  PartialMaps maps = enumerate_subtree(tree, grid, lower, 0);
  std::vector<ThetaStrategy> strategies;
  strategies.reserve(maps.size());
  for (auto& stages : maps) {
    strategies.push_back(ThetaStrategy::from_stages(tree, grid, std::move(stages)));
  }
  return strategies;
}

std::vector<ThetaStrategy> enumerate_theta_from(const FiltrationTree& tree,
                                                const BermudanGrid& grid, int k,
                                                std::uint64_t cap) {
  return enumerate_from(tree, grid, grid.theta(k), cap);
}

ThetaStrategy concatenate(const FiltrationTree& tree, const BermudanGrid& grid,
                          const ThetaStrategy& tau, const ThetaStrategy& other,
                          const Event& event) {
  if (event.size() != tree.leaf_count()) throw InvalidInput("event size mismatch");
  if (!event_in_sigma_at(tree, event, pointwise_min(tau.time(), other.time()))) {
    throw InvalidInput("concatenation event is not measurable at the minimum of the strategies");
  }
  std::vector<int> indices(tree.leaf_count());
  for (LeafId leaf = 0; leaf < indices.size(); ++leaf) {
    indices[leaf] = event[leaf] ? tau.indices()[leaf] : other.indices()[leaf];
  }
  return ThetaStrategy::from_indices(tree, grid, std::move(indices));
}

StrategyPair min_max(const FiltrationTree& tree, const BermudanGrid& grid,
                     const ThetaStrategy& tau, const ThetaStrategy& other) {
  return {ThetaStrategy::from_stages(tree, grid, pointwise_min(tau.time(), other.time()).stages()),
          ThetaStrategy::from_stages(tree, grid, pointwise_max(tau.time(), other.time()).stages())};
}

AdaptedProcess AdaptedProcess::from_stage_table(const FiltrationTree& tree,
                                                const std::vector<std::vector<double>>& table) {
  if (table.size() != static_cast<std::size_t>(tree.depth()) + 1) {
    throw InvalidInput("process table needs one row per stage 0.." + std::to_string(tree.depth()));
  }
  AdaptedProcess process{std::vector<double>(tree.node_count(), 0.0)};
  for (int t = 0; t <= tree.depth(); ++t) {
    const RandomVariable row{table[static_cast<std::size_t>(t)]};
    if (!is_measurable(tree, row, t)) {
      throw InvalidInput("process is not adapted: stage " + std::to_string(t) +
                         " values vary within an atom");
    }
    for (NodeId id : tree.stage_nodes(t)) process.node_values[id] = row[tree.node(id).leaf_begin];
  }
  return process;
}

RandomVariable sample(const FiltrationTree& tree, const AdaptedProcess& process,
                      const StoppingTime& tau) {
  if (process.node_values.size() != tree.node_count()) {
    throw InvalidInput("process has " + std::to_string(process.node_values.size()) +
                       " node values for " + std::to_string(tree.node_count()) + " nodes");
  }
  RandomVariable out{std::vector<double>(tree.leaf_count())};
  for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    out[leaf] = process.node_values[tree.ancestor(leaf, tau[leaf])];
  }
  return out;
}

}  // namespace optstop
