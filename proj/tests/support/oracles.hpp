#pragma once

// Reference computations that share no code path with the engine's sweeps or
// enumeration. They are slow and only meant for small trees.

#include "optstop/evaluations.hpp"
#include "optstop/filtration_tree.hpp"
#include "optstop/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <vector>

namespace oracle {

using optstop::BermudanGrid;
using optstop::FiltrationTree;
using optstop::LeafId;
using optstop::RandomVariable;

/// Leaves sharing ω's stage-t atom, found by walking parent links.
inline std::vector<LeafId> atom(const FiltrationTree& tree, LeafId leaf, int t) {
  auto up = [&](LeafId l) {
    auto id = tree.leaf_node(l);
    for (int s = tree.depth(); s > t; --s) id = *tree.node(id).parent;
    return id;
  };
  const auto target = up(leaf);
  std::vector<LeafId> out;
  for (LeafId l = 0; l < tree.leaf_count(); ++l) {
    if (up(l) == target) out.push_back(l);
  }
  return out;
}

/// Adaptedness straight from the definition: {τ ≤ t} is a union of stage-t atoms.
inline bool adapted(const FiltrationTree& tree, const std::vector<int>& stages) {
  for (int t = 0; t <= tree.depth(); ++t) {
    for (LeafId l = 0; l < tree.leaf_count(); ++l) {
      for (LeafId m : atom(tree, l, t)) {
        if ((stages[l] <= t) != (stages[m] <= t)) return false;
      }
    }
  }
  return true;
}

/// Θ_lower by trying every leaf-to-grid-index map, deduplicated by stage map.
inline std::set<std::vector<int>> strategies(const FiltrationTree& tree, const BermudanGrid& grid,
                                             const std::vector<int>& lower) {
  const auto leaves = tree.leaf_count();
  const int choices = grid.last_index() + 1;
  std::vector<int> index(leaves, 0);
  std::set<std::vector<int>> out;
  while (true) {
    std::vector<int> stages(leaves);
    bool ok = true;
    for (LeafId l = 0; l < leaves; ++l) {
      stages[l] = grid.theta(index[l])[l];
      ok = ok && stages[l] >= lower[l];
    }
    if (ok && adapted(tree, stages)) out.insert(stages);
    std::size_t pos = 0;
    while (pos < leaves && ++index[pos] == choices) index[pos++] = 0;
    if (pos == leaves) break;
  }
  return out;
}

/// E[η | F_S] from leaf probabilities.
inline RandomVariable conditional_mean(const FiltrationTree& tree, const std::vector<int>& s,
                                       const RandomVariable& eta) {
  RandomVariable out{std::vector<double>(tree.leaf_count())};
  for (LeafId l = 0; l < tree.leaf_count(); ++l) {
    double mass = 0.0;
    double total = 0.0;
    for (LeafId m : atom(tree, l, s[l])) {
      mass += tree.leaf_probability(m);
      total += tree.leaf_probability(m) * eta[m];
    }
    out[l] = total / mass;
  }
  return out;
}

/// −γ⁻¹ ln E[exp(−γη) | F_S].
inline RandomVariable entropic(const FiltrationTree& tree, const std::vector<int>& s,
                               const RandomVariable& eta, double gamma) {
  RandomVariable expo{std::vector<double>(tree.leaf_count())};
  for (LeafId l = 0; l < tree.leaf_count(); ++l) expo[l] = std::exp(-gamma * eta[l]);
  auto out = conditional_mean(tree, s, expo);
  for (auto& v : out.values) v = -std::log(v) / gamma;
  return out;
}

/// φ(τ)(ω) from a (stage × leaf) table.
inline RandomVariable sample(const std::vector<std::vector<double>>& table,
                             const std::vector<int>& tau) {
  RandomVariable out{std::vector<double>(tau.size())};
  for (LeafId l = 0; l < tau.size(); ++l) {
    out[l] = table[static_cast<std::size_t>(tau[l])][l];
  }
  return out;
}

/// max over Θ_{θ_k} of E[ξ(τ) | F_{θ_k}], scenario by scenario.
template <class Rho>
RandomVariable value(const FiltrationTree& tree, const BermudanGrid& grid, int k,
                     const std::vector<std::vector<double>>& table, Rho rho) {
  const auto& lower = grid.theta(k).stages();
  RandomVariable best{std::vector<double>(tree.leaf_count(), -INFINITY)};
  for (const auto& tau : strategies(tree, grid, lower)) {
    const auto v = rho(lower, sample(table, tau));
    for (LeafId l = 0; l < tree.leaf_count(); ++l) best[l] = std::max(best[l], v[l]);
  }
  return best;
}

}  // namespace oracle

namespace broken {

/// y = (Σ p_i c_i)², declared with the catalogue's claims. Fails constant
/// preservation (2 ↦ 4) and monotonicity on negative inputs.
inline optstop::Evaluation square_of_mean() {
  return optstop::Evaluation(
      "square_of_mean",
      [](const optstop::NodeContext&, std::span<const double> c, std::span<const double> p,
         double) {
        double mean = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) mean += p[i] * c[i];
        return mean * mean;
      },
      optstop::OperatorClaims{});
}

}  // namespace broken
