#include "optstop/snell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optstop {

ValueFamily payoff_family(const FiltrationTree& tree, const AdaptedProcess& process,
                          const BermudanGrid& grid) {
  return ValueFamily::from_process(tree, grid, process);
}

namespace {

void check_lengths(const BermudanGrid& grid, const ValueFamily& family, const char* what) {
  if (family.last_index() != grid.last_index()) {
    throw InvalidInput(std::string(what) + " has " + std::to_string(family.last_index() + 1) +
                       " grid entries, grid has " + std::to_string(grid.last_index() + 1));
  }
}

RandomVariable pointwise_max(const RandomVariable& a, const RandomVariable& b) {
  RandomVariable out = a;
  for (LeafId leaf = 0; leaf < out.size(); ++leaf) out[leaf] = std::max(a[leaf], b[leaf]);
  return out;
}

}  // namespace

ValueFamily snell_backward(const FiltrationTree& tree, const BermudanGrid& grid,
                           const ValueFamily& payoff, const Evaluation& op,
                           std::vector<std::string>* warnings) {
  check_lengths(grid, payoff, "pay-off family");
  if (!op.claims().monotone && warnings) {
    warnings->push_back(op.name() +
                        " is not declared monotone; the backward family need not be the Snell "
                        "envelope");
  }
  const int n = grid.last_index();
  std::vector<RandomVariable> u(static_cast<std::size_t>(n) + 1);
  u[static_cast<std::size_t>(n)] = payoff[n];
  for (int k = n - 1; k >= 0; --k) {
    const auto continuation =
        op.evaluate(tree, grid.theta(k), grid.theta(k + 1), u[static_cast<std::size_t>(k) + 1]);
    u[static_cast<std::size_t>(k)] = pointwise_max(payoff[k], continuation);
  }
  return ValueFamily(std::move(u));
}

RandomVariable strict_value(const FiltrationTree& tree, const BermudanGrid& grid, int k,
                            const ValueFamily& value, const Evaluation& op) {
  if (k < 0 || k >= grid.last_index()) {
    throw InvalidInput("strict value needs 0 <= k < n, got k = " + std::to_string(k));
  }
  return op.evaluate(tree, grid.theta(k), grid.theta(k + 1), value[k + 1]);
}

double dpp_residual(const FiltrationTree& tree, const BermudanGrid& grid,
                    const ValueFamily& payoff, const ValueFamily& family, const Evaluation& op) {
  check_lengths(grid, payoff, "pay-off family");
  check_lengths(grid, family, "value family");
  const int n = grid.last_index();
  double residual = 0.0;
  for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    residual = std::max(residual, std::abs(family[n][leaf] - payoff[n][leaf]));
  }
  for (int k = 0; k < n; ++k) {
    const auto target =
        pointwise_max(payoff[k], op.evaluate(tree, grid.theta(k), grid.theta(k + 1), family[k + 1]));
    for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      residual = std::max(residual, std::abs(family[k][leaf] - target[leaf]));
    }
  }
  return residual;
}

HittingTime hitting_time(const FiltrationTree& tree, const BermudanGrid& grid, int k,
                         const ValueFamily& value, const ValueFamily& payoff, double tol) {
  check_lengths(grid, value, "value family");
  check_lengths(grid, payoff, "pay-off family");
  if (k < 0 || k > grid.last_index()) throw InvalidInput("grid index out of range");
  std::vector<int> indices(tree.leaf_count(), -1);
  double closest_miss = std::numeric_limits<double>::infinity();
  for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    for (int l = k; l <= grid.last_index(); ++l) {
      const double gap = std::abs(value[l][leaf] - payoff[l][leaf]);
      if (gap <= tol) {
        indices[leaf] = l;
        break;
      }
      closest_miss = std::min(closest_miss, gap);
    }
    if (indices[leaf] < 0) {
      throw InvalidInput("value family never meets the pay-off at leaf " + std::to_string(leaf));
    }
  }
  auto strategy = ThetaStrategy::from_indices(tree, grid, std::move(indices));
  return {std::move(strategy), closest_miss, closest_miss <= 10.0 * tol};
}

}  // namespace optstop
