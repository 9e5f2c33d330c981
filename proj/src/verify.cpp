#include "optstop/verify.hpp"

#include "optstop/format.hpp"
#include "optstop/generators.hpp"
#include "optstop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optstop {

void CheckReport::absorb(const CheckReport& other) {
  worst_residual = std::max(worst_residual, other.worst_residual);
  if (!witness && other.witness) witness = other.witness;
  if (status == Status::kPass || (status == Status::kDegenerate && !other.passed())) {
    status = other.status == Status::kPass ? status : other.status;
  }
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
}

namespace {

// Tracks a residual against a tolerance and keeps the first violation.
class Residual {
public:
  Residual(std::string name, double tol) : tol_(tol) { report_.name = std::move(name); }

  /// True if within tolerance.
  bool record(double gap, const std::function<Witness()>& make_witness) {
    if (gap > report_.worst_residual) report_.worst_residual = gap;
    if (gap > tol_) {
      report_.status = Status::kFail;
      if (!report_.witness) report_.witness = make_witness();
      return false;
    }
    return true;
  }

  double compare(const RandomVariable& lhs, const RandomVariable& rhs, bool one_sided,
                 const std::function<Witness()>& make_witness) {
    double worst = 0.0;
    for (LeafId leaf = 0; leaf < lhs.size(); ++leaf) {
      const double gap = one_sided ? lhs[leaf] - rhs[leaf] : std::abs(lhs[leaf] - rhs[leaf]);
      worst = std::max(worst, gap);
    }
    record(worst, make_witness);
    return worst;
  }

  CheckReport& report() { return report_; }
  CheckReport take() { return std::move(report_); }

private:
  double tol_;
  CheckReport report_;
};

Witness pair_witness(std::string description, const ThetaStrategy& sigma, const ThetaStrategy& tau,
                     const RandomVariable& lhs, const RandomVariable& rhs) {
  Witness w{std::move(description), {}};
  w.add("sigma", sigma.stages());
  w.add("tau", tau.stages());
  w.add("lhs", lhs.values);
  w.add("rhs", rhs.values);
  return w;
}

Witness values_witness(std::string description, int k, const RandomVariable& lhs,
                       const RandomVariable& rhs) {
  Witness w{std::move(description), {}};
  w.add("grid_index", std::vector<double>{static_cast<double>(k)});
  w.add("lhs", lhs.values);
  w.add("rhs", rhs.values);
  return w;
}

RandomVariable pointwise_max(const RandomVariable& a, const RandomVariable& b) {
  RandomVariable out = a;
  for (LeafId leaf = 0; leaf < out.size(); ++leaf) out[leaf] = std::max(a[leaf], b[leaf]);
  return out;
}

// Exhaustive maximization of ρ_{lower,τ}[ξ(τ)] over `strategies`, with the
// attaining strategy folded left by concatenation.
OracleResult maximize(const FiltrationTree& tree, const BermudanGrid& grid,
                      const StoppingTime& lower, const std::vector<ThetaStrategy>& strategies,
                      const ValueFamily& payoff, const Evaluation& op,
                      std::vector<RandomVariable>* values = nullptr) {
  if (strategies.empty()) throw InvalidInput("no strategies to maximize over");
  std::optional<OracleResult> best;
  for (const auto& tau : strategies) {
    auto value = op.evaluate(tree, lower, tau.time(), payoff.at(tau));
    if (!best) {
      best = OracleResult{value, tau, 0};
    } else {
      Event keep(tree.leaf_count());
      for (LeafId leaf = 0; leaf < keep.size(); ++leaf) keep[leaf] = value[leaf] <= best->value[leaf];
      best->attaining = concatenate(tree, grid, best->attaining, tau, keep);
      best->value = pointwise_max(best->value, value);
    }
    if (values) values->push_back(std::move(value));
  }
  best->strategies = strategies.size();
  return std::move(*best);
}

// Strategy stage maps pre-resolved to node ids, for reading sweeps quickly.
std::vector<std::vector<NodeId>> resolve_nodes(const FiltrationTree& tree,
                                               const std::vector<ThetaStrategy>& strategies) {
  std::vector<std::vector<NodeId>> nodes;
  nodes.reserve(strategies.size());
  for (const auto& s : strategies) {
    std::vector<NodeId> row(tree.leaf_count());
    for (LeafId leaf = 0; leaf < row.size(); ++leaf) row[leaf] = tree.ancestor(leaf, s[leaf]);
    nodes.push_back(std::move(row));
  }
  return nodes;
}

ThetaStrategy stopped(const FiltrationTree& tree, const BermudanGrid& grid,
                      const ThetaStrategy& a, const ThetaStrategy& b) {
  return min_max(tree, grid, a, b).min;
}

/// ρ_{σ∧ν,τ∧ν}[φ(τ∧ν)] = φ(σ∧ν) for every σ ≤ τ in Θ_{θ_k}: φ is a
/// martingale on the stochastic interval [θ_k, ν].
CheckReport martingale_on_interval(ProblemContext& context, const ValueFamily& family,
                                   const ThetaStrategy& nu, int k) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& strategies = context.strategies_from(k);
  std::vector<ThetaStrategy> clipped;
  clipped.reserve(strategies.size());
  for (const auto& s : strategies) clipped.push_back(stopped(tree, grid, s, nu));
  const auto nodes = resolve_nodes(tree, clipped);
  std::vector<RandomVariable> values;
  values.reserve(clipped.size());
  for (const auto& s : clipped) values.push_back(family.at(s));

  Residual residual("martingale_on_interval", context.tol());
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    const auto& upper = clipped[i];
    const auto y = context.op().sweep(tree, upper.time(), values[i]);
    for (std::size_t j = 0; j < strategies.size(); ++j) {
      if (!pointwise_le(strategies[j].time(), strategies[i].time())) continue;
      double worst = 0.0;
      for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        worst = std::max(worst, std::abs(y[nodes[j][leaf]] - values[j][leaf]));
      }
      residual.record(worst, [&] {
        auto w = pair_witness("V is not a martingale on [theta_k, nu]", clipped[j], upper,
                              read_at(tree, y, clipped[j].time()), values[j]);
        w.add("nu", nu.stages());
        return w;
      });
    }
  }
  return residual.take();
}

}  // namespace

CheckReport check_interval_martingale(ProblemContext& context, const ValueFamily& family,
                                      const ThetaStrategy& nu, int k) {
  return martingale_on_interval(context, family, nu, k);
}

// ---------------------------------------------------------------------------
// ProblemContext

ProblemContext::ProblemContext(const FiltrationTree& tree, const BermudanGrid& grid,
                               ValueFamily payoff, const Evaluation& op, std::uint64_t cap,
                               double tol)
    : tree_(&tree), grid_(&grid), payoff_(std::move(payoff)), op_(&op), cap_(cap), tol_(tol) {
  if (payoff_.last_index() != grid.last_index()) {
    throw InvalidInput("pay-off family does not match the grid");
  }
  if (!std::isfinite(admissibility_defect(tree, grid, payoff_)) ||
      admissibility_defect(tree, grid, payoff_) != 0.0) {
    throw InvalidInput("pay-off family is not admissible");
  }
}

const std::vector<ThetaStrategy>& ProblemContext::strategies_from(int k) {
  auto it = strategies_.find(k);
  if (it == strategies_.end()) {
    it = strategies_.emplace(k, enumerate_theta_from(*tree_, *grid_, k, cap_)).first;
  }
  return it->second;
}

const ValueFamily& ProblemContext::backward() {
  if (!backward_) backward_ = snell_backward(*tree_, *grid_, payoff_, *op_);
  return *backward_;
}

const OracleResult& ProblemContext::oracle_at(int k) {
  auto it = oracle_at_.find(k);
  if (it == oracle_at_.end()) {
    it = oracle_at_
             .emplace(k, maximize(*tree_, *grid_, grid_->theta(k), strategies_from(k), payoff_, *op_))
             .first;
  }
  return it->second;
}

const ValueFamily& ProblemContext::oracle() {
  if (!oracle_) {
    std::vector<RandomVariable> values;
    for (int k = 0; k <= grid_->last_index(); ++k) values.push_back(oracle_at(k).value);
    oracle_ = ValueFamily(std::move(values));
  }
  return *oracle_;
}

// ---------------------------------------------------------------------------
// Oracle

OracleResult oracle_value(const FiltrationTree& tree, const BermudanGrid& grid, int k,
                          const ValueFamily& payoff, const Evaluation& op, std::uint64_t cap) {
  return maximize(tree, grid, grid.theta(k), enumerate_theta_from(tree, grid, k, cap), payoff, op);
}

OracleResult oracle_value_at(const FiltrationTree& tree, const BermudanGrid& grid,
                             const ThetaStrategy& nu, const ValueFamily& payoff,
                             const Evaluation& op, std::uint64_t cap) {
  return maximize(tree, grid, nu.time(), enumerate_from(tree, grid, nu.time(), cap), payoff, op);
}

RandomVariable oracle_strict_value(ProblemContext& context, int k) {
  const auto& grid = context.grid();
  if (k < 0 || k >= grid.last_index()) throw InvalidInput("strict value needs 0 <= k < n");
  return maximize(context.tree(), grid, grid.theta(k), context.strategies_from(k + 1),
                  context.payoff(), context.op())
      .value;
}

// ---------------------------------------------------------------------------
// Checks

CheckReport check_supermartingale(ProblemContext& context, const ValueFamily& family,
                                  bool martingale, int from) {
  const auto& tree = context.tree();
  const auto& strategies = context.strategies_from(from);
  const auto nodes = resolve_nodes(tree, strategies);
  std::vector<RandomVariable> values;
  values.reserve(strategies.size());
  for (const auto& s : strategies) values.push_back(family.at(s));

  Residual residual(martingale ? "martingale" : "supermartingale", context.tol());
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    const auto& tau = strategies[i];
    const auto y = context.op().sweep(tree, tau.time(), values[i]);
    for (std::size_t j = 0; j < strategies.size(); ++j) {
      const auto& sigma = strategies[j];
      if (!pointwise_le(sigma.time(), tau.time())) continue;
      ++pairs;
      double worst = 0.0;
      LeafId worst_leaf = 0;
      for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        const double lhs = y[nodes[j][leaf]];
        const double gap = martingale ? std::abs(lhs - values[j][leaf]) : lhs - values[j][leaf];
        if (gap > worst) {
          worst = gap;
          worst_leaf = leaf;
        }
      }
      residual.record(worst, [&] {
        auto w = pair_witness(martingale ? "rho_{sigma,tau}[phi(tau)] != phi(sigma)"
                                         : "rho_{sigma,tau}[phi(tau)] > phi(sigma)",
                              sigma, tau, read_at(tree, y, sigma.time()), values[j]);
        w.add("leaf", std::vector<double>{static_cast<double>(worst_leaf)});
        return w;
      });
    }
  }
  residual.report().notes.push_back(std::to_string(pairs) + " ordered pairs over " +
                                    std::to_string(strategies.size()) + " strategies");
  return residual.take();
}

CheckReport check_supermartingale(const FiltrationTree& tree, const BermudanGrid& grid,
                                  const ValueFamily& family, const Evaluation& op,
                                  bool martingale, std::uint64_t cap, double tol) {
  // The payoff slot is unused by the pair check; the family doubles as it.
  ProblemContext context(tree, grid, family, op, cap, tol);
  return check_supermartingale(context, family, martingale);
}

CheckReport check_snell_minimality(ProblemContext& context, int trials, std::uint64_t seed) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& payoff = context.payoff();
  const auto& u = context.backward();

  CheckReport report = check_supermartingale(context, u, false);
  report.name = "minimality";

  Residual dominance("minimality", context.tol());
  for (int k = 0; k <= grid.last_index(); ++k) {
    dominance.compare(payoff[k], u[k], true, [&] {
      return values_witness("U below the pay-off", k, u[k], payoff[k]);
    });
  }
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(trial)));
    AdaptedProcess noise{std::vector<double>(tree.node_count(), 0.0)};
    for (double& v : noise.node_values) v = rng.coin() ? rng.uniform(0.0, 1.0) : 0.0;
    const auto bump = ValueFamily::from_process(tree, grid, noise);
    std::vector<RandomVariable> raised;
    for (int k = 0; k <= grid.last_index(); ++k) {
      RandomVariable v = payoff[k];
      for (LeafId leaf = 0; leaf < v.size(); ++leaf) v[leaf] += bump[k][leaf];
      raised.push_back(std::move(v));
    }
    const auto majorant = snell_backward(tree, grid, ValueFamily(std::move(raised)), context.op());
    for (int k = 0; k <= grid.last_index(); ++k) {
      dominance.compare(u[k], majorant[k], true, [&] {
        auto w = values_witness("majorant below U", k, majorant[k], u[k]);
        w.add("trial", std::vector<double>{static_cast<double>(trial)});
        return w;
      });
    }
  }
  report.absorb(dominance.take());
  report.notes.push_back(std::to_string(trials) + " random majorants");
  return report;
}

CheckReport check_optimality(ProblemContext& context, int k, bool strict_op) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& payoff = context.payoff();
  const auto& op = context.op();
  const auto& theta_k = grid.theta(k);
  const auto& u = context.backward();
  const auto& v = context.oracle();
  const auto nu = hitting_time(tree, grid, k, u, payoff, context.tol());

  Residual residual("optimality", context.tol());
  auto& report = residual.report();
  if (nu.borderline) {
    report.notes.push_back("hitting time at k=" + std::to_string(k) +
                           " decided within 10x tolerance (closest miss " +
                           format_number(nu.closest_miss) + ")");
  }

  // (1) U(θ_k) = V(θ_k)
  residual.compare(u[k], v[k], false, [&] { return values_witness("U != V", k, u[k], v[k]); });
  // (2) ρ_{θ_k,ν_k}[ξ(ν_k)] = V(θ_k)
  const auto xi_nu = payoff.at(nu.strategy);
  const auto attained = op.evaluate(tree, theta_k, nu.strategy.time(), xi_nu);
  residual.compare(attained, v[k], false,
                   [&] { return values_witness("rho[xi(nu_k)] != V", k, attained, v[k]); });
  // (3) criterion i) at ν_k, and V(ν_k) = ξ(ν_k)
  const auto v_nu = v.at(nu.strategy);
  residual.compare(v_nu, xi_nu, false,
                   [&] { return values_witness("V(nu_k) != xi(nu_k)", k, v_nu, xi_nu); });
  const auto rho_v = op.evaluate(tree, theta_k, nu.strategy.time(), v_nu);
  residual.compare(rho_v, attained, false,
                   [&] { return values_witness("condition i) fails at nu_k", k, rho_v, attained); });
  // (4) criterion ii): V(· ∧ ν_k) is a martingale on [θ_k, ν_k]
  report.absorb(martingale_on_interval(context, v, nu.strategy, k));

  // (5) converse over every pointwise-optimal strategy
  std::size_t optimal = 0;
  std::size_t violating = 0;
  for (const auto& candidate : context.strategies_from(k)) {
    const auto xi_c = payoff.at(candidate);
    const auto value = op.evaluate(tree, theta_k, candidate.time(), xi_c);
    double gap = 0.0;
    for (LeafId leaf = 0; leaf < value.size(); ++leaf) {
      gap = std::max(gap, std::abs(value[leaf] - v[k][leaf]));
    }
    if (gap > context.tol()) continue;
    ++optimal;
    auto martingale = martingale_on_interval(context, v, candidate, k);
    const auto rho_vc = op.evaluate(tree, theta_k, candidate.time(), v.at(candidate));
    double cond_i = 0.0;
    for (LeafId leaf = 0; leaf < value.size(); ++leaf) {
      cond_i = std::max(cond_i, std::abs(rho_vc[leaf] - value[leaf]));
    }
    const bool holds = martingale.passed() && cond_i <= context.tol();
    if (holds) continue;
    ++violating;
    if (strict_op) {
      report.absorb(martingale);
      residual.record(cond_i, [&] {
        Witness w{"optimal strategy violates condition i)", {}};
        w.add("tau_star", candidate.stages());
        return w;
      });
    }
  }
  report.notes.push_back("k=" + std::to_string(k) + ": " + std::to_string(optimal) +
                         " optimal strategies, " + std::to_string(violating) +
                         " violate the criterion" +
                         (strict_op ? "" : " (operator not strictly monotone; informational)"));
  return residual.take();
}

CheckReport check_stopped_supermartingale(ProblemContext& context, const ValueFamily& family,
                                          const ThetaStrategy& tau, bool martingale) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& op = context.op();
  Residual residual("stopped_supermartingale", context.tol());

  for (int k = 0; k < grid.last_index(); ++k) {
    const auto lhs = op.evaluate(tree, grid.theta(k), grid.theta(k + 1), family[k + 1]);
    double gap = 0.0;
    for (LeafId leaf = 0; leaf < lhs.size(); ++leaf) {
      gap = std::max(gap, martingale ? std::abs(lhs[leaf] - family[k][leaf])
                                     : lhs[leaf] - family[k][leaf]);
    }
    if (gap > context.tol()) {
      auto& report = residual.report();
      report.status = Status::kHypothesisUnmet;
      report.worst_residual = gap;
      report.witness = values_witness("one-step inequality fails", k, lhs, family[k]);
      report.notes.push_back("hypothesis unmet at k=" + std::to_string(k));
      return residual.take();
    }
  }

  for (int k = 0; k < grid.last_index(); ++k) {
    const auto upper = stopped(tree, grid, ThetaStrategy::grid_time(grid, k + 1), tau);
    const auto lower = stopped(tree, grid, ThetaStrategy::grid_time(grid, k), tau);
    const auto lhs = op.evaluate(tree, grid.theta(k), upper.time(), family.at(upper));
    const auto rhs = family.at(lower);
    residual.compare(lhs, rhs, !martingale, [&] {
      return values_witness("stopped one-step inequality fails", k, lhs, rhs);
    });
  }
  auto full = check_supermartingale(context, family, martingale);
  full.notes.clear();
  residual.report().absorb(full);
  return residual.take();
}

CheckReport check_value_admissibility(ProblemContext& context, int pairs, std::uint64_t seed) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& all = context.strategies_from(0);
  const auto& v = context.oracle();
  Residual residual("value_admissibility", context.tol());
  Rng rng(seed);
  const auto pick = [&] {
    return all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(all.size()) - 1))];
  };

  for (int p = 0; p < pairs; ++p) {
    const auto nu = pick();
    // ν′ agrees with ν on a random event measurable at ν ∧ ν″.
    const auto other = pick();
    const auto event = random_event_at(tree, rng, pointwise_min(nu.time(), other.time()));
    const auto nu2 = concatenate(tree, grid, nu, other, event);

    const auto v_nu = oracle_value_at(tree, grid, nu, context.payoff(), context.op(), context.cap());
    const auto v_nu2 =
        oracle_value_at(tree, grid, nu2, context.payoff(), context.op(), context.cap());
    double gap = 0.0;
    for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      if (nu[leaf] == nu2[leaf]) gap = std::max(gap, std::abs(v_nu.value[leaf] - v_nu2.value[leaf]));
    }
    residual.record(gap, [&] {
      return pair_witness("V(nu) != V(nu') on {nu = nu'}", nu, nu2, v_nu.value, v_nu2.value);
    });

    // V(ν) = Σ V(θ_k) 1_{A_k} over the canonical partition.
    const auto sets = canonical_partition(tree, grid, nu);
    RandomVariable decomposed{std::vector<double>(tree.leaf_count(), 0.0)};
    for (int k = 0; k <= grid.last_index(); ++k) {
      for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        if (sets[static_cast<std::size_t>(k)][leaf]) decomposed[leaf] = v[k][leaf];
      }
    }
    residual.compare(v_nu.value, decomposed, false, [&] {
      return pair_witness("V(nu) != sum V(theta_k) 1_{A_k}", nu, nu, v_nu.value, decomposed);
    });
  }
  return residual.take();
}

CheckReport check_pairwise_max(ProblemContext& context, int k, std::uint64_t pair_cap) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& op = context.op();
  const auto& theta_k = grid.theta(k);
  const auto& strategies = context.strategies_from(k);
  const std::uint64_t pairs = static_cast<std::uint64_t>(strategies.size()) * strategies.size();
  if (pairs > pair_cap) throw CapExceeded(pairs, pair_cap);

  std::vector<RandomVariable> values;
  for (const auto& tau : strategies) {
    values.push_back(op.evaluate(tree, theta_k, tau.time(), context.payoff().at(tau)));
  }
  Residual residual("pairwise_max", context.tol());
  std::size_t mixed = 0;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    for (std::size_t j = 0; j < strategies.size(); ++j) {
      Event keep(tree.leaf_count());
      bool any = false;
      bool all = true;
      for (LeafId leaf = 0; leaf < keep.size(); ++leaf) {
        keep[leaf] = values[j][leaf] <= values[i][leaf];
        any = any || keep[leaf];
        all = all && keep[leaf];
      }
      if (!event_in_sigma_at(tree, keep, theta_k)) {
        residual.record(std::numeric_limits<double>::infinity(), [&] {
          return pair_witness("comparison event not in F_theta_k", strategies[i], strategies[j],
                              values[i], values[j]);
        });
        continue;
      }
      if (any && !all) ++mixed;
      const auto nu = concatenate(tree, grid, strategies[i], strategies[j], keep);
      if (!pointwise_le(theta_k, nu.time())) {
        residual.record(std::numeric_limits<double>::infinity(), [&] {
          return pair_witness("concatenation leaves Theta_theta_k", strategies[i], nu, values[i],
                              values[j]);
        });
        continue;
      }
      const auto value = op.evaluate(tree, theta_k, nu.time(), context.payoff().at(nu));
      const auto target = pointwise_max(values[i], values[j]);
      residual.compare(value, target, false, [&] {
        return pair_witness("concatenation misses the pointwise maximum", strategies[i],
                            strategies[j], value, target);
      });
    }
  }
  residual.report().notes.push_back(std::to_string(mixed) +
                                    " pairs where the concatenation mixes both strategies");
  return residual.take();
}

CheckReport check_oracle_equivalence(ProblemContext& context) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& u = context.backward();
  const auto& v = context.oracle();
  Residual residual("oracle_equivalence", context.tol());
  for (int k = 0; k <= grid.last_index(); ++k) {
    residual.compare(u[k], v[k], false, [&] { return values_witness("U != V", k, u[k], v[k]); });
    const auto nu = hitting_time(tree, grid, k, u, context.payoff(), context.tol());
    if (nu.borderline) {
      residual.report().notes.push_back("borderline hitting time at k=" + std::to_string(k));
    }
    const auto attained = context.op().evaluate(tree, grid.theta(k), nu.strategy.time(),
                                                context.payoff().at(nu.strategy));
    residual.compare(attained, v[k], false,
                     [&] { return values_witness("rho[xi(nu_k)] != V", k, attained, v[k]); });
  }
  return residual.take();
}

CheckReport check_dpp(ProblemContext& context) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  Residual residual("dpp", context.tol());
  const double oracle_residual =
      dpp_residual(tree, grid, context.payoff(), context.oracle(), context.op());
  residual.record(oracle_residual, [] { return Witness{"oracle V violates the DPP", {}}; });
  const double backward_residual =
      dpp_residual(tree, grid, context.payoff(), context.backward(), context.op());
  if (backward_residual != 0.0) {
    residual.report().status = Status::kFail;
    residual.report().worst_residual =
        std::max(residual.report().worst_residual, backward_residual);
    if (!residual.report().witness) {
      residual.report().witness = Witness{"backward U has a non-zero DPP residual", {}};
    }
  }
  residual.report().notes.push_back("oracle residual " + format_number(oracle_residual) +
                                    ", backward residual " + format_number(backward_residual));
  return residual.take();
}

CheckReport check_strict_value(ProblemContext& context) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& v = context.oracle();
  Residual residual("strict_value", context.tol());
  for (int k = 0; k < grid.last_index(); ++k) {
    const auto brute = oracle_strict_value(context, k);
    const auto one_step = strict_value(tree, grid, k, v, context.op());
    residual.compare(brute, one_step, false, [&] {
      return values_witness("esssup over Theta_{theta_{k+1}} != rho[V(theta_{k+1})]", k, brute,
                            one_step);
    });
    const auto joined = pointwise_max(context.payoff()[k], brute);
    residual.compare(v[k], joined, false,
                     [&] { return values_witness("V != xi v V+", k, v[k], joined); });
  }
  return residual.take();
}

CheckReport check_stopped_identities(ProblemContext& context, int k) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto& op = context.op();
  const auto& phi = context.backward();
  const auto nu = hitting_time(tree, grid, k, phi, context.payoff(), context.tol()).strategy;
  Residual residual("stopped_identities", context.tol());
  for (int l = k; l < grid.last_index(); ++l) {
    const auto lower = stopped(tree, grid, ThetaStrategy::grid_time(grid, l), nu);
    const auto upper = stopped(tree, grid, ThetaStrategy::grid_time(grid, l + 1), nu);
    const auto target = phi.at(lower);
    const auto reward = phi.at(upper);
    const auto first = op.evaluate(tree, grid.theta(l), upper.time(), reward);
    residual.compare(first, target, false, [&] {
      return values_witness("phi(theta_l ^ nu) != rho_{theta_l, theta_l+1 ^ nu}", l, first, target);
    });
    const auto second = op.evaluate(tree, lower.time(), upper.time(), reward);
    residual.compare(second, target, false, [&] {
      return values_witness("phi(theta_l ^ nu) != rho_{theta_l ^ nu, theta_l+1 ^ nu}", l, second,
                            target);
    });
  }
  return residual.take();
}

CheckReport check_domination(ProblemContext& context, const RandomVariable& eta) {
  const auto& tree = context.tree();
  const auto& grid = context.grid();
  const auto martingale = make_rho_martingale(tree, context.op(), eta, grid);
  Residual residual("domination", context.tol());
  for (int k = 0; k <= grid.last_index(); ++k) {
    for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      if (context.payoff()[k][leaf] > martingale[k][leaf] + context.tol()) {
        auto& report = residual.report();
        report.status = Status::kHypothesisUnmet;
        report.witness = values_witness("pay-off exceeds M", k, context.payoff()[k], martingale[k]);
        return residual.take();
      }
    }
  }
  const auto& v = context.oracle();
  for (int k = 0; k <= grid.last_index(); ++k) {
    residual.compare(context.payoff()[k], v[k], true,
                     [&] { return values_witness("xi > V", k, context.payoff()[k], v[k]); });
    residual.compare(v[k], martingale[k], true,
                     [&] { return values_witness("V > M", k, v[k], martingale[k]); });
  }
  return residual.take();
}

// ---------------------------------------------------------------------------
// Corpus

Instance random_instance(std::uint64_t seed, const CorpusOptions& options) {
  auto tree = random_tree(Rng::derive(seed, 0), options.max_depth, options.max_branch);
  Rng rng(Rng::derive(seed, 1));
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    auto grid = random_grid(tree, rng, options.max_grid);
    if (count_from(tree, grid, grid.theta(0)) > options.strategy_limit) continue;
    auto payoff = random_process(tree, rng, options.payoff_low, options.payoff_high);
    return Instance{seed, std::move(tree), std::move(grid), std::move(payoff)};
  }
  // Two-point grid: one decision at time 0.
  auto grid = BermudanGrid::deterministic(tree, {0, tree.depth()});
  auto payoff = random_process(tree, rng, options.payoff_low, options.payoff_high);
  return Instance{seed, std::move(tree), std::move(grid), std::move(payoff)};
}

std::vector<CheckReport> run_battery(const Instance& instance, const Evaluation& op,
                                     const BatteryOptions& options) {
  ProblemContext context(instance.tree, instance.grid,
                         payoff_family(instance.tree, instance.payoff, instance.grid), op,
                         options.cap, options.tol);
  const int n = instance.grid.last_index();
  std::vector<CheckReport> reports;
  reports.push_back(check_oracle_equivalence(context));
  reports.push_back(check_dpp(context));
  reports.push_back(check_strict_value(context));

  auto super = check_supermartingale(context, context.oracle(), false);
  super.name = "supermartingale";
  reports.push_back(std::move(super));

  CheckReport identities;
  identities.name = "stopped_identities";
  CheckReport optimality;
  optimality.name = "optimality";
  for (int k = 0; k < n; ++k) {
    identities.absorb(check_stopped_identities(context, k));
    optimality.absorb(check_optimality(context, k, op.claims().strictly_monotone));
  }
  reports.push_back(std::move(identities));
  reports.push_back(check_snell_minimality(context, options.minimality_trials,
                                           Rng::derive(options.seed, instance.seed)));
  reports.push_back(std::move(optimality));
  return reports;
}

}  // namespace optstop
