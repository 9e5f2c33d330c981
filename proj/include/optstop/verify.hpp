#pragma once

#include "optstop/evaluations.hpp"
#include "optstop/filtration_tree.hpp"
#include "optstop/snell.hpp"
#include "optstop/status.hpp"
#include "optstop/stopping.hpp"
#include "optstop/value_family.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace optstop {

/// Named payload describing a failing instance (stage maps, values, indices).
struct Witness {
  std::string description;
  std::vector<std::pair<std::string, std::vector<double>>> fields;

  void add(std::string name, std::vector<double> values) {
    fields.emplace_back(std::move(name), std::move(values));
  }
  void add(std::string name, const std::vector<int>& values) {
    fields.emplace_back(std::move(name), std::vector<double>(values.begin(), values.end()));
  }
};

struct CheckReport {
  std::string name;
  Status status = Status::kPass;
  double worst_residual = 0.0;
  std::optional<Witness> witness;
  std::vector<std::string> notes;

  bool passed() const { return is_success(status); }
  /// Folds another report in: worst residual, first witness, failing status.
  void absorb(const CheckReport& other);
};

struct OracleResult {
  RandomVariable value;
  ThetaStrategy attaining;
  std::size_t strategies = 0;
};

/// One stopping problem (tree, grid, pay-off, operator) with cached
/// enumerations, the backward family U and the brute-force value family V.
class ProblemContext {
public:
  ProblemContext(const FiltrationTree& tree, const BermudanGrid& grid, ValueFamily payoff,
                 const Evaluation& op, std::uint64_t cap = kDefaultStrategyCap,
                 double tol = kEqualityTol);

  const FiltrationTree& tree() const { return *tree_; }
  const BermudanGrid& grid() const { return *grid_; }
  const ValueFamily& payoff() const { return payoff_; }
  const Evaluation& op() const { return *op_; }
  std::uint64_t cap() const { return cap_; }
  double tol() const { return tol_; }

  /// Θ_{θ_k}, enumerated once.
  const std::vector<ThetaStrategy>& strategies_from(int k);
  /// U from backward induction.
  const ValueFamily& backward();
  /// V(θ_k) for every k by exhaustive maximization.
  const ValueFamily& oracle();
  const OracleResult& oracle_at(int k);

private:
  const FiltrationTree* tree_;
  const BermudanGrid* grid_;
  ValueFamily payoff_;
  const Evaluation* op_;
  std::uint64_t cap_;
  double tol_;
  std::map<int, std::vector<ThetaStrategy>> strategies_;
  std::optional<ValueFamily> backward_;
  std::map<int, OracleResult> oracle_at_;
  std::optional<ValueFamily> oracle_;
};

/// V(θ_k) = esssup over Θ_{θ_k} of ρ_{θ_k,τ}[ξ(τ)] with a strategy attaining
/// it at every scenario, built by left-fold concatenation (ties keep the
/// earlier-enumerated strategy).
OracleResult oracle_value(const FiltrationTree& tree, const BermudanGrid& grid, int k,
                          const ValueFamily& payoff, const Evaluation& op,
                          std::uint64_t cap = kDefaultStrategyCap);

/// V(ν) = esssup over Θ_ν of ρ_{ν,τ}[ξ(τ)] for any ν ∈ Θ.
OracleResult oracle_value_at(const FiltrationTree& tree, const BermudanGrid& grid,
                             const ThetaStrategy& nu, const ValueFamily& payoff,
                             const Evaluation& op, std::uint64_t cap = kDefaultStrategyCap);

/// esssup over Θ_{θ_{k+1}} of ρ_{θ_k,τ}[ξ(τ)], for k < n.
RandomVariable oracle_strict_value(ProblemContext& context, int k);

/// ρ_{σ,τ}[φ(τ)] ≤ φ(σ) (equality when `martingale`) for every σ ≤ τ in Θ_{θ_from}.
CheckReport check_supermartingale(ProblemContext& context, const ValueFamily& family,
                                  bool martingale, int from = 0);
CheckReport check_supermartingale(const FiltrationTree& tree, const BermudanGrid& grid,
                                  const ValueFamily& family, const Evaluation& op,
                                  bool martingale, std::uint64_t cap = kDefaultStrategyCap,
                                  double tol = kEqualityTol);

/// U is a supermartingale dominating ξ, and `trials` random supermartingale
/// majorants (backward families of ξ + non-negative adapted noise) dominate U.
CheckReport check_snell_minimality(ProblemContext& context, int trials, std::uint64_t seed);

/// ρ_{σ∧ν,τ∧ν}[φ(τ∧ν)] = φ(σ∧ν) for every σ ≤ τ in Θ_{θ_k}: φ is a martingale
/// on the stochastic interval [θ_k, ν].
CheckReport check_interval_martingale(ProblemContext& context, const ValueFamily& family,
                                      const ThetaStrategy& nu, int k);

/// Hitting-time optimality at grid index k, the optimality criterion at ν_k and,
/// when `strict_op`, its converse over every pointwise-optimal strategy.
CheckReport check_optimality(ProblemContext& context, int k, bool strict_op);

/// One-step hypothesis, the stopped one-step inequalities at τ, and the full
/// pair check. Reports kHypothesisUnmet when a one-step inequality fails.
CheckReport check_stopped_supermartingale(ProblemContext& context, const ValueFamily& family,
                                          const ThetaStrategy& tau, bool martingale);

/// V(ν) = V(ν′) on {ν = ν′} for random pairs, and V(ν) = Σ V(θ_k) 1_{A_k}.
CheckReport check_value_admissibility(ProblemContext& context, int pairs, std::uint64_t seed);

/// For every τ, τ′ ∈ Θ_{θ_k}: the concatenation on A = {ρ[ξ(τ′)] ≤ ρ[ξ(τ)]}
/// attains the pointwise maximum. Throws CapExceeded above `pair_cap` pairs.
CheckReport check_pairwise_max(ProblemContext& context, int k,
                               std::uint64_t pair_cap = 250'000);

/// U(θ_k) = V(θ_k) = ρ_{θ_k,ν_k}[ξ(ν_k)] at every k.
CheckReport check_oracle_equivalence(ProblemContext& context);

/// DPP residual of the oracle V (tolerance) and of U (must be exactly 0).
CheckReport check_dpp(ProblemContext& context);

/// Oracle V⁺(θ_k) = ρ_{θ_k,θ_{k+1}}[V(θ_{k+1})] and V = ξ ∨ V⁺.
CheckReport check_strict_value(ProblemContext& context);

/// φ(θ_l ∧ ν) = ρ_{θ_l, θ_{l+1}∧ν}[φ(θ_{l+1}∧ν)] = ρ_{θ_l∧ν, θ_{l+1}∧ν}[φ(θ_{l+1}∧ν)]
/// for l = k..n−1, with φ = U and ν its hitting time from θ_k.
CheckReport check_stopped_identities(ProblemContext& context, int k);

/// For M = ρ_{·,θ_n}[η] dominating ξ: ξ ≤ V ≤ M. kHypothesisUnmet otherwise.
CheckReport check_domination(ProblemContext& context, const RandomVariable& eta);

// ---------------------------------------------------------------------------
// Random corpus

struct CorpusOptions {
  int max_depth = 4;
  int max_branch = 3;
  int max_grid = 3;
  double payoff_low = -5.0;
  double payoff_high = 5.0;
  /// Grids are redrawn while |Θ| exceeds this.
  std::uint64_t strategy_limit = kDefaultStrategyCap;
  int max_attempts = 64;
};

struct Instance {
  std::uint64_t seed = 0;
  FiltrationTree tree;
  BermudanGrid grid;
  AdaptedProcess payoff;
};

Instance random_instance(std::uint64_t seed, const CorpusOptions& options = {});

struct BatteryOptions {
  std::uint64_t cap = kDefaultStrategyCap;
  double tol = kEqualityTol;
  int minimality_trials = 100;
  std::uint64_t seed = 1;
};

/// Every structural check for one instance and operator, in a fixed order.
std::vector<CheckReport> run_battery(const Instance& instance, const Evaluation& op,
                                     const BatteryOptions& options);

}  // namespace optstop
